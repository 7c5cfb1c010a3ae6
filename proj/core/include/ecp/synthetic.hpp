#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "ecp/imaging.hpp"

namespace ecp::synthetic {

struct NamedColor {
  std::string_view name;
  Rgb rgb;
};

// Target colours for grounding scenes; none is close to the background or
// to the glyph tile colour.
std::span<const NamedColor> palette();

inline constexpr Rgb kBackground{128, 128, 128};
inline constexpr Rgb kTile{255, 255, 255};
inline constexpr Rgb kInk{0, 0, 0};

inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;
// A glyph sits on a white tile with a one-block margin on every side.
inline constexpr int kTileCols = kGlyphCols + 2;
inline constexpr int kTileRows = kGlyphRows + 2;

// Rows of the 5x7 block font, '#' = ink.
const std::array<std::string_view, kGlyphRows>& digit_pattern(int digit);

Dims digit_tile_dims(int block_px);
void draw_digit_tile(ImageBuffer& img, int x, int y, int digit, int block_px);

// Reads the digit on a tile whose white extent is [x0, x1) x [y0, y1) by
// sampling block centres. Returns nothing when no glyph is close enough.
std::optional<int> read_digit_tile(const ImageBuffer& img, int x0, int y0, int x1, int y1);

}  // namespace ecp::synthetic
