#include "ecp/synthetic.hpp"

#include <cmath>

#include "ecp/error.hpp"

namespace ecp::synthetic {
namespace {

constexpr std::array<NamedColor, 14> kPalette = {{
    {"red", {230, 25, 75}},
    {"green", {60, 180, 75}},
    {"blue", {0, 130, 200}},
    {"orange", {245, 130, 48}},
    {"purple", {145, 30, 180}},
    {"cyan", {70, 240, 240}},
    {"magenta", {240, 50, 230}},
    {"yellow", {255, 225, 25}},
    {"lime", {210, 245, 60}},
    {"teal", {0, 128, 128}},
    {"brown", {170, 110, 40}},
    {"navy", {0, 0, 128}},
    {"maroon", {128, 0, 0}},
    {"olive", {128, 128, 0}},
}};

using Glyph = std::array<std::string_view, kGlyphRows>;

constexpr std::array<Glyph, 10> kDigits = {{
    {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},
    {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."},
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},
}};

}  // namespace

std::span<const NamedColor> palette() { return kPalette; }

const std::array<std::string_view, kGlyphRows>& digit_pattern(int digit) {
  if (digit < 0 || digit > 9) throw Error(ErrorCode::kInvalidArgument, "digit must be 0..9");
  return kDigits[static_cast<std::size_t>(digit)];
}

Dims digit_tile_dims(int block_px) { return {kTileCols * block_px, kTileRows * block_px}; }

void draw_digit_tile(ImageBuffer& img, int x, int y, int digit, int block_px) {
  const Dims tile = digit_tile_dims(block_px);
  fill_rect(img, x, y, tile.width, tile.height, kTile);
  const auto& rows = digit_pattern(digit);
  for (int r = 0; r < kGlyphRows; ++r) {
    for (int c = 0; c < kGlyphCols; ++c) {
      if (rows[r][c] == '#') {
        fill_rect(img, x + (c + 1) * block_px, y + (r + 1) * block_px, block_px, block_px, kInk);
      }
    }
  }
}

std::optional<int> read_digit_tile(const ImageBuffer& img, int x0, int y0, int x1, int y1) {
  const double bw = static_cast<double>(x1 - x0) / kTileCols;
  const double bh = static_cast<double>(y1 - y0) / kTileRows;
  if (bw <= 0.0 || bh <= 0.0) return std::nullopt;
  std::array<std::array<bool, kGlyphCols>, kGlyphRows> ink{};
  for (int r = 0; r < kGlyphRows; ++r) {
    for (int c = 0; c < kGlyphCols; ++c) {
      const int sx = std::min(img.dims.width - 1, static_cast<int>(x0 + (c + 1.5) * bw));
      const int sy = std::min(img.dims.height - 1, static_cast<int>(y0 + (r + 1.5) * bh));
      const Rgb p = img.at(sx, sy);
      ink[r][c] = (p.r + p.g + p.b) < 3 * 128;
    }
  }
  int best = -1;
  int best_distance = kGlyphRows * kGlyphCols + 1;
  for (int d = 0; d < 10; ++d) {
    int distance = 0;
    for (int r = 0; r < kGlyphRows; ++r) {
      for (int c = 0; c < kGlyphCols; ++c) distance += (kDigits[d][r][c] == '#') != ink[r][c];
    }
    if (distance < best_distance) {
      best_distance = distance;
      best = d;
    }
  }
  constexpr int kMaxMismatches = 3;
  if (best_distance > kMaxMismatches) return std::nullopt;
  return best;
}

}  // namespace ecp::synthetic
