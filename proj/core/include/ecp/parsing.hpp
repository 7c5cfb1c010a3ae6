#pragma once

#include <string>
#include <string_view>

#include "ecp/geometry.hpp"

namespace ecp {

// How a backend writes coordinates in its replies.
enum class CoordConvention {
  kPixelAbsolute,       // pixels of the submitted image
  kNormalizedThousand,  // 0..1000 per axis
  kNormalizedUnit,      // 0..1 per axis
};

std::string_view to_string(CoordConvention conv);
// Throws ErrorCode::kConfig for unknown names.
CoordConvention coord_convention_from_string(std::string_view name);

using ChoiceIndex = int;

// Parsers read the first coordinate group written as "(x, y)" or
// "(x1, y1, x2, y2)", tolerating square brackets, "x=" style labels and
// split pairs such as "(x1,y1),(x2,y2)". Results are denormalised per
// convention and clamped into `frame`. All throw ErrorCode::kNoParse.
FramedPoint parse_point(std::string_view text, const FrameId& frame, CoordConvention conv);
FramedBox parse_box(std::string_view text, const FrameId& frame, CoordConvention conv);
// Box when a 4-tuple is present, otherwise point.
SpatialOutput parse_spatial(std::string_view text, const FrameId& frame, CoordConvention conv);

// First in-range choice letter, preferring "Answer: X", then "(X)", then a
// letter opening the reply ("X", "X.", "X)"), then any standalone letter.
ChoiceIndex parse_choice(std::string_view text, int n_choices);

std::string format_point(const FramedPoint& p, CoordConvention conv);
std::string format_box(const FramedBox& b, CoordConvention conv);

char choice_letter(ChoiceIndex index);

}  // namespace ecp
