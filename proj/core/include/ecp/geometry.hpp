#pragma once

#include <string_view>
#include <variant>

namespace ecp {

struct Dims {
  int width = 1;
  int height = 1;

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Throws ErrorCode::kInvalidArgument unless both sides are >= 1.
Dims make_dims(int width, int height);

enum class FrameKind { kFullRes, kSubmitted, kCropLocal };

std::string_view to_string(FrameKind kind);

// Names the coordinate system a point or box lives in. Two frames are equal
// when both the kind and the pixel extent agree.
struct FrameId {
  FrameKind kind = FrameKind::kFullRes;
  Dims dims;

  friend bool operator==(const FrameId&, const FrameId&) = default;
};

inline FrameId full_res_frame(Dims dims) { return {FrameKind::kFullRes, dims}; }
inline FrameId submitted_frame(Dims dims) { return {FrameKind::kSubmitted, dims}; }
inline FrameId crop_local_frame(Dims dims) { return {FrameKind::kCropLocal, dims}; }

struct FramedPoint {
  double x = 0.0;
  double y = 0.0;
  FrameId frame;

  friend bool operator==(const FramedPoint&, const FramedPoint&) = default;
};

struct FramedBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  FrameId frame;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  FramedPoint center() const { return {(x1 + x2) / 2.0, (y1 + y2) / 2.0, frame}; }

  friend bool operator==(const FramedBox&, const FramedBox&) = default;
};

// Stage-1 model output: either a point of interest or a bounding box.
using SpatialOutput = std::variant<FramedPoint, FramedBox>;

// Candidate region size. 1024x1024 is the published default.
struct CropSpec {
  int w = 1024;
  int h = 1024;

  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

// Per-axis affine map `to = from * scale + offset` between two frames.
// Scales are always positive, so box corner ordering survives the mapping.
struct FrameTransform {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  FrameId from;
  FrameId to;
};

bool is_valid(const FramedPoint& p);
bool is_valid(const FramedBox& b);

FramedPoint representative_coordinate(const SpatialOutput& out);

// Effective crop size: the requested size shrunk to fit inside `image`.
CropSpec effective_crop(Dims image, CropSpec crop);

// Window of the effective crop size centred on `rep`, shifted so that it
// stays inside the image. Coordinates are exact reals; rounding to pixels
// happens only when the crop is cut out of the image.
FramedBox candidate_box(const FramedPoint& rep, Dims image, CropSpec crop);

FrameTransform identity_transform(const FrameId& frame);
// Pure scaling so that the corners of `from` land on the corners of `to`.
FrameTransform scaling_transform(const FrameId& from, const FrameId& to);
FrameTransform translation_transform(const FrameId& from, const FrameId& to,
                                     double offset_x, double offset_y);
// `second` applied after `first`; requires first.to == second.from.
FrameTransform compose(const FrameTransform& first, const FrameTransform& second);
FrameTransform invert(const FrameTransform& t);

// Result is clamped to the bounds of t.to.
FramedPoint transform_point(const FramedPoint& p, const FrameTransform& t);
FramedBox transform_box(const FramedBox& b, const FrameTransform& t);

// Closed on all four edges.
bool point_in_box(const FramedPoint& p, const FramedBox& b);

}  // namespace ecp
