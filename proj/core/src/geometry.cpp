#include "ecp/geometry.hpp"

#include <algorithm>
#include <string>

#include "ecp/error.hpp"

namespace ecp {
namespace {

std::string describe(const FrameId& f) {
  return std::string(to_string(f.kind)) + "[" + std::to_string(f.dims.width) + "x" +
         std::to_string(f.dims.height) + "]";
}

void require_same_frame(const FrameId& a, const FrameId& b, std::string_view what) {
  if (!(a == b)) {
    throw Error(ErrorCode::kFrameMismatch,
                std::string(what) + ": " + describe(a) + " vs " + describe(b));
  }
}

}  // namespace

Dims make_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "dims must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  return {width, height};
}

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::kFullRes: return "full_res";
    case FrameKind::kSubmitted: return "submitted";
    case FrameKind::kCropLocal: return "crop_local";
  }
  return "unknown";
}

bool is_valid(const FramedPoint& p) {
  const Dims& d = p.frame.dims;
  return d.width >= 1 && d.height >= 1 && p.x >= 0.0 && p.y >= 0.0 && p.x <= d.width &&
         p.y <= d.height;
}

bool is_valid(const FramedBox& b) {
  const Dims& d = b.frame.dims;
  return d.width >= 1 && d.height >= 1 && b.x1 <= b.x2 && b.y1 <= b.y2 && b.x1 >= 0.0 &&
         b.y1 >= 0.0 && b.x2 <= d.width && b.y2 <= d.height;
}

FramedPoint representative_coordinate(const SpatialOutput& out) {
  if (const auto* p = std::get_if<FramedPoint>(&out)) return *p;
  return std::get<FramedBox>(out).center();
}

CropSpec effective_crop(Dims image, CropSpec crop) {
  if (crop.w < 1 || crop.h < 1) {
    throw Error(ErrorCode::kInvalidArgument, "crop size must be positive");
  }
  return {std::min(crop.w, image.width), std::min(crop.h, image.height)};
}

FramedBox candidate_box(const FramedPoint& rep, Dims image, CropSpec crop) {
  if (!(rep.frame.dims == image)) {
    throw Error(ErrorCode::kFrameMismatch,
                "candidate_box: representative point lives in " + describe(rep.frame) +
                    " but image is " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
  const CropSpec eff = effective_crop(image, crop);
  const double w = eff.w;
  const double h = eff.h;
  const double left = std::max(0.0, std::min(rep.x - w / 2.0, image.width - w));
  const double top = std::max(0.0, std::min(rep.y - h / 2.0, image.height - h));
  return {left, top, left + w, top + h, rep.frame};
}

FrameTransform identity_transform(const FrameId& frame) {
  return {1.0, 1.0, 0.0, 0.0, frame, frame};
}

FrameTransform scaling_transform(const FrameId& from, const FrameId& to) {
  return {static_cast<double>(to.dims.width) / from.dims.width,
          static_cast<double>(to.dims.height) / from.dims.height,
          0.0,
          0.0,
          from,
          to};
}

FrameTransform translation_transform(const FrameId& from, const FrameId& to, double offset_x,
                                     double offset_y) {
  return {1.0, 1.0, offset_x, offset_y, from, to};
}

FrameTransform compose(const FrameTransform& first, const FrameTransform& second) {
  require_same_frame(first.to, second.from, "compose");
  return {first.scale_x * second.scale_x,
          first.scale_y * second.scale_y,
          first.offset_x * second.scale_x + second.offset_x,
          first.offset_y * second.scale_y + second.offset_y,
          first.from,
          second.to};
}

FrameTransform invert(const FrameTransform& t) {
  if (!(t.scale_x > 0.0) || !(t.scale_y > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invert: scales must be positive");
  }
  return {1.0 / t.scale_x,
          1.0 / t.scale_y,
          -t.offset_x / t.scale_x,
          -t.offset_y / t.scale_y,
          t.to,
          t.from};
}

FramedPoint transform_point(const FramedPoint& p, const FrameTransform& t) {
  require_same_frame(p.frame, t.from, "transform_point");
  const double x = p.x * t.scale_x + t.offset_x;
  const double y = p.y * t.scale_y + t.offset_y;
  return {std::clamp(x, 0.0, static_cast<double>(t.to.dims.width)),
          std::clamp(y, 0.0, static_cast<double>(t.to.dims.height)),
          t.to};
}

FramedBox transform_box(const FramedBox& b, const FrameTransform& t) {
  const FramedPoint a = transform_point({b.x1, b.y1, b.frame}, t);
  const FramedPoint c = transform_point({b.x2, b.y2, b.frame}, t);
  return {a.x, a.y, c.x, c.y, t.to};
}

bool point_in_box(const FramedPoint& p, const FramedBox& b) {
  require_same_frame(p.frame, b.frame, "point_in_box");
  return b.x1 <= p.x && p.x <= b.x2 && b.y1 <= p.y && p.y <= b.y2;
}

}  // namespace ecp
