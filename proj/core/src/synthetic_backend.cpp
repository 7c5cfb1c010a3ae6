// Resolution-limited stand-in model for the synthetic grounding and digit
// suites. It looks at the pixels it is sent and answers the way a real MLLM
// behaves on high-resolution input: targets spanning at least
// `min_feature_px` pixels are located exactly, smaller ones only to the
// nearest coarse grid cell, and digits are read only when their tile spans
// at least twice that size. Unreadable digit questions get the positional
// answer "A".

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include "backend_factories.hpp"
#include "ecp/error.hpp"
#include "ecp/synthetic.hpp"

namespace ecp {
namespace {

struct Blob {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;  // exclusive
  double cx = 0.0;
  double cy = 0.0;
  long count = 0;

  int min_side() const { return std::min(x1 - x0, y1 - y0); }
};

template <typename Pred>
std::optional<Blob> find_blob(const ImageBuffer& img, Pred matches) {
  Blob b;
  b.x0 = img.dims.width;
  b.y0 = img.dims.height;
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < img.dims.height; ++y) {
    for (int x = 0; x < img.dims.width; ++x) {
      if (!matches(img.at(x, y))) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x + 1);
      b.y1 = std::max(b.y1, y + 1);
      sx += x + 0.5;
      sy += y + 0.5;
      ++b.count;
    }
  }
  if (b.count == 0) return std::nullopt;
  b.cx = sx / b.count;
  b.cy = sy / b.count;
  return b;
}

bool near(Rgb a, Rgb b, int tol) {
  return std::abs(a.r - b.r) <= tol && std::abs(a.g - b.g) <= tol && std::abs(a.b - b.b) <= tol;
}

bool is_tile(Rgb p) { return p.r >= 230 && p.g >= 230 && p.b >= 230; }

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<Rgb> named_color_in(std::string_view instruction) {
  const std::string text = lowercase(instruction);
  auto word_at = [&text](std::size_t pos, std::size_t len) {
    const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(text[pos - 1]));
    const bool right =
        pos + len >= text.size() || !std::isalpha(static_cast<unsigned char>(text[pos + len]));
    return left && right;
  };
  std::optional<Rgb> found;
  std::size_t first = std::string::npos;
  for (const auto& c : synthetic::palette()) {
    for (std::size_t pos = text.find(c.name); pos != std::string::npos;
         pos = text.find(c.name, pos + 1)) {
      if (word_at(pos, c.name.size()) && pos < first) {
        first = pos;
        found = c.rgb;
      }
    }
  }
  return found;
}

// "X. text" lines of a rendered choice block.
std::vector<std::pair<char, std::string>> displayed_choices(std::string_view instruction) {
  std::vector<std::pair<char, std::string>> out;
  std::size_t start = 0;
  while (start <= instruction.size()) {
    std::size_t end = instruction.find('\n', start);
    if (end == std::string_view::npos) end = instruction.size();
    const std::string_view line = instruction.substr(start, end - start);
    if (line.size() >= 3 && line[0] >= 'A' && line[0] <= 'Z' && line[1] == '.' && line[2] == ' ') {
      out.emplace_back(line[0], std::string(line.substr(3)));
    }
    start = end + 1;
  }
  return out;
}

class SyntheticBackend final : public ModelBackend {
 public:
  explicit SyntheticBackend(const BackendConfig& cfg)
      : min_feature_(cfg.min_feature_px), conv_(cfg.convention) {}

  RawReply call(const ChatRequest& req) override {
    std::vector<ImageBuffer> images;
    images.reserve(req.images.size());
    for (const ImagePart& part : req.images) images.push_back(decode_image(part.bytes, part.label));

    RawReply reply;
    switch (req.expected) {
      case ExpectedOutput::kPoint:
      case ExpectedOutput::kBox:
        reply.text = locate(images.back(), req);
        break;
      case ExpectedOutput::kChoice:
        reply.text = answer_choice(images, req);
        break;
      case ExpectedOutput::kFreeText:
        break;
    }
    return reply;
  }

  std::string identity() const override {
    return "synthetic:v1:min_feature=" + std::to_string(min_feature_) + ":" +
           std::string(to_string(conv_));
  }
  BackendKind kind() const override { return BackendKind::kSynthetic; }

 private:
  std::string locate(const ImageBuffer& img, const ChatRequest& req) const {
    const std::optional<Rgb> color = named_color_in(req.instruction);
    std::optional<Blob> blob =
        color ? find_blob(img, [&](Rgb p) { return near(p, *color, 48); }) : find_blob(img, is_tile);
    if (!blob) return "I cannot find the target in this image.";

    const FrameId& frame = req.coordinate_frame();
    FramedBox box{static_cast<double>(blob->x0), static_cast<double>(blob->y0),
                  static_cast<double>(blob->x1), static_cast<double>(blob->y1), frame};
    if (blob->min_side() < min_feature_) {
      const double cell = 4.0 * min_feature_;
      const double gx = std::floor(blob->cx / cell) * cell;
      const double gy = std::floor(blob->cy / cell) * cell;
      box = {gx, gy, std::min(gx + cell, static_cast<double>(frame.dims.width)),
             std::min(gy + cell, static_cast<double>(frame.dims.height)), frame};
    }
    if (req.expected == ExpectedOutput::kBox) return format_box(box, conv_);
    return format_point(box.center(), conv_);
  }

  std::string answer_choice(const std::vector<ImageBuffer>& images, const ChatRequest& req) const {
    const auto choices = displayed_choices(req.instruction);
    for (const ImageBuffer& img : images) {
      const std::optional<Blob> tile = find_blob(img, is_tile);
      if (!tile || tile->min_side() < 2 * min_feature_) continue;
      const std::optional<int> digit =
          synthetic::read_digit_tile(img, tile->x0, tile->y0, tile->x1, tile->y1);
      if (!digit) continue;
      for (const auto& [letter, text] : choices) {
        if (text == std::to_string(*digit)) return std::string(1, letter);
      }
    }
    return "A";
  }

  int min_feature_;
  CoordConvention conv_;
};

}  // namespace

namespace detail {

std::unique_ptr<ModelBackend> make_synthetic_backend(const BackendConfig& cfg) {
  return std::make_unique<SyntheticBackend>(cfg);
}

}  // namespace detail
}  // namespace ecp
