#include "ecp/backend.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "backend_factories.hpp"
#include "ecp/error.hpp"
#include "ecp/hashing.hpp"

namespace ecp {
namespace {

void append_field(std::string& out, std::string_view name, std::string_view value) {
  out += name;
  out += ':';
  out += std::to_string(value.size());
  out += ':';
  out += value;
  out += '\n';
}

class ScriptedBackend final : public ModelBackend {
 public:
  explicit ScriptedBackend(const BackendConfig& cfg) {
    std::ifstream in(cfg.fixtures);
    if (!in) {
      throw Error(ErrorCode::kConfig, "scripted backend: cannot open fixtures file '" +
                                          cfg.fixtures.string() + "'");
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    identity_ = "scripted:" + sha256_hex(text);
    const nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw Error(ErrorCode::kConfig, "scripted backend: fixtures file '" +
                                          cfg.fixtures.string() +
                                          "' must be a JSON object of fingerprint -> reply");
    }
    for (const auto& [fp, value] : doc.items()) {
      if (value.is_string()) {
        replies_.emplace(fp, value.get<std::string>());
      } else if (value.is_object() && value.contains("reply") && value["reply"].is_string()) {
        replies_.emplace(fp, value["reply"].get<std::string>());
      } else {
        throw Error(ErrorCode::kConfig, "scripted backend: fixture '" + fp + "' has no reply text");
      }
    }
  }

  RawReply call(const ChatRequest& req) override {
    const std::string fp = fingerprint(req);
    auto it = replies_.find(fp);
    if (it == replies_.end()) {
      throw Error(ErrorCode::kFixtureMiss,
                  "no scripted reply for fingerprint " + fp + " (model_id=" + req.model_id +
                      ", expected=" + std::string(to_string(req.expected)) + ")");
    }
    return {it->second, {}, 0.0, false};
  }

  std::string identity() const override { return identity_; }
  BackendKind kind() const override { return BackendKind::kScripted; }

 private:
  std::unordered_map<std::string, std::string> replies_;
  std::string identity_;
};

// Uniform answers seeded by (seed, fingerprint): the same request always
// gets the same sample, independent of call order.
class RandomBackend final : public ModelBackend {
 public:
  explicit RandomBackend(const BackendConfig& cfg) : seed_(cfg.seed), conv_(cfg.convention) {}

  RawReply call(const ChatRequest& req) override {
    const std::vector<std::uint8_t> d =
        sha256_bytes("random:" + std::to_string(seed_) + ":" + fingerprint(req));
    auto word = [&d](std::size_t offset) {
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | d[offset + i];
      return v;
    };
    const double u1 = static_cast<double>(word(0) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(word(8) >> 11) * 0x1.0p-53;

    RawReply reply;
    switch (req.expected) {
      case ExpectedOutput::kPoint:
      case ExpectedOutput::kBox: {
        const FrameId& frame = req.coordinate_frame();
        const FramedPoint p{u1 * frame.dims.width, u2 * frame.dims.height, frame};
        reply.text = req.expected == ExpectedOutput::kPoint
                         ? format_point(p, conv_)
                         : format_box({p.x, p.y, p.x, p.y, frame}, conv_);
        break;
      }
      case ExpectedOutput::kChoice:
        reply.text = std::string(1, choice_letter(static_cast<ChoiceIndex>(
                                        word(0) % static_cast<std::uint64_t>(req.n_choices))));
        break;
      case ExpectedOutput::kFreeText:
        break;
    }
    return reply;
  }

  std::string identity() const override {
    return "random:" + std::to_string(seed_) + ":" + std::string(to_string(conv_));
  }
  BackendKind kind() const override { return BackendKind::kRandom; }

 private:
  std::uint64_t seed_;
  CoordConvention conv_;
};

}  // namespace

std::string_view to_string(ExpectedOutput e) {
  switch (e) {
    case ExpectedOutput::kPoint: return "point";
    case ExpectedOutput::kBox: return "box";
    case ExpectedOutput::kChoice: return "choice";
    case ExpectedOutput::kFreeText: return "free_text";
  }
  return "free_text";
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttp: return "http";
    case BackendKind::kScripted: return "scripted";
    case BackendKind::kRandom: return "random";
    case BackendKind::kSynthetic: return "synthetic";
  }
  return "scripted";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "http") return BackendKind::kHttp;
  if (name == "scripted") return BackendKind::kScripted;
  if (name == "random") return BackendKind::kRandom;
  if (name == "synthetic") return BackendKind::kSynthetic;
  throw Error(ErrorCode::kConfig, "unknown backend kind '" + std::string(name) +
                                      "' (expected http, scripted, random or synthetic)");
}

void validate(const BackendConfig& cfg) {
  if (cfg.model_id.empty()) throw Error(ErrorCode::kConfig, "model_id: must not be empty");
  if (cfg.kind == BackendKind::kHttp && cfg.endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "endpoint: required for http backends");
  }
  if (cfg.kind == BackendKind::kScripted && cfg.fixtures.empty()) {
    throw Error(ErrorCode::kConfig, "fixtures: required for scripted backends");
  }
  if (cfg.retry.max_attempts < 1) throw Error(ErrorCode::kConfig, "retry.max_attempts: must be >= 1");
  if (cfg.retry.initial_backoff_ms < 0) {
    throw Error(ErrorCode::kConfig, "retry.initial_backoff_ms: must be >= 0");
  }
  if (cfg.max_in_flight < 1) throw Error(ErrorCode::kConfig, "max_in_flight: must be >= 1");
  if (cfg.max_tokens < 1) throw Error(ErrorCode::kConfig, "max_tokens: must be >= 1");
  if (cfg.temperature < 0.0) throw Error(ErrorCode::kConfig, "temperature: must be >= 0");
  if (cfg.min_feature_px < 1) throw Error(ErrorCode::kConfig, "min_feature_px: must be >= 1");
}

ImagePart make_image_part(std::string label, const DerivedImage& img, ImageFormat format) {
  ImagePart part;
  part.label = std::move(label);
  part.format = format;
  part.bytes = encode_image(img.image, format);
  part.dims = img.image.dims;
  part.frame = img.frame();
  part.content_hash = image_content_hash(img.image);
  return part;
}

const FrameId& ChatRequest::coordinate_frame() const {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "request carries no image");
  return images.back().frame;
}

void validate(const ChatRequest& req) {
  if (req.images.empty() && req.expected != ExpectedOutput::kFreeText) {
    throw Error(ErrorCode::kInvalidArgument, "vision request without images");
  }
  std::set<std::string> labels;
  for (const ImagePart& img : req.images) {
    if (!labels.insert(img.label).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate image label '" + img.label + "'");
    }
  }
  if (req.expected == ExpectedOutput::kChoice && (req.n_choices < 2 || req.n_choices > 26)) {
    throw Error(ErrorCode::kInvalidArgument, "choice request needs 2..26 choices");
  }
  if (req.max_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
}

std::string fingerprint(const ChatRequest& req) {
  std::string pre = "ecp-fingerprint-v1\n";
  append_field(pre, "model_id", req.model_id);
  append_field(pre, "instruction", req.instruction);
  append_field(pre, "expected", to_string(req.expected));
  for (const ImagePart& img : req.images) append_field(pre, "image", img.content_hash);
  return sha256_hex(pre);
}

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& cfg) {
  validate(cfg);
  switch (cfg.kind) {
    case BackendKind::kHttp: return detail::make_http_backend(cfg);
    case BackendKind::kScripted: return std::make_unique<ScriptedBackend>(cfg);
    case BackendKind::kRandom: return std::make_unique<RandomBackend>(cfg);
    case BackendKind::kSynthetic: return detail::make_synthetic_backend(cfg);
  }
  throw Error(ErrorCode::kConfig, "unknown backend kind");
}

ModelReply interpret_reply(RawReply raw, const ChatRequest& req, CoordConvention conv) {
  ModelReply reply;
  reply.raw_text = std::move(raw.text);
  reply.usage = raw.usage;
  reply.latency_ms = raw.latency_ms;
  reply.from_cache = raw.from_cache;
  try {
    switch (req.expected) {
      case ExpectedOutput::kPoint:
      case ExpectedOutput::kBox: {
        SpatialOutput out = parse_spatial(reply.raw_text, req.coordinate_frame(), conv);
        if (auto* p = std::get_if<FramedPoint>(&out)) {
          reply.parsed = *p;
        } else {
          reply.parsed = std::get<FramedBox>(out);
        }
        break;
      }
      case ExpectedOutput::kChoice:
        reply.parsed = parse_choice(reply.raw_text, req.n_choices);
        break;
      case ExpectedOutput::kFreeText:
        break;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoParse) throw;
    reply.parse_error = e.what();
  }
  return reply;
}

ModelReply complete(ModelBackend& backend, const ChatRequest& req, CoordConvention conv) {
  validate(req);
  const auto start = std::chrono::steady_clock::now();
  RawReply raw = backend.call(req);
  if (raw.latency_ms == 0.0 && !raw.from_cache) {
    raw.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return interpret_reply(std::move(raw), req, conv);
}

ModelReply complete(const BackendConfig& cfg, const ChatRequest& req) {
  auto backend = make_backend(cfg);
  return complete(*backend, req, cfg.convention);
}

}  // namespace ecp
