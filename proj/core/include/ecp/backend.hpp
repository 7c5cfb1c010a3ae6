#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ecp/geometry.hpp"
#include "ecp/imaging.hpp"
#include "ecp/parsing.hpp"

namespace ecp {

enum class ExpectedOutput { kPoint, kBox, kChoice, kFreeText };

std::string_view to_string(ExpectedOutput e);

enum class BackendKind {
  kHttp,       // OpenAI-compatible chat-completions endpoint
  kScripted,   // fingerprint -> reply table loaded from a fixture file
  kRandom,     // uniform sampling (the random-candidate ablation)
  kSynthetic,  // resolution-limited stand-in model for the synthetic suites
};

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 500;
  double backoff_factor = 2.0;
};

struct BackendConfig {
  BackendKind kind = BackendKind::kScripted;
  std::string endpoint;     // Http: base URL, POSTs go to {endpoint}/chat/completions
  std::string api_key_env;  // Http: name of the environment variable holding the key
  std::string model_id = "model";
  CoordConvention convention = CoordConvention::kPixelAbsolute;
  RetryPolicy retry;
  std::uint64_t seed = 0;           // Random
  std::filesystem::path fixtures;   // Scripted
  int max_in_flight = 4;            // Http
  double timeout_s = 120.0;         // Http
  int max_tokens = 256;
  double temperature = 0.0;
  int min_feature_px = 8;           // Synthetic: smallest target side it can pinpoint
};

// Throws ErrorCode::kConfig naming the offending field.
void validate(const BackendConfig& cfg);

struct ImagePart {
  std::string label;
  ImageFormat format = ImageFormat::kPng;
  std::vector<std::uint8_t> bytes;
  Dims dims;
  FrameId frame;             // frame the model's coordinates refer to for this image
  std::string content_hash;  // hash of decoded pixels, see image_content_hash()
};

ImagePart make_image_part(std::string label, const DerivedImage& img, ImageFormat format);

struct ChatRequest {
  std::string model_id;
  std::string instruction;
  std::vector<ImagePart> images;
  double temperature = 0.0;
  int max_tokens = 256;
  ExpectedOutput expected = ExpectedOutput::kFreeText;
  int n_choices = 0;          // kChoice only
  std::string template_hash;  // hash of the prompt template the instruction was rendered from

  // Frame in which coordinates in the reply are interpreted: the last image.
  const FrameId& coordinate_frame() const;
};

// Throws ErrorCode::kInvalidArgument when labels repeat, a vision request
// carries no image, or n_choices is out of range for kChoice.
void validate(const ChatRequest& req);

// Hash of (model_id, instruction, image content hashes, expected output).
// Paths and timestamps never enter it.
std::string fingerprint(const ChatRequest& req);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct RawReply {
  std::string text;
  Usage usage;
  double latency_ms = 0.0;
  bool from_cache = false;
};

using ParsedOutput = std::variant<FramedPoint, FramedBox, ChoiceIndex>;

struct ModelReply {
  std::string raw_text;
  std::optional<ParsedOutput> parsed;  // set iff parsing succeeded
  std::string parse_error;
  Usage usage;
  double latency_ms = 0.0;
  bool from_cache = false;
};

// A model endpoint. Implementations are safe for concurrent call().
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  // Throws ErrorCode::kTransport or kFixtureMiss. Never parses.
  virtual RawReply call(const ChatRequest& req) = 0;
  // Everything besides the request that determines the reply (kind, seed,
  // fixture contents). Part of the cache key; must not contain paths.
  virtual std::string identity() const = 0;
  virtual BackendKind kind() const = 0;
};

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& cfg);

// Parses the reply of a call according to req.expected. Point and Box
// requests accept either form since the pipeline only needs a
// representative coordinate from them.
ModelReply interpret_reply(RawReply raw, const ChatRequest& req, CoordConvention conv);

ModelReply complete(ModelBackend& backend, const ChatRequest& req, CoordConvention conv);
ModelReply complete(const BackendConfig& cfg, const ChatRequest& req);

}  // namespace ecp
