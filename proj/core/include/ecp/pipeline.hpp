#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ecp/backend.hpp"
#include "ecp/cache.hpp"
#include "ecp/datasets.hpp"
#include "ecp/evaluation.hpp"
#include "ecp/geometry.hpp"
#include "ecp/imaging.hpp"
#include "ecp/prompts.hpp"
#include "ecp/records.hpp"

namespace ecp {

inline constexpr std::string_view kGlobalImageLabel = "full image (downsampled)";
inline constexpr std::string_view kCropImageLabel = "zoomed-in region";

struct PipelineConfig {
  Strategy strategy = Strategy::kEcp;
  Task task = Task::kGrounding;
  BackendConfig ec_backend;  // ignored by the single-stage strategy
  BackendConfig p_backend;
  CropSpec crop;
  int submit_max_side = 1280;
  // Unset means: true for multiple choice, false for grounding.
  std::optional<bool> include_global_in_stage2;
  // Multiple choice: whether the extraction prompt lists the choices.
  bool ec_sees_choices = true;
  // Longest side of the crop as sent in stage 2; 0 keeps native resolution.
  int crop_max_side = 0;
  ImageFormat image_format = ImageFormat::kPng;
  PromptTemplates templates = PromptTemplates::defaults();

  bool include_global() const {
    return include_global_in_stage2.value_or(task == Task::kMultipleChoice);
  }
};

// Throws ErrorCode::kConfig naming the offending field.
void validate(const PipelineConfig& cfg);

enum class Stage { kExtract, kPredict };

// What the pipeline sent, for inspecting request counts and payloads.
struct LoggedRequest {
  std::string sample_id;
  int permutation = 0;  // -1 for a stage-1 call shared by all permutations
  Stage stage = Stage::kPredict;
  std::string instruction;
  std::vector<std::string> image_labels;
  std::vector<FrameId> image_frames;
  std::vector<std::string> image_hashes;
  ExpectedOutput expected = ExpectedOutput::kFreeText;
  std::string fingerprint;
};

class RequestLog {
 public:
  void add(LoggedRequest entry);
  // Sorted by (sample id, stage, permutation) so logs compare across runs.
  std::vector<LoggedRequest> entries() const;
  std::size_t count(Stage stage) const;

 private:
  mutable std::mutex mu_;
  std::vector<LoggedRequest> entries_;
};

// Runs the strategies for single samples. Backends are borrowed and must be
// safe for concurrent use; so is the Pipeline itself.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::shared_ptr<ModelBackend> ec_backend,
           std::shared_ptr<ModelBackend> p_backend, RequestLog* log = nullptr);

  const PipelineConfig& config() const { return cfg_; }

  PredictionRecord run_single_stage_grounding(const GroundingSample& sample,
                                              const ImageBuffer& image) const;
  PredictionRecord run_ecp_grounding(const GroundingSample& sample,
                                     const ImageBuffer& image) const;

  // `perm` maps original choice index to label position; `perm_index` is
  // the shift it came from and is only recorded.
  PredictionRecord run_single_stage_mc(const McSample& sample, const ImageBuffer& image,
                                       const Permutation& perm, int perm_index = 0) const;
  PredictionRecord run_ecp_mc(const McSample& sample, const ImageBuffer& image,
                              const Permutation& perm, int perm_index = 0) const;

  // All permutations of one MC sample. With ECP the extraction call is made
  // once and its candidate reused, since its prompt lists choices in
  // original order and is identical across permutations.
  std::vector<PredictionRecord> run_mc_sample(const McSample& sample, const ImageBuffer& image,
                                              const std::vector<Permutation>& perms) const;

 private:
  struct Extraction;

  Extraction extract(const std::string& sample_id, const DerivedImage& full,
                     const DerivedImage& global, const std::string& instruction,
                     const std::string& template_text, ExpectedOutput expected) const;
  PredictionRecord predict_mc(const McSample& sample, const DerivedImage& global,
                              const std::optional<DerivedImage>& crop,
                              const Permutation& perm, int perm_index) const;
  ModelReply call(ModelBackend& backend, const BackendConfig& bcfg, ChatRequest req,
                  const std::string& sample_id, int permutation, Stage stage,
                  bool& from_cache) const;
  DerivedImage submitted(const ImageBuffer& image) const;

  PipelineConfig cfg_;
  std::shared_ptr<ModelBackend> ec_;
  std::shared_ptr<ModelBackend> p_;
  RequestLog* log_;
};

struct BenchmarkOptions {
  int parallelism = 1;
  // MC: one trial per cyclic shift instead of the identity order only.
  bool cyclic_permutation = true;
  std::shared_ptr<const ResponseCache> cache;  // optional
  RequestLog* log = nullptr;
  // Called after every finished sample with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct BenchmarkResult {
  std::vector<PredictionRecord> records;  // sorted by (sample id, permutation)
  std::vector<std::string> failed_ids;    // samples with at least one errored record
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;  // calls that reached a backend (cache misses)
};

// Runs every sample of the manifest and scores the records. Throws
// kConfig when the manifest task differs from cfg.task and kFrameMismatch
// when a coordinate crosses stages in the wrong frame; every other
// per-sample failure is captured in that sample's records.
BenchmarkResult run_benchmark(const Manifest& manifest, const PipelineConfig& cfg,
                              const BenchmarkOptions& opts);

// Same, with caller-provided backends (they are wrapped by the cache when
// one is given).
BenchmarkResult run_benchmark(const Manifest& manifest, const PipelineConfig& cfg,
                              std::shared_ptr<ModelBackend> ec_backend,
                              std::shared_ptr<ModelBackend> p_backend,
                              const BenchmarkOptions& opts);

}  // namespace ecp
