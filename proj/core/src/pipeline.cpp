#include "ecp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>
#include <tuple>

#include "ecp/error.hpp"
#include "ecp/hashing.hpp"

namespace ecp {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

StageTrace trace_of(const ModelReply& r) { return {r.raw_text, r.parsed, r.parse_error, r.usage}; }

bool is_frame_bug(const Error& e) { return e.code() == ErrorCode::kFrameMismatch; }

PredictionRecord base_record(const std::string& id, Strategy strategy, Task task,
                             std::string category) {
  PredictionRecord r;
  r.sample_id = id;
  r.strategy = strategy;
  r.task = task;
  r.category = std::move(category);
  return r;
}

std::string dims_text(Dims d) { return std::to_string(d.width) + "x" + std::to_string(d.height); }

std::optional<RecordError> check_dims(const ImageBuffer& image, Dims declared) {
  if (image.dims == declared) return std::nullopt;
  return RecordError{"load", ErrorCode::kSchema,
                     "image is " + dims_text(image.dims) + " but the manifest declares " +
                         dims_text(declared)};
}

std::vector<std::string> permuted(const std::vector<std::string>& choices, const Permutation& perm) {
  std::vector<std::string> shown(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) shown[perm[i]] = choices[i];
  return shown;
}

// Counts calls that actually reach a backend, beneath any cache.
class CountingBackend final : public ModelBackend {
 public:
  explicit CountingBackend(std::shared_ptr<ModelBackend> inner) : inner_(std::move(inner)) {}
  RawReply call(const ChatRequest& req) override {
    ++calls_;
    return inner_->call(req);
  }
  std::string identity() const override { return inner_->identity(); }
  BackendKind kind() const override { return inner_->kind(); }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace

namespace {

void validate_image_fields(const PipelineConfig& cfg) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kConfig, "invalid config field '" + field + "': " + why);
  };
  if (cfg.crop.w < 1 || cfg.crop.h < 1) bad("crop", "width and height must be positive");
  if (cfg.submit_max_side < 1) bad("submit_max_side", "must be positive");
  if (cfg.crop_max_side < 0) bad("crop_max_side", "must be zero or positive");
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  validate_image_fields(cfg);
  validate(cfg.p_backend);
  if (cfg.strategy == Strategy::kEcp) validate(cfg.ec_backend);
}

void RequestLog::add(LoggedRequest entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<LoggedRequest> RequestLog::entries() const {
  std::vector<LoggedRequest> out;
  {
    std::lock_guard lock(mu_);
    out = entries_;
  }
  std::stable_sort(out.begin(), out.end(), [](const LoggedRequest& a, const LoggedRequest& b) {
    return std::tie(a.sample_id, a.stage, a.permutation) <
           std::tie(b.sample_id, b.stage, b.permutation);
  });
  return out;
}

std::size_t RequestLog::count(Stage stage) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [stage](const LoggedRequest& e) { return e.stage == stage; }));
}

struct Pipeline::Extraction {
  Stage1Trace trace;
  FramedBox candidate;
  DerivedImage crop;
  double ms = 0.0;
  bool from_cache = false;
};

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<ModelBackend> ec_backend,
                   std::shared_ptr<ModelBackend> p_backend, RequestLog* log)
    : cfg_(std::move(cfg)), ec_(std::move(ec_backend)), p_(std::move(p_backend)), log_(log) {
  validate_image_fields(cfg_);
  if (!p_) throw Error(ErrorCode::kConfig, "pipeline needs a prediction backend");
  if (cfg_.strategy == Strategy::kEcp && !ec_) {
    throw Error(ErrorCode::kConfig, "ECP strategy needs an extraction backend");
  }
}

DerivedImage Pipeline::submitted(const ImageBuffer& image) const {
  return downsample(image, cfg_.submit_max_side);
}

ModelReply Pipeline::call(ModelBackend& backend, const BackendConfig& bcfg, ChatRequest req,
                          const std::string& sample_id, int permutation, Stage stage,
                          bool& from_cache) const {
  req.model_id = bcfg.model_id;
  req.temperature = bcfg.temperature;
  req.max_tokens = bcfg.max_tokens;
  validate(req);
  if (log_ != nullptr) {
    LoggedRequest e;
    e.sample_id = sample_id;
    e.permutation = permutation;
    e.stage = stage;
    e.instruction = req.instruction;
    for (const ImagePart& img : req.images) {
      e.image_labels.push_back(img.label);
      e.image_frames.push_back(img.frame);
      e.image_hashes.push_back(img.content_hash);
    }
    e.expected = req.expected;
    e.fingerprint = fingerprint(req);
    log_->add(std::move(e));
  }
  ModelReply reply = complete(backend, req, bcfg.convention);
  from_cache = reply.from_cache;
  return reply;
}

Pipeline::Extraction Pipeline::extract(const std::string& sample_id, const DerivedImage& full,
                                       const DerivedImage& global,
                                       const std::string& instruction,
                                       const std::string& template_text,
                                       ExpectedOutput expected) const {
  const auto start = Clock::now();
  ChatRequest req;
  req.instruction = instruction;
  req.images.push_back(make_image_part(std::string(kGlobalImageLabel), global, cfg_.image_format));
  req.expected = expected;
  req.template_hash = sha256_hex(template_text);

  Extraction ex;
  std::optional<FramedPoint> rep;
  try {
    const ModelReply r =
        call(*ec_, cfg_.ec_backend, std::move(req), sample_id, -1, Stage::kExtract, ex.from_cache);
    ex.trace.call = trace_of(r);
    if (r.parsed) {
      if (const auto* p = std::get_if<FramedPoint>(&*r.parsed)) {
        rep = transform_point(*p, global.to_fullres);
      } else if (const auto* b = std::get_if<FramedBox>(&*r.parsed)) {
        rep = representative_coordinate(transform_box(*b, global.to_fullres));
      }
    } else {
      ex.trace.fallback_reason = "no-parse: " + r.parse_error;
    }
  } catch (const Error& e) {
    if (is_frame_bug(e)) throw;
    ex.trace.fallback_reason = std::string(to_string(e.code())) + ": " + e.what();
  }
  if (!rep) {
    ex.trace.fallback = true;
    const Dims d = full.image.dims;
    rep = FramedPoint{d.width / 2.0, d.height / 2.0, full.frame()};
  }
  ex.trace.rep = *rep;
  ex.candidate = candidate_box(*rep, full.image.dims, cfg_.crop);
  ex.crop = crop(full, ex.candidate);
  if (cfg_.crop_max_side > 0) ex.crop = downsample(ex.crop, cfg_.crop_max_side);
  ex.ms = ms_since(start);
  return ex;
}

namespace {

// Shared by both grounding strategies: one prediction call whose reply is
// mapped from the frame of the last image back to full resolution.
void predict_spatial(PredictionRecord& rec, const std::function<ModelReply(bool&)>& issue,
                     const FrameTransform& to_fullres, double& ms, bool& from_cache) {
  const auto start = Clock::now();
  try {
    const ModelReply r = issue(from_cache);
    rec.stage2 = trace_of(r);
    if (!r.parsed) {
      rec.error = RecordError{"stage2", ErrorCode::kNoParse, r.parse_error};
    } else if (const auto* p = std::get_if<FramedPoint>(&*r.parsed)) {
      rec.final = transform_point(*p, to_fullres);
    } else if (const auto* b = std::get_if<FramedBox>(&*r.parsed)) {
      rec.final = transform_box(*b, to_fullres);
    }
  } catch (const Error& e) {
    if (is_frame_bug(e)) throw;
    rec.error = RecordError{"stage2", e.code(), e.what()};
  }
  ms = ms_since(start);
}

}  // namespace

PredictionRecord Pipeline::run_single_stage_grounding(const GroundingSample& sample,
                                                      const ImageBuffer& image) const {
  const auto start = Clock::now();
  PredictionRecord rec = base_record(sample.id, Strategy::kSingleStage, Task::kGrounding,
                                     std::string(to_string(sample.category)));
  if ((rec.error = check_dims(image, sample.image_dims))) return rec;

  const DerivedImage global = submitted(image);
  ChatRequest req;
  req.instruction = render_template(
      cfg_.templates.p_grounding,
      {{"instruction", sample.instruction}, {"coords", coordinate_hint(cfg_.p_backend.convention)}});
  req.images.push_back(make_image_part(std::string(kGlobalImageLabel), global, cfg_.image_format));
  req.expected = ExpectedOutput::kPoint;
  req.template_hash = sha256_hex(cfg_.templates.p_grounding);

  predict_spatial(
      rec,
      [&](bool& cached) {
        return call(*p_, cfg_.p_backend, req, sample.id, 0, Stage::kPredict, cached);
      },
      global.to_fullres, rec.timings.stage2_ms, rec.timings.stage2_from_cache);
  rec.timings.total_ms = ms_since(start);
  return rec;
}

PredictionRecord Pipeline::run_ecp_grounding(const GroundingSample& sample,
                                             const ImageBuffer& image) const {
  const auto start = Clock::now();
  PredictionRecord rec = base_record(sample.id, Strategy::kEcp, Task::kGrounding,
                                     std::string(to_string(sample.category)));
  if ((rec.error = check_dims(image, sample.image_dims))) return rec;

  const DerivedImage full = as_full_res(image);
  const DerivedImage global = submitted(image);
  const std::string ec_text = render_template(
      cfg_.templates.ec_grounding,
      {{"instruction", sample.instruction}, {"coords", coordinate_hint(cfg_.ec_backend.convention)}});
  Extraction ex = extract(sample.id, full, global, ec_text, cfg_.templates.ec_grounding,
                          ExpectedOutput::kBox);
  rec.stage1 = ex.trace;
  rec.candidate = ex.candidate;
  rec.timings.stage1_ms = ex.ms;
  rec.timings.stage1_from_cache = ex.from_cache;

  ChatRequest req;
  req.instruction = render_template(
      cfg_.templates.p_grounding,
      {{"instruction", sample.instruction}, {"coords", coordinate_hint(cfg_.p_backend.convention)}});
  if (cfg_.include_global()) {
    req.images.push_back(
        make_image_part(std::string(kGlobalImageLabel), global, cfg_.image_format));
  }
  req.images.push_back(make_image_part(std::string(kCropImageLabel), ex.crop, cfg_.image_format));
  req.expected = ExpectedOutput::kPoint;
  req.template_hash = sha256_hex(cfg_.templates.p_grounding);

  predict_spatial(
      rec,
      [&](bool& cached) {
        return call(*p_, cfg_.p_backend, req, sample.id, 0, Stage::kPredict, cached);
      },
      ex.crop.to_fullres, rec.timings.stage2_ms, rec.timings.stage2_from_cache);
  rec.timings.total_ms = ms_since(start);
  return rec;
}

PredictionRecord Pipeline::predict_mc(const McSample& sample, const DerivedImage& global,
                                      const std::optional<DerivedImage>& crop_img,
                                      const Permutation& perm, int perm_index) const {
  PredictionRecord rec =
      base_record(sample.id, crop_img ? Strategy::kEcp : Strategy::kSingleStage,
                  Task::kMultipleChoice, std::string(to_string(sample.category)));
  rec.permutation = perm_index;
  rec.choice_order = perm;
  if (perm.size() != sample.choices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "permutation size differs from the choice count");
  }
  const Permutation inverse = inverse_permutation(perm);

  const auto start = Clock::now();
  ChatRequest req;
  req.instruction = render_template(
      cfg_.templates.p_perception,
      {{"question", sample.question}, {"choices", format_choices(permuted(sample.choices, perm))}});
  if (!crop_img || cfg_.include_global()) {
    req.images.push_back(
        make_image_part(std::string(kGlobalImageLabel), global, cfg_.image_format));
  }
  if (crop_img) {
    req.images.push_back(
        make_image_part(std::string(kCropImageLabel), *crop_img, cfg_.image_format));
  }
  req.expected = ExpectedOutput::kChoice;
  req.n_choices = static_cast<int>(sample.choices.size());
  req.template_hash = sha256_hex(cfg_.templates.p_perception);

  try {
    const ModelReply r = call(*p_, cfg_.p_backend, std::move(req), sample.id, perm_index,
                              Stage::kPredict, rec.timings.stage2_from_cache);
    rec.stage2 = trace_of(r);
    if (r.parsed) {
      rec.final = inverse[std::get<ChoiceIndex>(*r.parsed)];
    } else {
      rec.error = RecordError{"stage2", ErrorCode::kNoParse, r.parse_error};
    }
  } catch (const Error& e) {
    if (is_frame_bug(e)) throw;
    rec.error = RecordError{"stage2", e.code(), e.what()};
  }
  rec.timings.stage2_ms = ms_since(start);
  return rec;
}

std::vector<PredictionRecord> Pipeline::run_mc_sample(const McSample& sample,
                                                      const ImageBuffer& image,
                                                      const std::vector<Permutation>& perms) const {
  const auto start = Clock::now();
  std::vector<PredictionRecord> out;
  if (auto err = check_dims(image, sample.image_dims)) {
    for (std::size_t k = 0; k < perms.size(); ++k) {
      PredictionRecord rec = base_record(sample.id, cfg_.strategy, Task::kMultipleChoice,
                                         std::string(to_string(sample.category)));
      rec.permutation = static_cast<int>(k);
      rec.choice_order = perms[k];
      rec.error = err;
      out.push_back(std::move(rec));
    }
    return out;
  }

  const DerivedImage global = submitted(image);
  std::optional<Extraction> ex;
  if (cfg_.strategy == Strategy::kEcp) {
    const std::string choices =
        cfg_.ec_sees_choices ? "\n" + format_choices(sample.choices) : std::string();
    const std::string ec_text = render_template(
        cfg_.templates.ec_perception, {{"question", sample.question},
                                       {"choices", choices},
                                       {"coords", coordinate_hint(cfg_.ec_backend.convention)}});
    ex = extract(sample.id, as_full_res(image), global, ec_text, cfg_.templates.ec_perception,
                 ExpectedOutput::kPoint);
  }
  for (std::size_t k = 0; k < perms.size(); ++k) {
    PredictionRecord rec =
        predict_mc(sample, global, ex ? std::optional<DerivedImage>(ex->crop) : std::nullopt,
                   perms[k], static_cast<int>(k));
    if (ex) {
      rec.stage1 = ex->trace;
      rec.candidate = ex->candidate;
      rec.timings.stage1_ms = ex->ms;
      rec.timings.stage1_from_cache = ex->from_cache;
    }
    rec.timings.total_ms = ms_since(start);
    out.push_back(std::move(rec));
  }
  return out;
}

PredictionRecord Pipeline::run_single_stage_mc(const McSample& sample, const ImageBuffer& image,
                                               const Permutation& perm, int perm_index) const {
  if (auto err = check_dims(image, sample.image_dims)) {
    PredictionRecord rec = base_record(sample.id, Strategy::kSingleStage, Task::kMultipleChoice,
                                       std::string(to_string(sample.category)));
    rec.permutation = perm_index;
    rec.choice_order = perm;
    rec.error = err;
    return rec;
  }
  PredictionRecord rec = predict_mc(sample, submitted(image), std::nullopt, perm, perm_index);
  rec.timings.total_ms = rec.timings.stage2_ms;
  return rec;
}

PredictionRecord Pipeline::run_ecp_mc(const McSample& sample, const ImageBuffer& image,
                                      const Permutation& perm, int perm_index) const {
  if (!ec_) throw Error(ErrorCode::kConfig, "ECP strategy needs an extraction backend");
  Pipeline ecp(*this);
  ecp.cfg_.strategy = Strategy::kEcp;
  std::vector<PredictionRecord> recs = ecp.run_mc_sample(sample, image, {perm});
  recs.front().permutation = perm_index;
  return std::move(recs.front());
}

BenchmarkResult run_benchmark(const Manifest& manifest, const PipelineConfig& cfg,
                              const BenchmarkOptions& opts) {
  validate(cfg);
  std::shared_ptr<ModelBackend> ec;
  if (cfg.strategy == Strategy::kEcp) ec = make_backend(cfg.ec_backend);
  return run_benchmark(manifest, cfg, std::move(ec), make_backend(cfg.p_backend), opts);
}

BenchmarkResult run_benchmark(const Manifest& manifest, const PipelineConfig& cfg,
                              std::shared_ptr<ModelBackend> ec_backend,
                              std::shared_ptr<ModelBackend> p_backend,
                              const BenchmarkOptions& opts) {
  if (manifest.task != cfg.task) {
    throw Error(ErrorCode::kConfig, "manifest task '" + std::string(to_string(manifest.task)) +
                                        "' does not match config task '" +
                                        std::string(to_string(cfg.task)) + "'");
  }
  validate_image_fields(cfg);
  if (opts.parallelism < 1) {
    throw Error(ErrorCode::kConfig, "invalid config field 'parallelism': must be positive");
  }

  std::vector<std::shared_ptr<CountingBackend>> counters;
  std::vector<std::shared_ptr<CachedBackend>> cached;
  auto wrap = [&](std::shared_ptr<ModelBackend> b) -> std::shared_ptr<ModelBackend> {
    if (!b) return b;
    auto counter = std::make_shared<CountingBackend>(std::move(b));
    counters.push_back(counter);
    if (!opts.cache) return counter;
    auto c = std::make_shared<CachedBackend>(counter, opts.cache);
    cached.push_back(c);
    return c;
  };
  const Pipeline pipeline(cfg, wrap(std::move(ec_backend)), wrap(std::move(p_backend)), opts.log);

  const std::size_t n = manifest.size();
  std::vector<std::vector<PredictionRecord>> slots(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex mu;

  auto process = [&](std::size_t i) {
    const bool grounding = manifest.task == Task::kGrounding;
    const std::string& id = grounding ? manifest.grounding[i].id : manifest.mc[i].id;
    const auto& image_rel = grounding ? manifest.grounding[i].image : manifest.mc[i].image;
    std::optional<ImageBuffer> image;
    std::optional<RecordError> load_error;
    try {
      image = load_image(manifest.resolve_image(image_rel));
    } catch (const Error& e) {
      load_error = RecordError{"load", e.code(), e.what()};
    }

    if (grounding) {
      const GroundingSample& s = manifest.grounding[i];
      if (load_error) {
        PredictionRecord r = base_record(id, cfg.strategy, Task::kGrounding,
                                         std::string(to_string(s.category)));
        r.error = load_error;
        return std::vector<PredictionRecord>{std::move(r)};
      }
      return std::vector<PredictionRecord>{cfg.strategy == Strategy::kEcp
                                               ? pipeline.run_ecp_grounding(s, *image)
                                               : pipeline.run_single_stage_grounding(s, *image)};
    }
    const McSample& s = manifest.mc[i];
    const int n_choices = static_cast<int>(s.choices.size());
    std::vector<Permutation> perms = cyclic_permutations(n_choices);
    if (!opts.cyclic_permutation) perms.resize(1);
    if (load_error) {
      std::vector<PredictionRecord> out;
      for (std::size_t k = 0; k < perms.size(); ++k) {
        PredictionRecord r = base_record(id, cfg.strategy, Task::kMultipleChoice,
                                         std::string(to_string(s.category)));
        r.permutation = static_cast<int>(k);
        r.choice_order = perms[k];
        r.error = load_error;
        out.push_back(std::move(r));
      }
      return out;
    }
    return pipeline.run_mc_sample(s, *image, perms);
  };

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i] = process(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        return;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (opts.progress) {
        std::lock_guard lock(mu);
        opts.progress(finished, n);
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(opts.parallelism), std::max<std::size_t>(n, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkResult result;
  for (auto& slot : slots) {
    for (PredictionRecord& r : slot) result.records.push_back(std::move(r));
  }
  score_records(result.records, manifest);
  std::stable_sort(result.records.begin(), result.records.end(), record_order);
  for (const PredictionRecord& r : result.records) {
    if (r.error && (result.failed_ids.empty() || result.failed_ids.back() != r.sample_id)) {
      result.failed_ids.push_back(r.sample_id);
    }
  }
  for (const auto& c : counters) result.backend_calls += c->calls();
  for (const auto& c : cached) result.cache_hits += c->hits();
  return result;
}

}  // namespace ecp
