#include "ecp_cli/config.hpp"

#include <fstream>
#include <set>

#include "ecp/error.hpp"

namespace ecp::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfig, "invalid config field '" + field + "': " + why);
}

void reject_unknown(const json& j, const std::string& prefix, const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) bad(prefix + key, "unknown key");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& field, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    bad(field, "wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

ImageFormat image_format_from(const std::string& s) {
  if (s == "png") return ImageFormat::kPng;
  if (s == "jpeg" || s == "jpg") return ImageFormat::kJpeg;
  bad("image_format", "expected png or jpeg, got '" + s + "'");
}

}  // namespace

BackendConfig backend_config_from_json(const json& j, const std::filesystem::path& base,
                                       const std::string& field) {
  if (!j.is_object()) bad(field, "must be an object");
  reject_unknown(j, field + ".",
                 {"kind", "endpoint", "api_key_env", "model_id", "convention", "retry", "seed",
                  "fixtures", "max_in_flight", "timeout_s", "max_tokens", "temperature",
                  "min_feature_px"});
  BackendConfig c;
  try {
    c.kind = backend_kind_from_string(get<std::string>(j, "kind", field + ".kind", "scripted"));
    c.convention = coord_convention_from_string(
        get<std::string>(j, "convention", field + ".convention", "pixel"));
  } catch (const Error& e) {
    bad(field, e.what());
  }
  c.endpoint = get<std::string>(j, "endpoint", field + ".endpoint", "");
  c.api_key_env = get<std::string>(j, "api_key_env", field + ".api_key_env", "");
  c.model_id = get<std::string>(j, "model_id", field + ".model_id", c.model_id);
  c.seed = get<std::uint64_t>(j, "seed", field + ".seed", 0);
  c.fixtures = resolve(base, get<std::string>(j, "fixtures", field + ".fixtures", ""));
  c.max_in_flight = get<int>(j, "max_in_flight", field + ".max_in_flight", c.max_in_flight);
  c.timeout_s = get<double>(j, "timeout_s", field + ".timeout_s", c.timeout_s);
  c.max_tokens = get<int>(j, "max_tokens", field + ".max_tokens", c.max_tokens);
  c.temperature = get<double>(j, "temperature", field + ".temperature", c.temperature);
  c.min_feature_px = get<int>(j, "min_feature_px", field + ".min_feature_px", c.min_feature_px);
  if (j.contains("retry")) {
    const json& r = j["retry"];
    if (!r.is_object()) bad(field + ".retry", "must be an object");
    reject_unknown(r, field + ".retry.", {"max_attempts", "initial_backoff_ms", "backoff_factor"});
    c.retry.max_attempts =
        get<int>(r, "max_attempts", field + ".retry.max_attempts", c.retry.max_attempts);
    c.retry.initial_backoff_ms = get<int>(r, "initial_backoff_ms",
                                          field + ".retry.initial_backoff_ms",
                                          c.retry.initial_backoff_ms);
    c.retry.backoff_factor =
        get<double>(r, "backoff_factor", field + ".retry.backoff_factor", c.retry.backoff_factor);
  }
  return c;
}

json to_json(const BackendConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"endpoint", c.endpoint},
          {"api_key_env", c.api_key_env},
          {"model_id", c.model_id},
          {"convention", to_string(c.convention)},
          {"retry",
           {{"max_attempts", c.retry.max_attempts},
            {"initial_backoff_ms", c.retry.initial_backoff_ms},
            {"backoff_factor", c.retry.backoff_factor}}},
          {"seed", c.seed},
          {"fixtures", c.fixtures.string()},
          {"max_in_flight", c.max_in_flight},
          {"timeout_s", c.timeout_s},
          {"max_tokens", c.max_tokens},
          {"temperature", c.temperature},
          {"min_feature_px", c.min_feature_px}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) bad("<root>", "config must be a JSON object");
  reject_unknown(j, "",
                 {"manifest", "task", "strategy", "output_dir", "cache_dir", "parallelism", "seed",
                  "cyclic_permutation", "crop", "submit_max_side", "crop_max_side",
                  "include_global_in_stage2", "ec_sees_choices", "image_format", "ec_backend",
                  "p_backend", "prompts", "record_fixtures", "label"});
  RunConfig c;
  c.manifest = resolve(base, get<std::string>(j, "manifest", "manifest", ""));
  if (j.contains("task") && !j["task"].is_null()) {
    try {
      c.task = task_from_string(get<std::string>(j, "task", "task", ""));
    } catch (const Error& e) {
      bad("task", e.what());
    }
  }
  try {
    c.pipeline.strategy = strategy_from_string(get<std::string>(j, "strategy", "strategy", "ecp"));
  } catch (const Error& e) {
    bad("strategy", e.what());
  }
  c.output_dir = resolve(base, get<std::string>(j, "output_dir", "output_dir", ""));
  c.cache_dir = resolve(base, get<std::string>(j, "cache_dir", "cache_dir", ""));
  c.record_fixtures = resolve(base, get<std::string>(j, "record_fixtures", "record_fixtures", ""));
  c.label = get<std::string>(j, "label", "label", "");
  c.parallelism = get<int>(j, "parallelism", "parallelism", 1);
  if (c.parallelism < 1) bad("parallelism", "must be a positive integer");
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = get<std::uint64_t>(j, "seed", "seed", 0);
  c.cyclic_permutation = get<bool>(j, "cyclic_permutation", "cyclic_permutation", true);

  if (j.contains("crop")) {
    const json& crop = j["crop"];
    if (!crop.is_array() || crop.size() != 2 || !crop[0].is_number_integer() ||
        !crop[1].is_number_integer()) {
      bad("crop", "expected [width, height]");
    }
    c.pipeline.crop = {crop[0].get<int>(), crop[1].get<int>()};
    if (c.pipeline.crop.w < 1 || c.pipeline.crop.h < 1) bad("crop", "sides must be positive");
  }
  c.pipeline.submit_max_side = get<int>(j, "submit_max_side", "submit_max_side", 1280);
  if (c.pipeline.submit_max_side < 1) bad("submit_max_side", "must be positive");
  c.pipeline.crop_max_side = get<int>(j, "crop_max_side", "crop_max_side", 0);
  if (c.pipeline.crop_max_side < 0) bad("crop_max_side", "must be zero or positive");
  if (j.contains("include_global_in_stage2") && !j["include_global_in_stage2"].is_null()) {
    c.pipeline.include_global_in_stage2 =
        get<bool>(j, "include_global_in_stage2", "include_global_in_stage2", false);
  }
  c.pipeline.ec_sees_choices = get<bool>(j, "ec_sees_choices", "ec_sees_choices", true);
  c.pipeline.image_format =
      image_format_from(get<std::string>(j, "image_format", "image_format", "png"));

  for (const char* key : {"ec_backend", "p_backend"}) {
    if (!j.contains(key)) continue;
    BackendConfig b = backend_config_from_json(j[key], base, key);
    if (!j[key].contains("seed") && c.seed) b.seed = *c.seed;
    (std::string(key) == "ec_backend" ? c.pipeline.ec_backend : c.pipeline.p_backend) = b;
  }
  if (j.contains("prompts")) {
    const json& p = j["prompts"];
    if (!p.is_object()) bad("prompts", "must be an object");
    reject_unknown(p, "prompts.", {"ec_grounding", "p_grounding", "ec_perception", "p_perception"});
    PromptTemplates& t = c.pipeline.templates;
    t.ec_grounding = get<std::string>(p, "ec_grounding", "prompts.ec_grounding", t.ec_grounding);
    t.p_grounding = get<std::string>(p, "p_grounding", "prompts.p_grounding", t.p_grounding);
    t.ec_perception = get<std::string>(p, "ec_perception", "prompts.ec_perception", t.ec_perception);
    t.p_perception = get<std::string>(p, "p_perception", "prompts.p_perception", t.p_perception);
  }
  if (c.task) c.pipeline.task = *c.task;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config file " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfig, "config file " + path.string() + " is not valid JSON");
  return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  const PipelineConfig& p = c.pipeline;
  json j = {{"manifest", c.manifest.string()},
            {"task", to_string(p.task)},
            {"strategy", to_string(p.strategy)},
            {"output_dir", c.output_dir.string()},
            {"cache_dir", c.cache_dir.string()},
            {"parallelism", c.parallelism},
            {"cyclic_permutation", c.cyclic_permutation},
            {"crop", {p.crop.w, p.crop.h}},
            {"submit_max_side", p.submit_max_side},
            {"crop_max_side", p.crop_max_side},
            {"include_global_in_stage2", p.include_global()},
            {"ec_sees_choices", p.ec_sees_choices},
            {"image_format", p.image_format == ImageFormat::kPng ? "png" : "jpeg"},
            {"ec_backend", to_json(p.ec_backend)},
            {"p_backend", to_json(p.p_backend)},
            {"prompts",
             {{"ec_grounding", p.templates.ec_grounding},
              {"p_grounding", p.templates.p_grounding},
              {"ec_perception", p.templates.ec_perception},
              {"p_perception", p.templates.p_perception}}},
            {"record_fixtures", c.record_fixtures.string()},
            {"label", c.label}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  return j;
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.pipeline.ec_backend.seed = seed;
  cfg.pipeline.p_backend.seed = seed;
}

}  // namespace ecp::cli
