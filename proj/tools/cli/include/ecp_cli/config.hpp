#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ecp/pipeline.hpp"

namespace ecp::cli {

// Everything `ecp run` needs. Relative paths in a config file are resolved
// against the file's directory; flag values against the working directory.
struct RunConfig {
  std::filesystem::path manifest;
  std::optional<Task> task;  // unset: taken from the manifest header
  PipelineConfig pipeline;
  int parallelism = 1;
  std::filesystem::path cache_dir;  // empty: no response cache
  std::filesystem::path output_dir;
  std::optional<std::uint64_t> seed;  // default seed for random backends
  bool cyclic_permutation = true;
  std::filesystem::path record_fixtures;  // empty: do not record
  std::string label;                      // report row name; defaults to the output dir name
};

BackendConfig backend_config_from_json(const nlohmann::json& j, const std::filesystem::path& base,
                                       const std::string& field);
nlohmann::json to_json(const BackendConfig& cfg);

// Throws ErrorCode::kConfig naming the offending field. Unknown keys are
// rejected so that typos never silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

// Sets cfg.seed and the seed of both backends (the --seed flag).
void apply_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace ecp::cli
