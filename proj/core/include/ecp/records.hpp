#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecp/backend.hpp"
#include "ecp/datasets.hpp"
#include "ecp/geometry.hpp"

namespace ecp {

enum class Strategy { kSingleStage, kEcp };

std::string_view to_string(Strategy s);
// Accepts "single", "single_stage" and "ecp". Throws ErrorCode::kConfig.
Strategy strategy_from_string(std::string_view name);

inline constexpr std::string_view kRecordSchemaVersion = "1";

// One model call as seen by the pipeline. `parsed` is expressed in the frame
// of the last image of the request (spatial) or in displayed-label space
// (choice).
struct StageTrace {
  std::string raw_text;
  std::optional<ParsedOutput> parsed;
  std::string parse_error;
  Usage usage;

  friend bool operator==(const StageTrace&, const StageTrace&) = default;
};

struct Stage1Trace {
  std::optional<StageTrace> call;  // absent when the call itself failed
  FramedPoint rep;                 // representative coordinate, full-res frame
  bool fallback = false;           // rep is the image centre
  std::string fallback_reason;

  friend bool operator==(const Stage1Trace&, const Stage1Trace&) = default;
};

// Full-res point or box for grounding; original choice index for MC.
using FinalOutput = std::variant<FramedPoint, FramedBox, ChoiceIndex>;

struct RecordError {
  std::string stage;  // "load", "stage1", "stage2"
  ErrorCode code = ErrorCode::kInvalidArgument;
  std::string message;

  friend bool operator==(const RecordError&, const RecordError&) = default;
};

// Wall-clock figures and cache provenance. Kept out of records.jsonl so that
// record files are byte-identical across parallelism levels and cache state.
struct StageTimings {
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  double total_ms = 0.0;
  bool stage1_from_cache = false;
  bool stage2_from_cache = false;
};

struct PredictionRecord {
  std::string sample_id;
  Strategy strategy = Strategy::kSingleStage;
  Task task = Task::kGrounding;
  std::string category;
  // MC only: index k of the cyclic shift and the label position of every
  // original choice under it.
  int permutation = 0;
  std::vector<int> choice_order;
  std::optional<Stage1Trace> stage1;
  std::optional<FramedBox> candidate;
  std::optional<StageTrace> stage2;
  std::optional<FinalOutput> final;
  bool correct = false;
  std::optional<RecordError> error;
  StageTimings timings;

  friend bool operator==(const PredictionRecord& a, const PredictionRecord& b) {
    return a.sample_id == b.sample_id && a.strategy == b.strategy && a.task == b.task &&
           a.category == b.category && a.permutation == b.permutation &&
           a.choice_order == b.choice_order && a.stage1 == b.stage1 &&
           a.candidate == b.candidate && a.stage2 == b.stage2 && a.final == b.final &&
           a.correct == b.correct && a.error == b.error;
  }
};

// Orders by (sample id, permutation index).
bool record_order(const PredictionRecord& a, const PredictionRecord& b);

nlohmann::json to_json(const FramedPoint& p);
nlohmann::json to_json(const FramedBox& b);
nlohmann::json to_json(const ParsedOutput& out);
nlohmann::json to_json(const PredictionRecord& r);
nlohmann::json timings_to_json(const PredictionRecord& r);

// Throws ErrorCode::kSchema.
PredictionRecord record_from_json(const nlohmann::json& j);

std::string serialize_record(const PredictionRecord& r);
PredictionRecord parse_record(std::string_view line);

void write_records(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
void write_timings(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
// Throws kNotFound for a missing file and kSchema naming the line otherwise.
std::vector<PredictionRecord> read_records(const std::filesystem::path& path);

}  // namespace ecp
