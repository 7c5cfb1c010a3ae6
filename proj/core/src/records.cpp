#include "ecp/records.hpp"

#include <fstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ecp/error.hpp"

namespace ecp {
namespace {

using nlohmann::json;

json frame_to_json(const FrameId& f) {
  return {{"kind", to_string(f.kind)}, {"size", {f.dims.width, f.dims.height}}};
}

FrameId frame_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  FrameId f;
  if (kind == "full_res") {
    f.kind = FrameKind::kFullRes;
  } else if (kind == "submitted") {
    f.kind = FrameKind::kSubmitted;
  } else if (kind == "crop_local") {
    f.kind = FrameKind::kCropLocal;
  } else {
    throw Error(ErrorCode::kSchema, "unknown frame kind '" + kind + "'");
  }
  f.dims = {j.at("size").at(0).get<int>(), j.at("size").at(1).get<int>()};
  return f;
}

FramedPoint point_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), frame_from_json(j.at("frame"))};
}

FramedBox box_from_json(const json& j) {
  const json& c = j.at("box");
  return {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(),
          c.at(3).get<double>(), frame_from_json(j.at("frame"))};
}

ParsedOutput parsed_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "point") return point_from_json(j);
  if (type == "box") return box_from_json(j);
  if (type == "choice") return j.at("index").get<ChoiceIndex>();
  throw Error(ErrorCode::kSchema, "unknown output type '" + type + "'");
}

json stage_to_json(const StageTrace& s) {
  json j = {{"raw_text", s.raw_text},
            {"usage",
             {{"prompt_tokens", s.usage.prompt_tokens},
              {"completion_tokens", s.usage.completion_tokens}}}};
  j["parsed"] = s.parsed ? to_json(*s.parsed) : json(nullptr);
  if (!s.parse_error.empty()) j["parse_error"] = s.parse_error;
  return j;
}

StageTrace stage_from_json(const json& j) {
  StageTrace s;
  s.raw_text = j.at("raw_text").get<std::string>();
  if (j.contains("parsed") && !j["parsed"].is_null()) s.parsed = parsed_from_json(j["parsed"]);
  s.parse_error = j.value("parse_error", "");
  if (j.contains("usage")) {
    s.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    s.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return s;
}

}  // namespace

std::string_view to_string(Strategy s) { return s == Strategy::kEcp ? "ecp" : "single"; }

Strategy strategy_from_string(std::string_view name) {
  if (name == "ecp") return Strategy::kEcp;
  if (name == "single" || name == "single_stage") return Strategy::kSingleStage;
  throw Error(ErrorCode::kConfig,
              "unknown strategy '" + std::string(name) + "' (expected single or ecp)");
}

bool record_order(const PredictionRecord& a, const PredictionRecord& b) {
  return std::tie(a.sample_id, a.permutation) < std::tie(b.sample_id, b.permutation);
}

json to_json(const FramedPoint& p) {
  return {{"type", "point"}, {"x", p.x}, {"y", p.y}, {"frame", frame_to_json(p.frame)}};
}

json to_json(const FramedBox& b) {
  return {{"type", "box"}, {"box", {b.x1, b.y1, b.x2, b.y2}}, {"frame", frame_to_json(b.frame)}};
}

json to_json(const ParsedOutput& out) {
  return std::visit(
      [](const auto& v) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ChoiceIndex>) {
          return {{"type", "choice"}, {"index", v}, {"letter", std::string(1, choice_letter(v))}};
        } else {
          return to_json(v);
        }
      },
      out);
}

json to_json(const PredictionRecord& r) {
  json j = {{"schema_version", kRecordSchemaVersion},
            {"sample_id", r.sample_id},
            {"strategy", to_string(r.strategy)},
            {"task", to_string(r.task)},
            {"category", r.category},
            {"correct", r.correct}};
  if (r.task == Task::kMultipleChoice) {
    j["permutation"] = r.permutation;
    j["choice_order"] = r.choice_order;
  }
  if (r.stage1) {
    json s1 = {{"rep", to_json(r.stage1->rep)}, {"fallback", r.stage1->fallback}};
    s1["call"] = r.stage1->call ? stage_to_json(*r.stage1->call) : json(nullptr);
    if (r.stage1->fallback) s1["fallback_reason"] = r.stage1->fallback_reason;
    j["stage1"] = std::move(s1);
  }
  if (r.candidate) j["candidate"] = to_json(*r.candidate);
  j["stage2"] = r.stage2 ? stage_to_json(*r.stage2) : json(nullptr);
  if (r.final) {
    j["final"] = std::visit(
        [](const auto& v) -> json {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ChoiceIndex>) {
            return {{"type", "choice"}, {"index", v}};
          } else {
            return to_json(v);
          }
        },
        *r.final);
  } else {
    j["final"] = nullptr;
  }
  if (r.error) {
    j["error"] = {{"stage", r.error->stage},
                  {"code", to_string(r.error->code)},
                  {"message", r.error->message}};
  }
  return j;
}

json timings_to_json(const PredictionRecord& r) {
  return {{"sample_id", r.sample_id},
          {"permutation", r.permutation},
          {"stage1_ms", r.timings.stage1_ms},
          {"stage2_ms", r.timings.stage2_ms},
          {"total_ms", r.timings.total_ms},
          {"stage1_from_cache", r.timings.stage1_from_cache},
          {"stage2_from_cache", r.timings.stage2_from_cache}};
}

PredictionRecord record_from_json(const json& j) {
  try {
    if (j.value("schema_version", "") != kRecordSchemaVersion) {
      throw Error(ErrorCode::kSchema, "unsupported record schema_version");
    }
    PredictionRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    r.task = task_from_string(j.at("task").get<std::string>());
    r.category = j.value("category", "");
    r.correct = j.value("correct", false);
    r.permutation = j.value("permutation", 0);
    if (j.contains("choice_order")) r.choice_order = j["choice_order"].get<std::vector<int>>();
    if (j.contains("stage1")) {
      const json& s1 = j["stage1"];
      Stage1Trace t;
      if (s1.contains("call") && !s1["call"].is_null()) t.call = stage_from_json(s1["call"]);
      t.rep = point_from_json(s1.at("rep"));
      t.fallback = s1.value("fallback", false);
      t.fallback_reason = s1.value("fallback_reason", "");
      r.stage1 = std::move(t);
    }
    if (j.contains("candidate")) r.candidate = box_from_json(j["candidate"]);
    if (j.contains("stage2") && !j["stage2"].is_null()) r.stage2 = stage_from_json(j["stage2"]);
    if (j.contains("final") && !j["final"].is_null()) {
      const ParsedOutput out = parsed_from_json(j["final"]);
      std::visit([&r](const auto& v) { r.final = v; }, out);
    }
    if (j.contains("error")) {
      const json& e = j["error"];
      const std::string code = e.at("code").get<std::string>();
      const auto parsed = error_code_from_string(code);
      if (!parsed) throw Error(ErrorCode::kSchema, "unknown error code '" + code + "'");
      r.error = RecordError{e.at("stage").get<std::string>(), *parsed,
                            e.value("message", "")};
    }
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("malformed record: ") + e.what());
  }
}

std::string serialize_record(const PredictionRecord& r) { return to_json(r).dump(); }

PredictionRecord parse_record(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kSchema, "record is not a JSON object");
  }
  return record_from_json(j);
}

void write_records(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const PredictionRecord& r : records) out << serialize_record(r) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void write_timings(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const PredictionRecord& r : records) out << timings_to_json(r).dump() << '\n';
}

std::vector<PredictionRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "records file not found: " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ecp
