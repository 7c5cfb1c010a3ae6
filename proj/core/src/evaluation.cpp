#include "ecp/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ecp/error.hpp"

namespace ecp {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 10> kCategoryOrder = {
    "Dev", "Cre", "CAD", "Sci", "Office", "OS", "FSP", "FCP", "Other", ""};

std::size_t category_rank(const std::string& c) {
  const auto it = std::find(kCategoryOrder.begin(), kCategoryOrder.end(), c);
  return static_cast<std::size_t>(it - kCategoryOrder.begin());
}

bool category_less(const std::string& a, const std::string& b) {
  const std::size_t ra = category_rank(a);
  const std::size_t rb = category_rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct Tally {
  std::size_t n = 0;
  std::size_t correct = 0;
};

EvalReport build_report(const std::map<std::string, Tally>& tallies) {
  EvalReport rep;
  std::vector<std::string> names;
  for (const auto& [name, t] : tallies) {
    if (t.n > 0) names.push_back(name);
  }
  std::sort(names.begin(), names.end(), category_less);
  double macro_sum = 0.0;
  for (const std::string& name : names) {
    const Tally& t = tallies.at(name);
    rep.categories.push_back({name, t.n, t.correct, ratio(t.correct, t.n)});
    rep.overall.n_samples += t.n;
    rep.overall.n_correct += t.correct;
    macro_sum += rep.categories.back().accuracy;
  }
  rep.overall.category = "Overall";
  rep.overall.accuracy = ratio(rep.overall.n_correct, rep.overall.n_samples);
  rep.macro_accuracy = names.empty() ? 0.0 : macro_sum / static_cast<double>(names.size());
  return rep;
}

void count_flags(EvalReport& rep, const std::vector<PredictionRecord>& records) {
  for (const PredictionRecord& r : records) {
    if (r.error) ++rep.n_errors;
    if (r.stage1 && r.stage1->fallback) ++rep.n_fallbacks;
  }
  if (!records.empty()) {
    rep.task = std::string(to_string(records.front().task));
    rep.strategy = std::string(to_string(records.front().strategy));
  }
}

json category_json(const CategoryScore& c) {
  return {{"category", c.category},
          {"n_samples", c.n_samples},
          {"n_correct", c.n_correct},
          {"accuracy", c.accuracy},
          {"percent", format_percent(c.accuracy)}};
}

std::vector<std::string> column_union(const std::vector<EvalReport>& reports) {
  std::vector<std::string> cols;
  for (const EvalReport& r : reports) {
    for (const CategoryScore& c : r.categories) {
      if (std::find(cols.begin(), cols.end(), c.category) == cols.end()) cols.push_back(c.category);
    }
  }
  std::sort(cols.begin(), cols.end(), category_less);
  return cols;
}

std::vector<std::vector<std::string>> table_rows(const std::vector<EvalReport>& reports) {
  const std::vector<std::string> cols = column_union(reports);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Run"};
  header.insert(header.end(), cols.begin(), cols.end());
  header.push_back("Overall");
  rows.push_back(std::move(header));
  for (const EvalReport& r : reports) {
    std::vector<std::string> row{r.label};
    for (const std::string& col : cols) {
      auto it = std::find_if(r.categories.begin(), r.categories.end(),
                             [&](const CategoryScore& c) { return c.category == col; });
      row.push_back(it == r.categories.end() ? "-" : format_percent(it->accuracy));
    }
    row.push_back(format_percent(r.overall.accuracy));
    rows.push_back(std::move(row));
    if (r.deltas) {
      std::vector<std::string> drow{"delta vs " + r.deltas->baseline_label};
      for (const std::string& col : cols) {
        auto it = r.deltas->per_category.find(col);
        drow.push_back(it == r.deltas->per_category.end() ? "-" : format_delta(it->second));
      }
      drow.push_back(format_delta(r.deltas->overall));
      rows.push_back(std::move(drow));
    }
  }
  return rows;
}

}  // namespace

std::vector<Permutation> cyclic_permutations(int n) {
  if (n < 2 || n > 26) {
    throw Error(ErrorCode::kInvalidArgument,
                "cyclic permutations need 2..26 choices, got " + std::to_string(n));
  }
  std::vector<Permutation> out(static_cast<std::size_t>(n), Permutation(static_cast<std::size_t>(n)));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) out[k][i] = (i + k) % n;
  }
  return out;
}

Permutation inverse_permutation(const Permutation& perm) {
  Permutation inv(perm.size(), -1);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const int pos = perm[i];
    if (pos < 0 || pos >= static_cast<int>(perm.size()) || inv[pos] != -1) {
      throw Error(ErrorCode::kInvalidArgument, "not a permutation");
    }
    inv[pos] = static_cast<int>(i);
  }
  return inv;
}

bool score_grounding(const PredictionRecord& record, const FramedBox& gt) {
  if (record.error || !record.final) return false;
  if (const auto* p = std::get_if<FramedPoint>(&*record.final)) return point_in_box(*p, gt);
  if (const auto* b = std::get_if<FramedBox>(&*record.final)) return point_in_box(b->center(), gt);
  throw Error(ErrorCode::kInvalidArgument,
              "grounding record " + record.sample_id + " holds a choice answer");
}

bool score_mc_trial(const PredictionRecord& record, int answer_index) {
  if (record.error || !record.final) return false;
  const auto* c = std::get_if<ChoiceIndex>(&*record.final);
  if (c == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "multiple-choice record " + record.sample_id + " holds a spatial answer");
  }
  return *c == answer_index;
}

McSampleScore score_mc(const std::vector<PredictionRecord>& records, int n_choices,
                       int answer_index) {
  if (n_choices < 2 || n_choices > 26) {
    throw Error(ErrorCode::kInvalidArgument, "n_choices out of range");
  }
  McSampleScore s;
  s.per_permutation.assign(static_cast<std::size_t>(n_choices), false);
  std::vector<bool> seen(static_cast<std::size_t>(n_choices), false);
  for (const PredictionRecord& r : records) {
    if (r.permutation < 0 || r.permutation >= n_choices) {
      throw Error(ErrorCode::kInvalidArgument,
                  "permutation index " + std::to_string(r.permutation) + " out of range");
    }
    seen[r.permutation] = true;
    s.per_permutation[r.permutation] = score_mc_trial(r, answer_index);
  }
  std::size_t correct = 0;
  for (int k = 0; k < n_choices; ++k) {
    if (!seen[k]) s.missing.push_back(k);
    if (s.per_permutation[k]) ++correct;
  }
  s.accuracy = ratio(correct, static_cast<std::size_t>(n_choices));
  return s;
}

void score_records(std::vector<PredictionRecord>& records, const Manifest& manifest) {
  std::unordered_map<std::string, std::size_t> index;
  const std::size_t n = manifest.size();
  for (std::size_t i = 0; i < n; ++i) {
    index.emplace(manifest.task == Task::kGrounding ? manifest.grounding[i].id : manifest.mc[i].id,
                  i);
  }
  std::set<std::string> orphans;
  for (PredictionRecord& r : records) {
    auto it = index.find(r.sample_id);
    if (it == index.end() || r.task != manifest.task) {
      orphans.insert(r.sample_id);
      continue;
    }
    if (manifest.task == Task::kGrounding) {
      const GroundingSample& s = manifest.grounding[it->second];
      r.correct = score_grounding(r, s.gt_box);
      if (r.category.empty()) r.category = std::string(to_string(s.category));
    } else {
      const McSample& s = manifest.mc[it->second];
      r.correct = score_mc_trial(r, s.answer_index);
      if (r.category.empty()) r.category = std::string(to_string(s.category));
    }
  }
  if (!orphans.empty()) {
    std::string ids;
    for (const std::string& id : orphans) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kOrphanRecord, "records without a matching sample: " + ids);
  }
}

EvalReport aggregate(std::vector<PredictionRecord> records, const Manifest& manifest,
                     const AggregateOptions& opts) {
  score_records(records, manifest);
  std::sort(records.begin(), records.end(), record_order);

  std::map<std::string, Tally> tallies;
  std::set<std::pair<std::string, int>> present;
  for (const PredictionRecord& r : records) {
    Tally& t = tallies[r.category];
    ++t.n;
    if (r.correct) ++t.correct;
    present.emplace(r.sample_id, r.permutation);
  }

  std::size_t missing = 0;
  auto expect = [&](const std::string& id, const std::string& category, int trials) {
    for (int k = 0; k < trials; ++k) {
      if (present.count({id, k}) == 0) {
        ++tallies[category].n;
        ++missing;
      }
    }
  };
  if (manifest.task == Task::kGrounding) {
    for (const GroundingSample& s : manifest.grounding) {
      expect(s.id, std::string(to_string(s.category)), 1);
    }
  } else {
    for (const McSample& s : manifest.mc) {
      expect(s.id, std::string(to_string(s.category)),
             opts.cyclic_permutation ? static_cast<int>(s.choices.size()) : 1);
    }
  }

  EvalReport rep = build_report(tallies);
  count_flags(rep, records);
  rep.task = std::string(to_string(manifest.task));
  rep.n_missing = missing;
  return rep;
}

EvalReport aggregate_scored(const std::vector<PredictionRecord>& records) {
  std::map<std::string, Tally> tallies;
  for (const PredictionRecord& r : records) {
    Tally& t = tallies[r.category.empty() ? "Other" : r.category];
    ++t.n;
    if (r.correct) ++t.correct;
  }
  EvalReport rep = build_report(tallies);
  count_flags(rep, records);
  return rep;
}

EvalReport compare(EvalReport report, const EvalReport& baseline) {
  Deltas d;
  d.baseline_label = baseline.label;
  for (const CategoryScore& c : report.categories) {
    for (const CategoryScore& b : baseline.categories) {
      if (b.category == c.category) d.per_category[c.category] = (c.accuracy - b.accuracy) * 100.0;
    }
  }
  d.overall = (report.overall.accuracy - baseline.overall.accuracy) * 100.0;
  d.macro = (report.macro_accuracy - baseline.macro_accuracy) * 100.0;
  report.deltas = std::move(d);
  return report;
}

std::string format_percent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", accuracy * 100.0);
  return buf;
}

std::string format_delta(double points) {
  double rounded = std::round(points * 10.0) / 10.0;
  if (rounded == 0.0) rounded = 0.0;  // no "-0.0"
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", rounded);
  return buf;
}

json to_json(const EvalReport& report) {
  json j = {{"label", report.label},
            {"task", report.task},
            {"strategy", report.strategy},
            {"overall", category_json(report.overall)},
            {"macro_accuracy", report.macro_accuracy},
            {"macro_percent", format_percent(report.macro_accuracy)},
            {"n_errors", report.n_errors},
            {"n_fallbacks", report.n_fallbacks},
            {"n_missing", report.n_missing}};
  j["categories"] = json::array();
  for (const CategoryScore& c : report.categories) j["categories"].push_back(category_json(c));
  if (report.deltas) {
    json per = json::object();
    for (const auto& [k, v] : report.deltas->per_category) per[k] = format_delta(v);
    j["deltas"] = {{"baseline", report.deltas->baseline_label},
                   {"overall", format_delta(report.deltas->overall)},
                   {"macro", format_delta(report.deltas->macro)},
                   {"per_category", std::move(per)}};
  }
  return j;
}

std::string render_markdown(const std::vector<EvalReport>& reports) {
  const auto rows = table_rows(reports);
  std::vector<std::size_t> width(rows.front().size(), 3);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out = "|";
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      // Labels left-aligned, numbers right-aligned.
      out += " " + (c == 0 ? row[c] + pad : pad + row[c]) + " |";
    }
    return out + "\n";
  };
  std::string out = line(rows.front());
  out += "|";
  for (std::size_t c = 0; c < width.size(); ++c) {
    out += c == 0 ? " " + std::string(width[c], '-') + " |"
                  : " " + std::string(width[c] - 1, '-') + ": |";
  }
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) out += line(rows[r]);
  return out;
}

std::string render_csv(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const auto& row : table_rows(reports)) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      const bool quote = row[c].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        out += row[c];
        continue;
      }
      out += '"';
      for (char ch : row[c]) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    }
    out += '\n';
  }
  return out;
}

}  // namespace ecp
