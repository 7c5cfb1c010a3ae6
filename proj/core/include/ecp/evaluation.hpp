#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecp/datasets.hpp"
#include "ecp/records.hpp"

namespace ecp {

// perm[i] is the label position of original choice i.
using Permutation = std::vector<int>;

// The n cyclic shifts sigma_k(i) = (i + k) mod n, k = 0..n-1.
// Throws kInvalidArgument unless 2 <= n <= 26.
std::vector<Permutation> cyclic_permutations(int n);
Permutation inverse_permutation(const Permutation& perm);

// Point (or box centre) inside the closed ground-truth box. Records with an
// error or without a final output score false. Throws kFrameMismatch when
// the final output is not in gt's frame.
bool score_grounding(const PredictionRecord& record, const FramedBox& gt);

// True iff the record's original-index answer equals answer_index.
bool score_mc_trial(const PredictionRecord& record, int answer_index);

struct McSampleScore {
  std::vector<bool> per_permutation;  // index k = shift k
  std::vector<int> missing;           // shifts without a record, scored false
  double accuracy = 0.0;
};

// Records of one sample, any order; at most one per shift.
McSampleScore score_mc(const std::vector<PredictionRecord>& records, int n_choices,
                       int answer_index);

// Sets `correct` on every record from the manifest's ground truth.
// Throws kOrphanRecord listing ids absent from the manifest.
void score_records(std::vector<PredictionRecord>& records, const Manifest& manifest);

// For MC, n_samples counts (sample, permutation) trials.
struct CategoryScore {
  std::string category;
  std::size_t n_samples = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

struct Deltas {
  std::string baseline_label;
  std::map<std::string, double> per_category;  // absolute points, present in both reports
  double overall = 0.0;
  double macro = 0.0;
};

struct EvalReport {
  std::string label;
  std::string task;
  std::string strategy;
  std::vector<CategoryScore> categories;  // fixed display order, empty ones omitted
  CategoryScore overall;                  // micro-average over trials
  double macro_accuracy = 0.0;            // unweighted mean of category accuracies
  std::size_t n_errors = 0;
  std::size_t n_fallbacks = 0;
  std::size_t n_missing = 0;  // expected trials without a record, scored false
  std::optional<Deltas> deltas;
};

struct AggregateOptions {
  // MC: every sample is expected to have one trial per cyclic shift.
  bool cyclic_permutation = true;
};

// Scores records against the manifest and aggregates them. Throws
// kOrphanRecord for records whose id is not in the manifest.
EvalReport aggregate(std::vector<PredictionRecord> records, const Manifest& manifest,
                     const AggregateOptions& opts = {});

// Aggregates already-scored records using their stored category and
// correctness; used when rendering reports from run directories.
EvalReport aggregate_scored(const std::vector<PredictionRecord>& records);

// Absolute percentage-point differences report - baseline.
EvalReport compare(EvalReport report, const EvalReport& baseline);

// One decimal, e.g. 0.404 -> "40.4".
std::string format_percent(double accuracy);
// Signed, one decimal, e.g. 21.3 -> "+21.3".
std::string format_delta(double points);

nlohmann::json to_json(const EvalReport& report);

// Rows = reports, columns = categories (union, display order) + Overall.
// A "delta" row follows each report that carries deltas.
std::string render_markdown(const std::vector<EvalReport>& reports);
std::string render_csv(const std::vector<EvalReport>& reports);

}  // namespace ecp
