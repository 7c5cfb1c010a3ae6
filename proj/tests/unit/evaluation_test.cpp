#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "ecp/error.hpp"
#include "ecp/evaluation.hpp"

namespace ecp {
namespace {

const FrameId kFrame = full_res_frame({100, 100});

PredictionRecord grounding(const std::string& id, FinalOutput final) {
  PredictionRecord r;
  r.sample_id = id;
  r.task = Task::kGrounding;
  r.final = final;
  return r;
}

PredictionRecord mc_trial(const std::string& id, int perm_index, int original_answer) {
  PredictionRecord r;
  r.sample_id = id;
  r.task = Task::kMultipleChoice;
  r.permutation = perm_index;
  r.final = ChoiceIndex{original_answer};
  return r;
}

// Original index whose label under `perm` is `label`, by search.
int original_at_label(const Permutation& perm, int label) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] == label) return static_cast<int>(i);
  }
  return -1;
}

Manifest grounding_manifest(const std::vector<std::pair<std::string, GroundingCategory>>& ids) {
  Manifest m;
  m.task = Task::kGrounding;
  for (const auto& [id, cat] : ids) {
    GroundingSample s;
    s.id = id;
    s.image_dims = kFrame.dims;
    s.gt_box = {0, 0, 10, 10, kFrame};
    s.category = cat;
    m.grounding.push_back(s);
  }
  return m;
}

Manifest mc_manifest(int n_samples, int n_choices, int answer) {
  Manifest m;
  m.task = Task::kMultipleChoice;
  for (int i = 0; i < n_samples; ++i) {
    McSample s;
    s.id = "q" + std::to_string(i);
    s.choices.resize(static_cast<std::size_t>(n_choices), "x");
    s.answer_index = answer;
    m.mc.push_back(s);
  }
  return m;
}

TEST(ScoreGrounding, Examples) {
  const FramedBox gt{0, 0, 10, 10, kFrame};
  EXPECT_TRUE(score_grounding(grounding("a", FramedPoint{5, 5, kFrame}), gt));
  EXPECT_TRUE(score_grounding(grounding("a", FramedBox{0, 0, 4, 4, kFrame}), gt));
  EXPECT_FALSE(score_grounding(grounding("a", FramedBox{20, 20, 40, 40, kFrame}), gt));
  PredictionRecord err = grounding("a", FramedPoint{5, 5, kFrame});
  err.error = RecordError{"stage2", ErrorCode::kNoParse, ""};
  EXPECT_FALSE(score_grounding(err, gt));
  PredictionRecord none;
  EXPECT_FALSE(score_grounding(none, gt));
  EXPECT_THROW(score_grounding(grounding("a", FramedPoint{5, 5, submitted_frame({100, 100})}), gt),
               Error);
}

TEST(ScoreGrounding, AgreesWithFourInequalityOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const FramedBox gt{x1, y1, x2, y2, kFrame};
    const bool as_box = rng() % 2 == 0;
    double px, py;
    FinalOutput final;
    if (as_box) {
      double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
      if (a > b) std::swap(a, b);
      if (c > d) std::swap(c, d);
      final = FramedBox{a, c, b, d, kFrame};
      px = (a + b) / 2;
      py = (c + d) / 2;
    } else {
      px = u(rng);
      py = u(rng);
      final = FramedPoint{px, py, kFrame};
    }
    const bool oracle = x1 <= px && px <= x2 && y1 <= py && py <= y2;
    ASSERT_EQ(score_grounding(grounding("s", final), gt), oracle);
  }
}

TEST(CyclicPermutations, Definition) {
  const auto p4 = cyclic_permutations(4);
  ASSERT_EQ(p4.size(), 4u);
  EXPECT_EQ(p4[0], (Permutation{0, 1, 2, 3}));
  EXPECT_EQ(p4[1], (Permutation{1, 2, 3, 0}));
  EXPECT_EQ(p4[3], (Permutation{3, 0, 1, 2}));
  const auto p2 = cyclic_permutations(2);
  EXPECT_EQ(p2, (std::vector<Permutation>{{0, 1}, {1, 0}}));
  EXPECT_THROW(cyclic_permutations(1), Error);
  EXPECT_THROW(cyclic_permutations(27), Error);
}

TEST(CyclicPermutations, LatinSquare) {
  for (int n = 2; n <= 26; ++n) {
    const auto perms = cyclic_permutations(n);
    for (int choice = 0; choice < n; ++choice) {
      std::vector<int> positions;
      for (const auto& p : perms) positions.push_back(p[choice]);
      std::sort(positions.begin(), positions.end());
      for (int k = 0; k < n; ++k) ASSERT_EQ(positions[k], k);
    }
  }
}

TEST(CyclicPermutations, Inverse) {
  const Permutation p{1, 2, 3, 0};
  EXPECT_EQ(inverse_permutation(p), (Permutation{3, 0, 1, 2}));
  // Shift 1 puts original choice 3 at label A.
  EXPECT_EQ(inverse_permutation(p)[0], 3);
  EXPECT_THROW(inverse_permutation({0, 0}), Error);
}

TEST(ScoreMc, Examples) {
  std::vector<PredictionRecord> perfect;
  for (int k = 0; k < 4; ++k) perfect.push_back(mc_trial("s", k, 2));
  EXPECT_DOUBLE_EQ(score_mc(perfect, 4, 2).accuracy, 1.0);

  // Always label A, enumerated by hand: shift k puts original (4 - k) % 4 at A,
  // which is the answer 2 only for k = 2.
  std::vector<PredictionRecord> always_a;
  for (int k = 0; k < 4; ++k) always_a.push_back(mc_trial("s", k, (4 - k) % 4));
  const McSampleScore s = score_mc(always_a, 4, 2);
  EXPECT_DOUBLE_EQ(s.accuracy, 0.25);
  EXPECT_EQ(s.per_permutation, (std::vector<bool>{false, false, true, false}));

  std::vector<PredictionRecord> three = perfect;
  three[1].final = ChoiceIndex{0};
  EXPECT_DOUBLE_EQ(score_mc(three, 4, 2).accuracy, 0.75);
}

TEST(ScoreMc, MissingPermutationsCountAsWrong) {
  std::vector<PredictionRecord> recs{mc_trial("s", 0, 1), mc_trial("s", 2, 1)};
  const McSampleScore s = score_mc(recs, 4, 1);
  EXPECT_EQ(s.missing, (std::vector<int>{1, 3}));
  EXPECT_DOUBLE_EQ(s.accuracy, 0.5);
}

TEST(ScoreMc, AlwaysAAdversaryScoresOneOverN) {
  for (int n = 2; n <= 8; ++n) {
    const auto perms = cyclic_permutations(n);
    for (int answer = 0; answer < n; ++answer) {
      std::vector<PredictionRecord> recs;
      for (int k = 0; k < n; ++k) recs.push_back(mc_trial("q0", k, original_at_label(perms[k], 0)));
      ASSERT_DOUBLE_EQ(score_mc(recs, n, answer).accuracy, 1.0 / n) << n;

      const EvalReport rep = aggregate(recs, mc_manifest(1, n, answer));
      ASSERT_EQ(rep.overall.n_samples, static_cast<std::size_t>(n));
      ASSERT_EQ(rep.overall.n_correct, 1u);
    }
  }
}

TEST(Aggregate, MicroAverageAndMacro) {
  const Manifest m = grounding_manifest({{"a1", GroundingCategory::kDev},
                                         {"a2", GroundingCategory::kDev},
                                         {"b1", GroundingCategory::kOs},
                                         {"b2", GroundingCategory::kOs},
                                         {"b3", GroundingCategory::kOs},
                                         {"b4", GroundingCategory::kOs}});
  const FramedPoint in{5, 5, kFrame};
  const FramedPoint out{50, 50, kFrame};
  const std::vector<PredictionRecord> recs{grounding("a1", in),  grounding("a2", out),
                                           grounding("b1", in),  grounding("b2", in),
                                           grounding("b3", in),  grounding("b4", out)};
  const EvalReport rep = aggregate(recs, m);
  ASSERT_EQ(rep.categories.size(), 2u);
  EXPECT_EQ(rep.categories[0].category, "Dev");
  EXPECT_EQ(rep.categories[0].n_correct, 1u);
  EXPECT_EQ(rep.categories[1].category, "OS");
  EXPECT_EQ(rep.categories[1].n_correct, 3u);
  EXPECT_EQ(rep.overall.n_samples, 6u);
  EXPECT_EQ(rep.overall.n_correct, 4u);
  EXPECT_EQ(format_percent(rep.overall.accuracy), "66.7");
  EXPECT_DOUBLE_EQ(rep.macro_accuracy, (0.5 + 0.75) / 2);
  // No Cre/CAD/... columns for empty categories.
  EXPECT_EQ(render_markdown({rep}).find("Cre"), std::string::npos);
}

TEST(Aggregate, MissingAndOrphanRecords) {
  const Manifest m = grounding_manifest({{"a", GroundingCategory::kSci}, {"b", GroundingCategory::kSci}});
  const EvalReport rep = aggregate({grounding("a", FramedPoint{1, 1, kFrame})}, m);
  EXPECT_EQ(rep.n_missing, 1u);
  EXPECT_EQ(rep.overall.n_samples, 2u);
  EXPECT_EQ(rep.overall.n_correct, 1u);
  try {
    aggregate({grounding("zzz", FramedPoint{1, 1, kFrame})}, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOrphanRecord);
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(Aggregate, OrderInvariantAndSumDecomposes) {
  std::mt19937_64 rng(9);
  Manifest m;
  m.task = Task::kMultipleChoice;
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 40; ++i) {
    McSample s;
    s.id = "q" + std::to_string(i);
    const int n = 2 + static_cast<int>(rng() % 7);
    s.choices.resize(static_cast<std::size_t>(n), "c");
    s.answer_index = static_cast<int>(rng() % n);
    s.category = rng() % 2 ? McCategory::kFsp : McCategory::kFcp;
    for (int k = 0; k < n; ++k) recs.push_back(mc_trial(s.id, k, static_cast<int>(rng() % n)));
    m.mc.push_back(s);
  }
  const EvalReport base = aggregate(recs, m);
  std::size_t sum_correct = 0;
  std::size_t sum_n = 0;
  for (const CategoryScore& c : base.categories) {
    sum_correct += c.n_correct;
    sum_n += c.n_samples;
  }
  EXPECT_EQ(sum_correct, base.overall.n_correct);
  EXPECT_EQ(sum_n, base.overall.n_samples);
  EXPECT_EQ(sum_n, recs.size());
  for (int t = 0; t < 20; ++t) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const EvalReport again = aggregate(recs, m);
    ASSERT_EQ(again.overall.n_correct, base.overall.n_correct);
    ASSERT_EQ(again.overall.accuracy, base.overall.accuracy);
    ASSERT_EQ(again.macro_accuracy, base.macro_accuracy);
    ASSERT_EQ(to_json(again).dump(), to_json(base).dump());
  }
}

// A report with `correct` of `n` trials in one category.
EvalReport counts(const std::string& label, std::size_t correct, std::size_t n) {
  std::vector<PredictionRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    PredictionRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.category = "FSP";
    r.correct = i < correct;
    recs.push_back(r);
  }
  EvalReport rep = aggregate_scored(recs);
  rep.label = label;
  return rep;
}

TEST(Compare, PublishedOverallDeltas) {
  EXPECT_EQ(format_delta(compare(counts("ecp", 404, 1000), counts("single", 191, 1000)).deltas->overall),
            "+21.3");
  EXPECT_EQ(format_delta(compare(counts("ecp", 683, 1000), counts("single", 625, 1000)).deltas->overall),
            "+5.8");
  EXPECT_EQ(format_delta(compare(counts("ecp", 603, 1000), counts("single", 551, 1000)).deltas->overall),
            "+5.2");
}

TEST(Compare, IdenticalReportsGiveZero) {
  const EvalReport r = counts("x", 7, 9);
  const EvalReport c = compare(r, r);
  EXPECT_EQ(c.deltas->overall, 0.0);
  EXPECT_EQ(c.deltas->per_category.at("FSP"), 0.0);
  EXPECT_EQ(format_delta(c.deltas->overall), "+0.0");
  EXPECT_EQ(format_delta(-0.04), "+0.0");
  EXPECT_EQ(format_delta(-1.25), "-1.3");
}

TEST(Render, MarkdownAndCsv) {
  const EvalReport base = counts("single", 191, 1000);
  const EvalReport ecp = compare(counts("ecp", 404, 1000), base);
  const std::string md = render_markdown({base, ecp});
  EXPECT_NE(md.find("| Run"), std::string::npos);
  EXPECT_NE(md.find("19.1"), std::string::npos);
  EXPECT_NE(md.find("40.4"), std::string::npos);
  EXPECT_NE(md.find("delta vs single"), std::string::npos);
  EXPECT_NE(md.find("+21.3"), std::string::npos);
  const std::string csv = render_csv({base, ecp});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "Run,FSP,Overall");
  EXPECT_NE(csv.find("ecp,40.4,40.4"), std::string::npos);
  EXPECT_NE(csv.find("delta vs single,+21.3,+21.3"), std::string::npos);
  const auto j = to_json(ecp);
  EXPECT_EQ(j["deltas"]["overall"], "+21.3");
  EXPECT_EQ(j["overall"]["percent"], "40.4");
}

}  // namespace
}  // namespace ecp
