#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "curriculum/scheduler.hpp"
#include "curriculum/trace.hpp"

namespace curriculum {
namespace {

Corpus small_corpus(std::size_t n) {
  std::vector<TrainingInstance> instances;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingInstance inst;
    inst.id = "i" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    inst.embedding = {1.0, static_cast<double>(i)};
    inst.is_normal = i % 2 == 0;
    inst.report = normalize_report(i % 2 == 0 ? "No effusion." : "Nodule in the left base.");
    instances.push_back(std::move(inst));
  }
  return Corpus(std::move(instances));
}

// d_m of instance i is a distinct permutation per metric so the four orders differ.
std::vector<ScoredInstance> distinct_scores(const Corpus& corpus) {
  std::vector<ScoredInstance> rows;
  const double n = static_cast<double>(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double x = static_cast<double>(i);
    rows.push_back({corpus[i].id, {x, n - x, (i * 7) % corpus.size(), static_cast<double>((i * 3) % 11)}});
  }
  return rows;
}

SchedulerOptions options(std::size_t batch = 4, std::uint64_t T = 20, std::uint64_t seed = 1) {
  SchedulerOptions o;
  o.competence = {.c0 = 0.01, .p = 2.0, .T = T};
  o.batch_size = batch;
  o.seed = seed;
  return o;
}

struct Fixture {
  Corpus corpus = gen_synthetic({.size = 300, .dim = 16, .normal_frac = 0.8, .abnormal_rate = 0.3}, 7);
  NGramLearner oracle = fit_ngram_oracle(corpus, {.min_count = 3, .smoothing = 0.1});
  std::vector<ScoredInstance> scores = score_corpus(corpus, build_normal_profile(corpus), &oracle);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TEST(WindowSize, Examples) {
  EXPECT_EQ(window_size(0.01, 100, 16), 16u);
  EXPECT_EQ(window_size(1.0, 100, 16), 100u);
  EXPECT_EQ(window_size(0.5, 101, 16), 51u);
  EXPECT_EQ(window_size(0.07, 100, 1), 7u);
  EXPECT_EQ(window_size(0.071, 100, 1), 8u);
  EXPECT_EQ(window_size(0.99999, 100, 1), 100u);
}

TEST(ContiguousBlock, ClampedToWindowEnd) {
  // window 50, batch 16, anchor 40: positions 34..49
  EXPECT_EQ(contiguous_block_start(40, 50, 16), 34u);
  EXPECT_EQ(contiguous_block_start(49, 50, 16), 34u);
  EXPECT_EQ(contiguous_block_start(20, 50, 16), 20u);
  EXPECT_EQ(contiguous_block_start(3, 50, 16), 3u);
  EXPECT_EQ(contiguous_block_start(0, 16, 16), 0u);
}

TEST(Init, SingleHasOneList) {
  const Corpus corpus = small_corpus(10);
  const auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::single(Metric::d3), options(), nullptr);
  ASSERT_EQ(state.tracks.size(), 1u);
  EXPECT_EQ(state.t_vector(), std::vector<std::uint64_t>{0});
  EXPECT_EQ(state.tracks[0].tag, CurriculumTag::single);
  std::vector<std::size_t> expected(10);
  std::iota(expected.begin(), expected.end(), 0);
  std::sort(expected.begin(), expected.end(), [](std::size_t a, std::size_t b) { return (a * 7) % 10 < (b * 7) % 10; });
  EXPECT_EQ(state.tracks[0].order, expected);
}

TEST(Init, DynamicHasFourListsAndCachedPpl) {
  const Corpus corpus = small_corpus(10);
  AnalyticLearner learner;
  const auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::dynamic(), options(), &learner);
  ASSERT_EQ(state.tracks.size(), 4u);
  EXPECT_EQ(state.t_vector(), (std::vector<std::uint64_t>{0, 0, 0, 0}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(state.tracks[i].tag, tag_of(kAllMetrics[i]));
    EXPECT_EQ(state.tracks[i].pending.instances.size(), 4u);
    EXPECT_TRUE(state.tracks[i].cached_ppl.has_value());
  }
  EXPECT_EQ(*state.tracks[1].cached_ppl, 40.0);
}

TEST(Init, FuseDominance) {
  const Corpus corpus = small_corpus(2);
  const std::vector<ScoredInstance> scores = {{"i01", {1.0, 1.0, 1, 1.0}}, {"i00", {0.0, 0.0, 0, 0.0}}};
  const auto state = init_state(corpus, scores, RouteStrategy::fuse(), options(1), nullptr);
  ASSERT_EQ(state.tracks.size(), 1u);
  EXPECT_EQ(state.tracks[0].tag, CurriculumTag::fused);
  EXPECT_EQ(state.tracks[0].order, (std::vector<std::size_t>{0, 1}));
}

TEST(Init, FuseNormalizesEachMetric) {
  // Raw sums would rank b first (d2 range dwarfs the others); after min-max
  // scaling a is harder on three metrics and easier on one.
  const std::vector<DifficultyScores> scores = {{1.0, 0.0, 3, 1.0}, {0.0, 9.0, 0, 0.0}, {0.5, 4.5, 1, 0.5}};
  const auto fused = fused_difficulty(scores);
  EXPECT_DOUBLE_EQ(fused[0], 3.0);
  EXPECT_DOUBLE_EQ(fused[1], 1.0);
  EXPECT_DOUBLE_EQ(fused[2], 0.5 + 0.5 + 1.0 / 3.0 + 0.5);
}

TEST(Init, Errors) {
  const Corpus corpus = small_corpus(5);
  auto scores = distinct_scores(corpus);
  scores.pop_back();
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io;
  };
  EXPECT_EQ(kind([&] { init_state(corpus, scores, RouteStrategy::fuse(), options(), nullptr); }),
            ErrorKind::score_missing);
  EXPECT_EQ(kind([&] { init_state(corpus, distinct_scores(corpus), RouteStrategy::fuse(), options(6), nullptr); }),
            ErrorKind::batch_larger_than_corpus);
  EXPECT_EQ(kind([&] { init_state(corpus, distinct_scores(corpus), RouteStrategy::dynamic(), options(2), nullptr); }),
            ErrorKind::missing_learner);
}

TEST(SampleBatch, FullWindowWhenWindowEqualsBatch) {
  const Corpus corpus = small_corpus(20);
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::single(Metric::d1), options(8, 1000), nullptr);
  const auto batch = sample_batch(state, 0);
  EXPECT_EQ(batch.window, 8u);
  EXPECT_EQ(std::set<std::size_t>(batch.instances.begin(), batch.instances.end()),
            (std::set<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(SampleBatch, DeterministicOnSameState) {
  const auto& f = fixture();
  const auto state = init_state(f.corpus, f.scores, RouteStrategy::random(), options(16, 50), nullptr);
  for (std::size_t slot = 0; slot < 4; ++slot) {
    auto a = state;
    auto b = state;
    EXPECT_EQ(sample_batch(a, slot).instances, sample_batch(b, slot).instances);
    EXPECT_EQ(a.t_vector(), state.t_vector());
  }
}

TEST(SampleBatch, SimilarDifficultyTakesContiguousPositions) {
  const auto& f = fixture();
  auto opts = options(16, 40);
  opts.similar_difficulty_batching = true;
  auto state = init_state(f.corpus, f.scores, RouteStrategy::single(Metric::d2), opts, nullptr);
  state.tracks[0].t = 15;
  const auto& order = state.tracks[0].order;
  for (int draw = 0; draw < 50; ++draw) {
    const auto batch = sample_batch(state, 0);
    auto first = std::find(order.begin(), order.end(), batch.instances.front());
    ASSERT_NE(first, order.end());
    const auto start = static_cast<std::size_t>(first - order.begin());
    for (std::size_t k = 0; k < batch.instances.size(); ++k) EXPECT_EQ(batch.instances[k], order[start + k]);
    EXPECT_LE(start + 16, batch.window);
  }
}

TEST(Route, Argmax) {
  CurriculumState state;
  state.strategy = RouteStrategy::dynamic();
  auto with = [&](std::array<double, 4> ppl) {
    state.tracks.assign(4, {});
    for (std::size_t i = 0; i < 4; ++i) state.tracks[i].cached_ppl = ppl[i];
    return route(state);
  };
  EXPECT_EQ(with({10, 40, 20, 30}), 1u);
  EXPECT_EQ(with({7, 7, 7, 7}), 0u);
  EXPECT_EQ(with({5, 5, 9, 9}), 2u);
}

TEST(Route, StrategyMismatch) {
  CurriculumState state;
  state.strategy = RouteStrategy::sequential();
  try {
    route(state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::strategy_mismatch);
  }
}

TEST(Step, SequentialRotation) {
  const Corpus corpus = small_corpus(12);
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::sequential(), options(), nullptr);
  const std::vector<CurriculumTag> expected = {CurriculumTag::d1, CurriculumTag::d2, CurriculumTag::d3,
                                               CurriculumTag::d4, CurriculumTag::d1};
  for (std::size_t s = 0; s < expected.size(); ++s) {
    const auto spec = step(state, corpus, nullptr);
    EXPECT_EQ(spec.curriculum, expected[s]);
    EXPECT_EQ(spec.step, s + 1);
    EXPECT_FALSE(spec.ppl.has_value());
  }
  EXPECT_EQ(state.t_vector(), (std::vector<std::uint64_t>{2, 1, 1, 1}));
}

TEST(Step, SingleCountsEveryStep) {
  const Corpus corpus = small_corpus(12);
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::single(Metric::d4), options(), nullptr);
  for (std::uint64_t k = 1; k <= 9; ++k) {
    step(state, corpus, nullptr);
    EXPECT_EQ(state.t_vector(), std::vector<std::uint64_t>{k});
    EXPECT_EQ(state.global_step, k);
  }
}

TEST(Step, DynamicWithAnalyticLearnerGolden) {
  // Hand simulation: PPLs start at (10, 40, 20, 30) and the trained
  // curriculum halves. Ties go to the lower metric.
  //   (10,40,20,30) d2 | (10,20,20,30) d4 | (10,20,20,15) d2 | (10,10,20,15) d3
  //   (10,10,10,15) d4 | (10,10,10,7.5) d1 | (5,10,10,7.5) d2 | (5,5,10,7.5) d3
  //   (5,5,5,7.5) d4   | (5,5,5,3.75) d1
  const Corpus corpus = small_corpus(12);
  AnalyticLearner learner;
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::dynamic(), options(), &learner);
  using enum CurriculumTag;
  const std::vector<CurriculumTag> tags = {d2, d4, d2, d3, d4, d1, d2, d3, d4, d1};
  const std::vector<double> ppls = {40, 30, 20, 20, 15, 10, 10, 10, 7.5, 5};
  for (std::size_t s = 0; s < tags.size(); ++s) {
    const auto spec = step(state, corpus, &learner);
    EXPECT_EQ(spec.curriculum, tags[s]) << "step " << s + 1;
    EXPECT_EQ(spec.ppl, ppls[s]) << "step " << s + 1;
  }
  EXPECT_EQ(state.t_vector(), (std::vector<std::uint64_t>{2, 3, 2, 3}));
}

TEST(Step, EmittedBatchIsThePendingOne) {
  const Corpus corpus = small_corpus(12);
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::sequential(), options(), nullptr);
  for (int s = 0; s < 8; ++s) {
    const std::size_t slot = state.sequential_next;
    std::vector<std::string> expected;
    for (std::size_t i : state.tracks[slot].pending.instances) expected.push_back(corpus[i].id);
    EXPECT_EQ(step(state, corpus, nullptr).ids, expected);
  }
}

class FailingLearner : public Learner {
 public:
  bool fail_train = false;
  bool fail_ppl = false;
  void train(const Batch&) override {
    if (fail_train) throw std::runtime_error("train failed");
  }
  double ppl(const Batch& b) const override {
    if (fail_ppl) throw std::runtime_error("ppl failed");
    return static_cast<double>(b.size());
  }
};

TEST(Step, LearnerFailureLeavesStateUntouched) {
  const Corpus corpus = small_corpus(12);
  FailingLearner learner;
  auto state = init_state(corpus, distinct_scores(corpus), RouteStrategy::random(), options(), &learner);
  step(state, corpus, &learner);
  for (bool on_train : {true, false}) {
    learner.fail_train = on_train;
    learner.fail_ppl = !on_train;
    const auto before = state;
    EXPECT_THROW(step(state, corpus, &learner), std::runtime_error);
    EXPECT_EQ(state.global_step, before.global_step);
    EXPECT_EQ(state.t_vector(), before.t_vector());
    EXPECT_TRUE(state.rng == before.rng);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(state.tracks[i].pending.instances, before.tracks[i].pending.instances);
    }
  }
}

TEST(Run, LengthAndDeterminism) {
  const auto& f = fixture();
  NGramLearner l1 = make_ngram(f.corpus, {.min_count = 3});
  NGramLearner l2 = make_ngram(f.corpus, {.min_count = 3});
  EXPECT_EQ(run(f.corpus, f.scores, RouteStrategy::dynamic(), options(16, 30), &l1, 1).rows.size(), 1u);
  NGramLearner l3 = make_ngram(f.corpus, {.min_count = 3});
  const auto a = run(f.corpus, f.scores, RouteStrategy::dynamic(), options(16, 30, 9), &l2, 60);
  const auto b = run(f.corpus, f.scores, RouteStrategy::dynamic(), options(16, 30, 9), &l3, 60);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.final_t, b.final_t);
  EXPECT_THROW(run(f.corpus, f.scores, RouteStrategy::fuse(), options(), nullptr, 0), Error);
}

TEST(Run, TraceInvariantsAcrossStrategies) {
  const auto& f = fixture();
  for (auto strategy : {RouteStrategy::dynamic(), RouteStrategy::fuse(), RouteStrategy::random(),
                        RouteStrategy::sequential(), RouteStrategy::single(Metric::d2),
                        RouteStrategy::shuffled()}) {
    for (bool similar : {false, true}) {
      auto opts = options(16, 40, 3);
      opts.similar_difficulty_batching = similar;
      NGramLearner learner = make_ngram(f.corpus, {.min_count = 3});
      const auto trace = run(f.corpus, f.scores, strategy, opts, &learner, 120);
      TraceCheck check;
      check.strategy = strategy.kind;
      check.batch_size = 16;
      check.competence = opts.competence;
      check.final_t = trace.final_t;
      for (const auto& [tag, order] : build_orders(f.corpus, f.scores, strategy)) {
        auto& ids = check.orders[tag];
        for (std::size_t i : order) ids.push_back(f.corpus[i].id);
      }
      const auto problems = validate_trace(trace.rows, check);
      EXPECT_TRUE(problems.empty()) << strategy.to_string() << ": " << problems.front();
    }
  }
}

TEST(Run, CoverageAfterSaturation) {
  const auto& f = fixture();
  const auto trace = run(f.corpus, f.scores, RouteStrategy::single(Metric::d1), options(16, 10), nullptr, 15);
  for (const auto& row : trace.rows) {
    if (row.step > 10) {
      EXPECT_EQ(row.competence, 1.0);
      EXPECT_EQ(row.window, f.corpus.size());
    }
  }
}

TEST(Run, ShuffledVisitsEachInstanceOncePerEpoch) {
  const Corpus corpus = small_corpus(12);
  const auto trace = run(corpus, distinct_scores(corpus), RouteStrategy::shuffled(), options(4), nullptr, 3);
  std::set<std::string> seen;
  for (const auto& row : trace.rows) seen.insert(row.ids.begin(), row.ids.end());
  EXPECT_EQ(seen.size(), 12u);
}

TEST(Run, RescoreAllStillValid) {
  const auto& f = fixture();
  auto opts = options(16, 40, 5);
  NGramLearner literal_learner = make_ngram(f.corpus, {.min_count = 3});
  const auto literal = run(f.corpus, f.scores, RouteStrategy::dynamic(), opts, &literal_learner, 80);
  opts.rescore_all_ppl = true;
  NGramLearner rescored_learner = make_ngram(f.corpus, {.min_count = 3});
  const auto rescored = run(f.corpus, f.scores, RouteStrategy::dynamic(), opts, &rescored_learner, 80);
  EXPECT_NE(literal.rows, rescored.rows);
  TraceCheck check;
  check.strategy = StrategyKind::dynamic;
  check.literal_ppl_cache = false;
  check.final_t = rescored.final_t;
  EXPECT_TRUE(validate_trace(rescored.rows, check).empty());
}

TEST(Run, EarlyStopOnFlatValidation) {
  const Corpus corpus = small_corpus(12);
  AnalyticLearner learner;
  const Batch validation = make_batch(corpus, CurriculumTag::single);
  const auto trace = run(corpus, distinct_scores(corpus), RouteStrategy::dynamic(), options(), &learner, 1000,
                         {.validation = &validation, .eval_every = 5, .patience = 2, .epsilon = 1e-6});
  EXPECT_TRUE(trace.stopped_early);
  EXPECT_EQ(trace.rows.size(), 15u);
  EXPECT_EQ(trace.validation_ppl.size(), 3u);
}

TEST(Run, EarlyStepsFavourEasyInstances) {
  const auto& f = fixture();
  for (Metric m : kAllMetrics) {
    double corpus_mean = 0.0;
    std::map<std::string, double> value;
    for (const auto& row : f.scores) {
      value[row.id] = row.scores.get(m);
      corpus_mean += row.scores.get(m);
    }
    corpus_mean /= static_cast<double>(f.scores.size());
    const auto trace = run(f.corpus, f.scores, RouteStrategy::single(m), options(16, 200, 11), nullptr, 20);
    double early = 0.0;
    std::size_t count = 0;
    for (const auto& row : trace.rows) {
      for (const auto& id : row.ids) {
        early += value[id];
        ++count;
      }
    }
    EXPECT_LT(early / static_cast<double>(count), corpus_mean) << to_string(m);
  }
}

TEST(RouteStrategy, ParseAndPrint) {
  for (std::string text : {"single:d1", "single:d4", "dynamic", "fuse", "random", "sequential", "shuffled"}) {
    EXPECT_EQ(RouteStrategy::parse(text).to_string(), text);
  }
  EXPECT_THROW(RouteStrategy::parse("single:d5"), Error);
  EXPECT_THROW(RouteStrategy::parse("greedy"), Error);
}

}  // namespace
}  // namespace curriculum
