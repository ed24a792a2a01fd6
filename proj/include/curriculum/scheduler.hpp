#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curriculum/competence.hpp"
#include "curriculum/corpus.hpp"
#include "curriculum/difficulty.hpp"
#include "curriculum/error.hpp"
#include "curriculum/learner.hpp"
#include "curriculum/metric.hpp"
#include "curriculum/random.hpp"

namespace curriculum {

// ---------------------------------------------------------------------------
// Route strategies

enum class StrategyKind {
  single,      // one metric, one sorted list
  dynamic,     // four lists, train the one with the highest cached PPL
  fuse,        // one list sorted by the sum of min-max normalized d1..d4
  random,      // four lists, pick one uniformly each step
  sequential,  // four lists, d1 -> d2 -> d3 -> d4 -> d1 ...
  shuffled,    // no curriculum: epoch-shuffled passes over the full corpus
};

struct RouteStrategy {
  StrategyKind kind = StrategyKind::dynamic;
  Metric metric = Metric::d1;  // used by `single` only

  static RouteStrategy single(Metric m) { return {StrategyKind::single, m}; }
  static RouteStrategy dynamic() { return {StrategyKind::dynamic, Metric::d1}; }
  static RouteStrategy fuse() { return {StrategyKind::fuse, Metric::d1}; }
  static RouteStrategy random() { return {StrategyKind::random, Metric::d1}; }
  static RouteStrategy sequential() { return {StrategyKind::sequential, Metric::d1}; }
  static RouteStrategy shuffled() { return {StrategyKind::shuffled, Metric::d1}; }

  // Four parallel curricula?
  bool is_multi() const {
    return kind == StrategyKind::dynamic || kind == StrategyKind::random ||
           kind == StrategyKind::sequential;
  }

  // "single:d3", "dynamic", "fuse", "random", "sequential", "shuffled".
  static RouteStrategy parse(std::string_view text) {
    if (text.starts_with("single:")) {
      if (auto m = parse_metric(text.substr(7))) return single(*m);
    } else if (text == "dynamic") {
      return dynamic();
    } else if (text == "fuse") {
      return fuse();
    } else if (text == "random") {
      return random();
    } else if (text == "sequential") {
      return sequential();
    } else if (text == "shuffled") {
      return shuffled();
    }
    throw Error(ErrorKind::usage, "unknown strategy '" + std::string(text) +
                                      "' (expected single:d1..d4, dynamic, fuse, random, "
                                      "sequential or shuffled)");
  }

  std::string to_string() const {
    switch (kind) {
      case StrategyKind::single: return "single:" + std::string(curriculum::to_string(metric));
      case StrategyKind::dynamic: return "dynamic";
      case StrategyKind::fuse: return "fuse";
      case StrategyKind::random: return "random";
      case StrategyKind::sequential: return "sequential";
      case StrategyKind::shuffled: return "shuffled";
    }
    return "dynamic";
  }

  friend bool operator==(const RouteStrategy&, const RouteStrategy&) = default;
};

struct SchedulerOptions {
  CompetenceParams competence;
  std::size_t batch_size = 16;
  bool similar_difficulty_batching = false;
  // Re-evaluate every curriculum's pending batch before routing instead of
  // keeping the PPL measured right after that curriculum was last trained.
  bool rescore_all_ppl = false;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// State

struct SampledBatch {
  std::vector<std::size_t> instances;  // corpus indices
  double competence = 0.0;
  std::size_t window = 0;
};

struct CurriculumTrack {
  CurriculumTag tag = CurriculumTag::single;
  std::vector<std::size_t> order;  // corpus indices, easy to hard
  std::uint64_t t = 0;
  SampledBatch pending;  // the batch this curriculum will emit next
  std::optional<double> cached_ppl;
};

// Single-writer value: copy it to snapshot, hand it between threads only at
// step boundaries.
struct CurriculumState {
  RouteStrategy strategy;
  SchedulerOptions options;
  std::vector<CurriculumTrack> tracks;
  std::uint64_t global_step = 0;
  Rng rng;
  std::size_t sequential_next = 0;
  // Shuffled baseline only.
  std::vector<std::size_t> epoch_order;
  std::size_t epoch_cursor = 0;

  std::vector<std::uint64_t> t_vector() const {
    std::vector<std::uint64_t> t;
    for (const auto& track : tracks) t.push_back(track.t);
    return t;
  }
};

// One emitted batch, as recorded in the trace.
struct BatchSpec {
  std::uint64_t step = 0;
  CurriculumTag curriculum = CurriculumTag::single;
  double competence = 0.0;
  std::size_t window = 0;
  std::vector<std::string> ids;
  std::optional<double> ppl;

  friend bool operator==(const BatchSpec&, const BatchSpec&) = default;
};

// ---------------------------------------------------------------------------
// Windows and sampling

// max(batch_size, ceil(c * n)), capped at n. Products within 1e-9 of an
// integer are snapped first so 0.07 * 100 gives 7, not 8.
inline std::size_t window_size(double c, std::size_t n, std::size_t batch_size) {
  double x = c * static_cast<double>(n);
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) x = nearest;
  const auto w = static_cast<std::size_t>(std::ceil(x));
  return std::min(n, std::max(batch_size, w));
}

// First position of the contiguous block of `batch_size` entries anchored at
// `anchor`, shifted back so it ends inside the window.
inline std::size_t contiguous_block_start(std::size_t anchor, std::size_t window,
                                          std::size_t batch_size) {
  return std::min(anchor, window - batch_size);
}

namespace detail {

inline SampledBatch sample_shuffled(CurriculumState& state, std::size_t n) {
  const std::size_t b = state.options.batch_size;
  if (state.epoch_order.size() != n || state.epoch_cursor + b > n) {
    state.epoch_order.resize(n);
    std::iota(state.epoch_order.begin(), state.epoch_order.end(), std::size_t{0});
    state.rng.shuffle(state.epoch_order);
    state.epoch_cursor = 0;
  }
  SampledBatch batch;
  batch.competence = 1.0;
  batch.window = n;
  batch.instances.assign(state.epoch_order.begin() + static_cast<std::ptrdiff_t>(state.epoch_cursor),
                         state.epoch_order.begin() + static_cast<std::ptrdiff_t>(state.epoch_cursor + b));
  state.epoch_cursor += b;
  return batch;
}

}  // namespace detail

// Draws B_slot(t_slot) from the top c(t_slot) window of that curriculum's
// list. Advances the generator, never t.
inline SampledBatch sample_batch(CurriculumState& state, std::size_t slot) {
  const CurriculumTrack& track = state.tracks.at(slot);
  const std::size_t n = track.order.size();
  const std::size_t b = state.options.batch_size;
  if (state.strategy.kind == StrategyKind::shuffled) return detail::sample_shuffled(state, n);

  SampledBatch batch;
  batch.competence = competence(track.t, state.options.competence);
  batch.window = window_size(batch.competence, n, b);
  batch.instances.reserve(b);
  if (state.options.similar_difficulty_batching) {
    const std::size_t anchor = state.rng.uniform_index(batch.window);
    const std::size_t start = contiguous_block_start(anchor, batch.window, b);
    for (std::size_t pos = start; pos < start + b; ++pos) batch.instances.push_back(track.order[pos]);
  } else {
    for (std::size_t pos : sample_without_replacement(batch.window, b, state.rng)) {
      batch.instances.push_back(track.order[pos]);
    }
  }
  return batch;
}

inline Batch to_batch(const Corpus& corpus, const SampledBatch& sampled, CurriculumTag tag) {
  Batch batch{tag, {}};
  batch.instances.reserve(sampled.instances.size());
  for (std::size_t i : sampled.instances) batch.instances.push_back(&corpus[i]);
  return batch;
}

// ---------------------------------------------------------------------------
// Orderings

namespace detail {

inline std::vector<DifficultyScores> align_scores(const Corpus& corpus,
                                                  const std::vector<ScoredInstance>& scores) {
  std::vector<std::optional<DifficultyScores>> aligned(corpus.size());
  for (const auto& row : scores) {
    auto idx = corpus.find(row.id);
    if (!idx) throw Error(ErrorKind::schema, "scores contain unknown id \"" + row.id + "\"");
    aligned[*idx] = row.scores;
  }
  std::vector<DifficultyScores> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!aligned[i]) {
      throw Error(ErrorKind::score_missing, "no scores for id \"" + corpus[i].id + "\"");
    }
    out.push_back(*aligned[i]);
  }
  return out;
}

template <typename KeyFn>
std::vector<std::size_t> sorted_indices(const Corpus& corpus, KeyFn key) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(a);
    const double kb = key(b);
    if (ka != kb) return ka < kb;
    return corpus[a].id < corpus[b].id;
  });
  return order;
}

}  // namespace detail

// Per-instance d1+d2+d3+d4 after min-max normalizing each metric over the
// corpus. A constant metric contributes 0.
inline std::vector<double> fused_difficulty(const std::vector<DifficultyScores>& scores) {
  std::vector<double> fused(scores.size(), 0.0);
  for (Metric m : kAllMetrics) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : scores) {
      lo = std::min(lo, s.get(m));
      hi = std::max(hi, s.get(m));
    }
    if (!(hi > lo)) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      fused[i] += (scores[i].get(m) - lo) / (hi - lo);
    }
  }
  return fused;
}

// Corpus indices for every curriculum the strategy uses, easy to hard.
inline std::vector<std::pair<CurriculumTag, std::vector<std::size_t>>> build_orders(
    const Corpus& corpus, const std::vector<ScoredInstance>& scores, const RouteStrategy& strategy) {
  const auto aligned = detail::align_scores(corpus, scores);
  std::vector<std::pair<CurriculumTag, std::vector<std::size_t>>> orders;
  switch (strategy.kind) {
    case StrategyKind::single:
      orders.emplace_back(CurriculumTag::single,
                          detail::sorted_indices(corpus, [&](std::size_t i) {
                            return aligned[i].get(strategy.metric);
                          }));
      break;
    case StrategyKind::fuse: {
      const auto fused = fused_difficulty(aligned);
      orders.emplace_back(CurriculumTag::fused,
                          detail::sorted_indices(corpus, [&](std::size_t i) { return fused[i]; }));
      break;
    }
    case StrategyKind::shuffled: {
      std::vector<std::size_t> identity(corpus.size());
      std::iota(identity.begin(), identity.end(), std::size_t{0});
      orders.emplace_back(CurriculumTag::single, std::move(identity));
      break;
    }
    case StrategyKind::dynamic:
    case StrategyKind::random:
    case StrategyKind::sequential:
      for (Metric m : kAllMetrics) {
        orders.emplace_back(tag_of(m), detail::sorted_indices(corpus, [&](std::size_t i) {
                              return aligned[i].get(m);
                            }));
      }
      break;
  }
  return orders;
}

// ---------------------------------------------------------------------------
// The state machine

// Sorts the corpus for each active curriculum, sets every t_i to 0, samples
// each B_i(0) and, when a learner is attached, caches PPL(B_i(0)).
inline CurriculumState init_state(const Corpus& corpus, const std::vector<ScoredInstance>& scores,
                                  const RouteStrategy& strategy, const SchedulerOptions& options,
                                  const Learner* learner) {
  options.competence.validate();
  if (options.batch_size == 0) throw Error(ErrorKind::usage, "batch_size must be positive");
  if (options.batch_size > corpus.size()) {
    throw Error(ErrorKind::batch_larger_than_corpus,
                "batch_size " + std::to_string(options.batch_size) + " exceeds corpus size " +
                    std::to_string(corpus.size()));
  }
  if (strategy.kind == StrategyKind::dynamic && learner == nullptr) {
    throw Error(ErrorKind::missing_learner, "dynamic routing needs a learner to measure PPL");
  }

  CurriculumState state;
  state.strategy = strategy;
  state.options = options;
  state.rng = Rng(options.seed);
  for (auto& [tag, order] : build_orders(corpus, scores, strategy)) {
    CurriculumTrack track;
    track.tag = tag;
    track.order = std::move(order);
    state.tracks.push_back(std::move(track));
  }
  for (std::size_t slot = 0; slot < state.tracks.size(); ++slot) {
    auto& track = state.tracks[slot];
    track.pending = sample_batch(state, slot);
    if (learner != nullptr) track.cached_ppl = learner->ppl(to_batch(corpus, track.pending, track.tag));
  }
  return state;
}

// argmax_i cached PPL; the first curriculum in d1..d4 order wins ties.
inline std::size_t route(const CurriculumState& state) {
  if (state.strategy.kind != StrategyKind::dynamic) {
    throw Error(ErrorKind::strategy_mismatch,
                "route() applies to dynamic routing only, strategy is " + state.strategy.to_string());
  }
  std::size_t best = 0;
  for (std::size_t slot = 0; slot < state.tracks.size(); ++slot) {
    const auto& ppl = state.tracks[slot].cached_ppl;
    if (!ppl) throw Error(ErrorKind::missing_learner, "curriculum has no cached PPL");
    if (*ppl > *state.tracks[best].cached_ppl) best = slot;
  }
  return best;
}

namespace detail {

inline std::size_t choose_slot(CurriculumState& state) {
  switch (state.strategy.kind) {
    case StrategyKind::dynamic: return route(state);
    case StrategyKind::random: return state.rng.uniform_index(state.tracks.size());
    case StrategyKind::sequential: {
      const std::size_t slot = state.sequential_next;
      state.sequential_next = (slot + 1) % state.tracks.size();
      return slot;
    }
    case StrategyKind::single:
    case StrategyKind::fuse:
    case StrategyKind::shuffled:
      return 0;
  }
  return 0;
}

}  // namespace detail

// One iteration of the training loop: pick a curriculum, emit and train on
// its pending batch, advance its t, sample its next batch and measure that
// batch's PPL. The returned spec carries the PPL measured before training.
// If the learner throws, `state` is left untouched.
inline BatchSpec step(CurriculumState& state, const Corpus& corpus, Learner* learner) {
  if (state.strategy.kind == StrategyKind::dynamic && learner == nullptr) {
    throw Error(ErrorKind::missing_learner, "dynamic routing needs a learner to measure PPL");
  }
  CurriculumState next = state;
  if (next.options.rescore_all_ppl && learner != nullptr) {
    for (auto& track : next.tracks) {
      track.cached_ppl = learner->ppl(to_batch(corpus, track.pending, track.tag));
    }
  }
  const std::size_t slot = detail::choose_slot(next);
  CurriculumTrack& track = next.tracks[slot];

  BatchSpec spec;
  spec.step = next.global_step + 1;
  spec.curriculum = track.tag;
  spec.competence = track.pending.competence;
  spec.window = track.pending.window;
  spec.ppl = track.cached_ppl;
  spec.ids.reserve(track.pending.instances.size());
  for (std::size_t i : track.pending.instances) spec.ids.push_back(corpus[i].id);

  if (learner != nullptr) learner->train(to_batch(corpus, track.pending, track.tag));
  ++track.t;
  ++next.global_step;
  track.pending = sample_batch(next, slot);
  if (learner != nullptr) {
    track.cached_ppl = learner->ppl(to_batch(corpus, track.pending, track.tag));
  }
  state = std::move(next);
  return spec;
}

// ---------------------------------------------------------------------------
// Driver

// Optional stop criterion: every `eval_every` steps the learner's mean
// per-report PPL on `validation` is measured; the run stops once `patience`
// consecutive evaluations fail to improve on the best by at least `epsilon`.
struct EarlyStop {
  const Batch* validation = nullptr;
  std::size_t eval_every = 0;  // 0 disables
  std::size_t patience = 3;
  double epsilon = 1e-3;
};

struct ScheduleTrace {
  std::vector<BatchSpec> rows;
  std::vector<std::uint64_t> final_t;
  std::vector<double> validation_ppl;
  bool stopped_early = false;
};

inline ScheduleTrace run(const Corpus& corpus, const std::vector<ScoredInstance>& scores,
                         const RouteStrategy& strategy, const SchedulerOptions& options,
                         Learner* learner, std::uint64_t n_steps, const EarlyStop& early_stop = {}) {
  if (n_steps < 1) throw Error(ErrorKind::usage, "n_steps must be >= 1");
  CurriculumState state = init_state(corpus, scores, strategy, options, learner);
  ScheduleTrace trace;
  trace.rows.reserve(n_steps);
  const bool evaluating = early_stop.eval_every > 0 && early_stop.validation != nullptr && learner;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::uint64_t s = 0; s < n_steps; ++s) {
    trace.rows.push_back(step(state, corpus, learner));
    if (evaluating && state.global_step % early_stop.eval_every == 0) {
      const double v = learner->ppl(*early_stop.validation) /
                       static_cast<double>(early_stop.validation->size());
      trace.validation_ppl.push_back(v);
      if (v < best - early_stop.epsilon) {
        best = v;
        stale = 0;
      } else if (++stale >= early_stop.patience) {
        trace.stopped_early = true;
        break;
      }
    }
  }
  trace.final_t = state.t_vector();
  return trace;
}

}  // namespace curriculum
