#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curriculum/corpus.hpp"
#include "curriculum/error.hpp"
#include "curriculum/format.hpp"
#include "curriculum/metric.hpp"

namespace curriculum {

// A batch handed to a learner. The curriculum tag says which sorted list the
// batch came from; token models ignore it.
struct Batch {
  CurriculumTag curriculum = CurriculumTag::single;
  std::vector<const TrainingInstance*> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

inline Batch make_batch(const Corpus& corpus, CurriculumTag tag) {
  Batch batch{tag, {}};
  batch.instances.reserve(corpus.size());
  for (const auto& inst : corpus) batch.instances.push_back(&inst);
  return batch;
}

// The model seam used by the scheduler. `ppl` must not change observable
// state; `train` may.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual void train(const Batch& batch) = 0;
  virtual double ppl(const Batch& batch) const = 0;
};

// A learner that assigns token probabilities to reports. Batch perplexity is
// the sum over reports of exp(mean per-token NLL), i.e. of each report's
// geometric-mean inverse token probability.
class LanguageModel : public Learner {
 public:
  // Mean negative log-likelihood per report token, in nats.
  virtual double mean_nll(const Report& report) const = 0;

  double report_ppl(const Report& report) const { return std::exp(mean_nll(report)); }

  double ppl(const Batch& batch) const override {
    if (batch.empty()) throw Error(ErrorKind::empty_batch, "perplexity of an empty batch");
    double total = 0.0;
    for (const auto* inst : batch.instances) total += report_ppl(inst->report);
    return total;
  }

  // ppl / |batch|: comparable across batches of different sizes.
  double mean_report_ppl(const Batch& batch) const {
    return ppl(batch) / static_cast<double>(batch.size());
  }
};

// Every token equally likely among `vocab_size` outcomes. Does not learn.
class UniformLearner : public LanguageModel {
 public:
  explicit UniformLearner(std::size_t vocab_size) : log_v_(std::log(static_cast<double>(vocab_size))) {
    if (vocab_size == 0) throw Error(ErrorKind::usage, "uniform model needs a nonempty vocabulary");
  }

  void train(const Batch&) override {}

  double mean_nll(const Report& report) const override {
    if (report.token_count() == 0) throw Error(ErrorKind::empty_batch, "empty report");
    return log_v_;
  }

 private:
  double log_v_;
};

// Bigram model with add-k smoothing. Reports are wrapped in <bos> ... <eos>
// for counting; scoring covers the report tokens only, each conditioned on
// its predecessor (<bos> for the first).
//
// Outcomes are every vocabulary entry except <bos>, so for any context
//   P(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k * |outcomes|)
// sums to one.
class NGramLearner : public LanguageModel {
 public:
  explicit NGramLearner(Vocabulary vocab, double k = 0.1)
      : vocab_(std::move(vocab)), k_(k), counts_(vocab_.size()), totals_(vocab_.size(), 0) {
    if (!(k_ > 0.0) || !std::isfinite(k_)) {
      throw Error(ErrorKind::usage, "smoothing k must be positive");
    }
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  double smoothing() const { return k_; }
  std::size_t outcome_count() const { return vocab_.size() - 1; }

  void train(const Batch& batch) override {
    for (const auto* inst : batch.instances) train_report(inst->report);
  }

  void train_report(const Report& report) {
    std::size_t ctx = Vocabulary::kBegin;
    for (const auto& sentence : report.sentences) {
      for (const auto& tok : sentence) {
        const std::size_t next = vocab_.index(tok);
        add_count(ctx, next, 1);
        ctx = next;
      }
    }
    add_count(ctx, Vocabulary::kEnd, 1);
  }

  std::uint64_t count(std::size_t ctx, std::size_t next) const {
    auto it = counts_.at(ctx).find(next);
    return it == counts_[ctx].end() ? 0 : it->second;
  }

  double probability(std::size_t ctx, std::size_t next) const {
    if (next == Vocabulary::kBegin) return 0.0;
    const double numer = static_cast<double>(count(ctx, next)) + k_;
    const double denom = static_cast<double>(totals_.at(ctx)) +
                         k_ * static_cast<double>(outcome_count());
    return numer / denom;
  }

  double mean_nll(const Report& report) const override {
    const std::size_t n = report.token_count();
    if (n == 0) throw Error(ErrorKind::empty_batch, "empty report");
    double nll = 0.0;
    std::size_t ctx = Vocabulary::kBegin;
    for (const auto& sentence : report.sentences) {
      for (const auto& tok : sentence) {
        const std::size_t next = vocab_.index(tok);
        nll -= std::log(probability(ctx, next));
        ctx = next;
      }
    }
    return nll / static_cast<double>(n);
  }

  // Plain-text checkpoint: vocabulary in index order, then the nonzero
  // bigram counts sorted by (context token, next token).
  void save(std::ostream& out) const {
    out << "ngram-checkpoint 1\n";
    out << "smoothing " << format_double(k_) << '\n';
    out << "vocab " << vocab_.size() << '\n';
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      out << vocab_.token(i) << '\t' << vocab_.frequency(i) << '\n';
    }
    std::map<std::pair<std::string, std::string>, std::uint64_t> sorted;
    for (std::size_t ctx = 0; ctx < counts_.size(); ++ctx) {
      for (const auto& [next, n] : counts_[ctx]) {
        sorted.emplace(std::make_pair(vocab_.token(ctx), vocab_.token(next)), n);
      }
    }
    out << "counts " << sorted.size() << '\n';
    for (const auto& [key, n] : sorted) {
      out << key.first << '\t' << key.second << '\t' << n << '\n';
    }
  }

  static NGramLearner load(std::istream& in) {
    auto fail = [](const std::string& what) -> Error {
      return Error(ErrorKind::parse, "ngram checkpoint: " + what);
    };
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "ngram-checkpoint" || version != 1) {
      throw fail("bad header");
    }
    double k = 0.0;
    if (!(in >> word >> k) || word != "smoothing") throw fail("missing smoothing");
    std::size_t vocab_size = 0;
    if (!(in >> word >> vocab_size) || word != "vocab" || vocab_size < 3) {
      throw fail("missing vocab size");
    }
    Vocabulary vocab;
    for (std::size_t i = 0; i < vocab_size; ++i) {
      std::string token;
      std::size_t freq = 0;
      if (!(in >> token >> freq)) throw fail("truncated vocabulary");
      if (i < 3) {
        if (token != vocab.token(i)) throw fail("special tokens out of order");
        if (i == Vocabulary::kUnknown) vocab.set_unknown_frequency(freq);
      } else if (vocab.add(token, freq) != i) {
        throw fail("duplicate token " + token);
      }
    }
    NGramLearner learner(std::move(vocab), k);
    std::size_t entries = 0;
    if (!(in >> word >> entries) || word != "counts") throw fail("missing counts");
    for (std::size_t e = 0; e < entries; ++e) {
      std::string ctx, next;
      std::uint64_t n = 0;
      if (!(in >> ctx >> next >> n)) throw fail("truncated count table");
      if (!learner.vocab_.contains(ctx) || !learner.vocab_.contains(next)) {
        throw fail("count refers to unknown token");
      }
      learner.add_count(learner.vocab_.index(ctx), learner.vocab_.index(next), n);
    }
    return learner;
  }

 private:
  void add_count(std::size_t ctx, std::size_t next, std::uint64_t n) {
    counts_[ctx][next] += n;
    totals_[ctx] += n;
  }

  Vocabulary vocab_;
  double k_;
  std::vector<std::unordered_map<std::size_t, std::uint64_t>> counts_;
  std::vector<std::uint64_t> totals_;
};

struct NGramOptions {
  std::size_t min_count = 10;
  double smoothing = 0.1;
};

// Fresh (untrained) bigram model over the corpus vocabulary.
inline NGramLearner make_ngram(const Corpus& corpus, const NGramOptions& options) {
  return NGramLearner(build_vocabulary(corpus, options.min_count), options.smoothing);
}

// Bigram model trained for one pass over the corpus in file order; the
// reference model behind textual-confidence scoring.
inline NGramLearner fit_ngram_oracle(const Corpus& corpus, const NGramOptions& options) {
  NGramLearner learner = make_ngram(corpus, options);
  for (const auto& inst : corpus) learner.train_report(inst.report);
  return learner;
}

// Closed-form learner for schedule tests: each curriculum carries a synthetic
// perplexity that is multiplied by `decay` whenever a batch from it is trained.
class AnalyticLearner : public Learner {
 public:
  explicit AnalyticLearner(std::array<double, 4> initial = {10.0, 40.0, 20.0, 30.0},
                           double decay = 0.5)
      : decay_(decay) {
    for (std::size_t i = 0; i < initial.size(); ++i) {
      if (!(initial[i] > 0.0)) throw Error(ErrorKind::usage, "analytic PPL must be positive");
      ppl_[static_cast<CurriculumTag>(i)] = initial[i];
    }
    ppl_[CurriculumTag::fused] = initial[0];
    ppl_[CurriculumTag::single] = initial[0];
    if (!(decay > 0.0 && decay <= 1.0)) throw Error(ErrorKind::usage, "decay must lie in (0,1]");
  }

  void train(const Batch& batch) override { ppl_[batch.curriculum] *= decay_; }

  double ppl(const Batch& batch) const override {
    if (batch.empty()) throw Error(ErrorKind::empty_batch, "perplexity of an empty batch");
    return ppl_.at(batch.curriculum);
  }

  double current(CurriculumTag tag) const { return ppl_.at(tag); }

 private:
  double decay_;
  std::map<CurriculumTag, double> ppl_;
};

}  // namespace curriculum
