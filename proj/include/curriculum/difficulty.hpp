#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "curriculum/corpus.hpp"
#include "curriculum/error.hpp"
#include "curriculum/format.hpp"
#include "curriculum/learner.hpp"
#include "curriculum/metric.hpp"

namespace curriculum {

// The four per-instance difficulties. Larger is harder for every metric.
struct DifficultyScores {
  double d1 = 0.0;  // 1 - mean cosine similarity to normal embeddings, in [0, 2]
  double d2 = 0.0;  // binary entropy summed over the 14 labels, nats
  std::size_t d3 = 0;  // abnormal sentence count
  double d4 = 0.0;  // mean per-token NLL, nats

  double get(Metric m) const {
    switch (m) {
      case Metric::d1: return d1;
      case Metric::d2: return d2;
      case Metric::d3: return static_cast<double>(d3);
      case Metric::d4: return d4;
    }
    return 0.0;
  }

  friend bool operator==(const DifficultyScores&, const DifficultyScores&) = default;
};

struct ScoredInstance {
  std::string id;
  DifficultyScores scores;

  friend bool operator==(const ScoredInstance&, const ScoredInstance&) = default;
};

// ---------------------------------------------------------------------------
// d1: visual heuristic

struct NormalProfile {
  std::vector<double> mean_unit_embedding;
  std::size_t count = 0;
};

namespace detail {

inline double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace detail

// Mean of the L2-normalized embeddings of all normal instances.
inline NormalProfile build_normal_profile(const Corpus& corpus) {
  NormalProfile profile;
  profile.mean_unit_embedding.assign(corpus.embedding_dim(), 0.0);
  for (const auto& inst : corpus) {
    if (!inst.is_normal) continue;
    const double n = detail::norm(inst.embedding);
    for (std::size_t d = 0; d < inst.embedding.size(); ++d) {
      profile.mean_unit_embedding[d] += inst.embedding[d] / n;
    }
    ++profile.count;
  }
  if (profile.count == 0) {
    throw Error(ErrorKind::no_normal_instances, "corpus has no instance with is_normal=true");
  }
  for (auto& x : profile.mean_unit_embedding) x /= static_cast<double>(profile.count);
  return profile;
}

// Dotting the unit embedding with the mean of unit normals equals the mean
// pairwise cosine, so this is O(D) per instance.
inline double visual_heuristic_d1(const TrainingInstance& instance, const NormalProfile& profile) {
  if (instance.embedding.size() != profile.mean_unit_embedding.size()) {
    throw Error(ErrorKind::dimension_mismatch,
                "instance \"" + instance.id + "\" has dimension " +
                    std::to_string(instance.embedding.size()) + ", profile has " +
                    std::to_string(profile.mean_unit_embedding.size()));
  }
  const double n = detail::norm(instance.embedding);
  if (n == 0.0) throw Error(ErrorKind::schema, "instance \"" + instance.id + "\" has zero embedding");
  const double dot = std::inner_product(instance.embedding.begin(), instance.embedding.end(),
                                        profile.mean_unit_embedding.begin(), 0.0);
  return 1.0 - dot / n;
}

// ---------------------------------------------------------------------------
// d2: visual model confidence

namespace detail {

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

// H = -sum_n [p ln p + (1-p) ln(1-p)], with 0 ln 0 = 0.
inline double visual_confidence_d2(const std::array<double, kNumLabels>& label_probs) {
  double h = 0.0;
  for (double p : label_probs) h -= detail::xlogx(p) + detail::xlogx(1.0 - p);
  return h;
}

inline double visual_confidence_d2(const TrainingInstance& instance) {
  return visual_confidence_d2(instance.label_probs);
}

// ---------------------------------------------------------------------------
// d3: textual heuristic

inline std::size_t textual_heuristic_d3(const Report& report) {
  return static_cast<std::size_t>(
      std::count_if(report.sentences.begin(), report.sentences.end(),
                    [](const Sentence& s) { return !is_normal_sentence(s); }));
}

// ---------------------------------------------------------------------------
// d4: textual model confidence

// Precomputed NLL wins; otherwise the oracle's mean per-token NLL.
inline double textual_confidence_d4(const TrainingInstance& instance, const LanguageModel* oracle) {
  if (instance.precomputed_nll) return *instance.precomputed_nll;
  if (oracle == nullptr) {
    throw Error(ErrorKind::no_oracle,
                "instance \"" + instance.id +
                    "\" has no precomputed nll and no oracle model was given (use --oracle ngram)");
  }
  return oracle->mean_nll(instance.report);
}

// ---------------------------------------------------------------------------
// Whole-corpus scoring and ranking

inline std::vector<ScoredInstance> score_corpus(const Corpus& corpus, const NormalProfile& profile,
                                                const LanguageModel* oracle) {
  std::vector<ScoredInstance> rows;
  rows.reserve(corpus.size());
  for (const auto& inst : corpus) {
    ScoredInstance row{inst.id, {}};
    row.scores.d1 = visual_heuristic_d1(inst, profile);
    row.scores.d2 = visual_confidence_d2(inst);
    row.scores.d3 = textual_heuristic_d3(inst.report);
    row.scores.d4 = textual_confidence_d4(inst, oracle);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Easy first; ties by id.
inline std::vector<std::string> rank_by_metric(const std::vector<ScoredInstance>& scores, Metric metric) {
  std::vector<const ScoredInstance*> order;
  order.reserve(scores.size());
  for (const auto& row : scores) order.push_back(&row);
  std::sort(order.begin(), order.end(), [metric](const ScoredInstance* a, const ScoredInstance* b) {
    const double da = a->scores.get(metric);
    const double db = b->scores.get(metric);
    if (da != db) return da < db;
    return a->id < b->id;
  });
  std::vector<std::string> ids;
  ids.reserve(order.size());
  for (const auto* row : order) ids.push_back(row->id);
  return ids;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_scores_csv(std::ostream& out, const std::vector<ScoredInstance>& scores) {
  out << "id,d1,d2,d3,d4\n";
  for (const auto& row : scores) {
    out << row.id << ',' << format_double(row.scores.d1) << ',' << format_double(row.scores.d2)
        << ',' << row.scores.d3 << ',' << format_double(row.scores.d4) << '\n';
  }
}

inline std::vector<ScoredInstance> read_scores_csv(std::istream& in, const std::string& source = "<scores>") {
  std::string line;
  if (!std::getline(in, line) || line != "id,d1,d2,d3,d4") {
    throw Error(ErrorKind::parse, source + ": expected header id,d1,d2,d3,d4");
  }
  std::vector<ScoredInstance> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::array<std::string, 5> fields;
    for (auto& f : fields) {
      if (!std::getline(ss, f, ',')) {
        throw Error(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": expected 5 fields");
      }
    }
    try {
      ScoredInstance row{fields[0], {}};
      row.scores.d1 = std::stod(fields[1]);
      row.scores.d2 = std::stod(fields[2]);
      row.scores.d3 = std::stoul(fields[3]);
      row.scores.d4 = std::stod(fields[4]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

inline void write_rank(std::ostream& out, const std::vector<std::string>& ids) {
  for (const auto& id : ids) out << id << '\n';
}

}  // namespace curriculum
