#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "curriculum/error.hpp"
#include "curriculum/random.hpp"

namespace curriculum {

inline constexpr std::size_t kNumLabels = 14;

// ---------------------------------------------------------------------------
// Reports

using Sentence = std::vector<std::string>;

struct Report {
  std::vector<Sentence> sentences;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  // Sentences concatenated in order.
  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    out.reserve(token_count());
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  // "tok tok. tok tok." -- normalizes back to the same report.
  std::string to_text() const {
    std::string text;
    for (const auto& s : sentences) {
      if (!text.empty()) text += ' ';
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) text += ' ';
        text += s[i];
      }
      text += '.';
    }
    return text;
  }

  friend bool operator==(const Report&, const Report&) = default;
};

namespace detail {

inline bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_token_separator(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0 || c == ',' ||
         c == ';' || c == ':' || c == '(' || c == ')' || c == '"';
}

inline bool is_alpha_token(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  });
}

}  // namespace detail

// Splits on '.', '!', '?', tokenizes on whitespace and light punctuation,
// lowercases, and drops every token that still contains a non-letter.
inline Report normalize_report(std::string_view raw_text) {
  Report report;
  Sentence current;
  std::string token;
  auto flush_token = [&] {
    if (detail::is_alpha_token(token)) {
      std::transform(token.begin(), token.end(), token.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      current.push_back(token);
    }
    token.clear();
  };
  auto flush_sentence = [&] {
    flush_token();
    if (!current.empty()) report.sentences.push_back(std::move(current));
    current.clear();
  };
  for (char c : raw_text) {
    if (detail::is_sentence_end(c)) {
      flush_sentence();
    } else if (detail::is_token_separator(c)) {
      flush_token();
    } else {
      token += c;
    }
  }
  flush_sentence();
  if (report.sentences.empty()) {
    throw Error(ErrorKind::empty_after_normalization,
                "no alphabetic token in report text");
  }
  return report;
}

inline const std::array<std::string_view, 4>& normal_keywords() {
  static constexpr std::array<std::string_view, 4> keywords = {"no", "normal",
                                                               "clear", "stable"};
  return keywords;
}

// Exact whole-token match against the four normal keywords.
inline bool is_normal_sentence(const Sentence& sentence) {
  const auto& keywords = normal_keywords();
  return std::any_of(sentence.begin(), sentence.end(), [&](const std::string& t) {
    return std::find(keywords.begin(), keywords.end(), t) != keywords.end();
  });
}

// ---------------------------------------------------------------------------
// Instances and corpus

struct TrainingInstance {
  std::string id;
  std::vector<double> embedding;
  std::array<double, kNumLabels> label_probs{};
  Report report;
  bool is_normal = false;
  std::optional<double> precomputed_nll;
};

// Validated, immutable collection of instances sharing one embedding size.
class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<TrainingInstance> instances)
      : instances_(std::move(instances)) {
    if (instances_.empty()) {
      throw Error(ErrorKind::schema, "corpus must contain at least one instance");
    }
    embedding_dim_ = instances_.front().embedding.size();
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      validate(inst);
      if (!index_.emplace(inst.id, i).second) {
        throw Error(ErrorKind::schema, "duplicate id \"" + inst.id + "\"");
      }
    }
  }

  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  std::size_t embedding_dim() const { return embedding_dim_; }

  const std::vector<TrainingInstance>& instances() const { return instances_; }
  const TrainingInstance& operator[](std::size_t i) const { return instances_[i]; }

  auto begin() const { return instances_.begin(); }
  auto end() const { return instances_.end(); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void validate(const TrainingInstance& inst) const {
    const std::string who = "instance \"" + inst.id + "\": ";
    if (inst.id.empty()) throw Error(ErrorKind::schema, "instance with empty id");
    if (inst.embedding.size() != embedding_dim_ || embedding_dim_ == 0) {
      throw Error(ErrorKind::schema,
                  who + "embedding dimension " + std::to_string(inst.embedding.size()) +
                      " does not match corpus dimension " +
                      std::to_string(embedding_dim_));
    }
    double norm2 = 0.0;
    for (double x : inst.embedding) {
      if (!std::isfinite(x)) throw Error(ErrorKind::schema, who + "non-finite embedding");
      norm2 += x * x;
    }
    if (norm2 == 0.0) throw Error(ErrorKind::schema, who + "embedding has zero norm");
    for (double p : inst.label_probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::schema, who + "label_probs entry outside [0,1]");
      }
    }
    if (inst.report.sentences.empty()) {
      throw Error(ErrorKind::schema, who + "empty report");
    }
    if (inst.precomputed_nll &&
        !(std::isfinite(*inst.precomputed_nll) && *inst.precomputed_nll >= 0.0)) {
      throw Error(ErrorKind::schema, who + "nll must be a nonnegative finite number");
    }
  }

  std::vector<TrainingInstance> instances_;
  std::size_t embedding_dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static constexpr std::size_t kBegin = 1;
  static constexpr std::size_t kEnd = 2;

  static constexpr std::string_view kUnknownToken = "<unk>";
  static constexpr std::string_view kBeginToken = "<bos>";
  static constexpr std::string_view kEndToken = "<eos>";

  Vocabulary() {
    add(std::string(kUnknownToken), 0);
    add(std::string(kBeginToken), 0);
    add(std::string(kEndToken), 0);
  }

  // Appends a token; returns its index. Re-adding returns the existing index.
  std::size_t add(const std::string& token, std::size_t frequency = 0) {
    auto [it, inserted] = index_.emplace(token, tokens_.size());
    if (inserted) {
      tokens_.push_back(token);
      frequency_.push_back(frequency);
    }
    return it->second;
  }

  std::size_t size() const { return tokens_.size(); }

  bool contains(std::string_view token) const { return index_.find(token) != index_.end(); }

  std::size_t index(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }

  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Corpus frequency recorded at build time. For the unknown token this is
  // the total count of tokens that fell below the threshold.
  std::size_t frequency(std::size_t i) const { return frequency_.at(i); }
  void set_unknown_frequency(std::size_t n) { frequency_[kUnknown] = n; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> frequency_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Tokens seen at least `min_count` times get an index, by descending
// frequency with lexicographic tie-break. Everything else maps to <unk>.
inline Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_count) {
  if (corpus.empty()) throw Error(ErrorKind::schema, "cannot build vocabulary of empty corpus");
  if (min_count == 0) throw Error(ErrorKind::usage, "min_count must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& inst : corpus) {
    for (const auto& sentence : inst.report.sentences) {
      for (const auto& tok : sentence) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  std::size_t unknown = 0;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) {
      kept.emplace_back(tok, n);
    } else {
      unknown += n;
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [tok, n] : kept) vocab.add(tok, n);
  vocab.set_unknown_frequency(unknown);
  return vocab;
}

// ---------------------------------------------------------------------------
// Manifest (JSONL)

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           const std::string& who) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::schema, who + ": missing field \"" + key + "\"");
  }
  return *it;
}

inline std::vector<double> number_array(const nlohmann::json& value, const char* key,
                                        const std::string& who) {
  if (!value.is_array()) {
    throw Error(ErrorKind::schema, who + ": field \"" + key + "\" must be an array");
  }
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) {
      throw Error(ErrorKind::schema, who + ": field \"" + key + "\" must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// Parses one manifest record. `line_no` is only used in messages.
inline TrainingInstance parse_manifest_record(const std::string& line, std::size_t line_no,
                                              const std::string& source = "<manifest>") {
  const std::string where = source + ":" + std::to_string(line_no);
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, where + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw Error(ErrorKind::parse, where + ": expected a JSON object");

  const auto& id_field = detail::require_field(obj, "id", where);
  if (!id_field.is_string()) throw Error(ErrorKind::schema, where + ": \"id\" must be a string");
  TrainingInstance inst;
  inst.id = id_field.get<std::string>();
  const std::string who = where + ": id \"" + inst.id + "\"";

  inst.embedding =
      detail::number_array(detail::require_field(obj, "embedding", who), "embedding", who);
  auto probs =
      detail::number_array(detail::require_field(obj, "label_probs", who), "label_probs", who);
  if (probs.size() != kNumLabels) {
    throw Error(ErrorKind::schema, who + ": label_probs has length " +
                                       std::to_string(probs.size()) + ", expected 14");
  }
  std::copy(probs.begin(), probs.end(), inst.label_probs.begin());

  const auto& report = detail::require_field(obj, "report", who);
  if (!report.is_string()) throw Error(ErrorKind::schema, who + ": \"report\" must be a string");
  try {
    inst.report = normalize_report(report.get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorKind::schema, who + ": report is empty after normalization");
  }

  if (auto it = obj.find("is_normal"); it != obj.end()) {
    if (!it->is_boolean()) throw Error(ErrorKind::schema, who + ": \"is_normal\" must be a bool");
    inst.is_normal = it->get<bool>();
  } else {
    inst.is_normal = std::none_of(inst.report.sentences.begin(), inst.report.sentences.end(),
                                  [](const Sentence& s) { return !is_normal_sentence(s); });
  }
  if (auto it = obj.find("nll"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) throw Error(ErrorKind::schema, who + ": \"nll\" must be a number");
    inst.precomputed_nll = it->get<double>();
  }
  return inst;
}

inline Corpus parse_manifest(std::istream& in, const std::string& source = "<manifest>") {
  std::vector<TrainingInstance> instances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    instances.push_back(parse_manifest_record(line, line_no, source));
  }
  if (instances.empty()) throw Error(ErrorKind::schema, source + ": manifest has no records");
  try {
    return Corpus(std::move(instances));
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.what());
  }
}

inline Corpus load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path);
  return parse_manifest(in, path);
}

inline void write_manifest(std::ostream& out, const Corpus& corpus) {
  for (const auto& inst : corpus) {
    nlohmann::ordered_json obj;
    obj["id"] = inst.id;
    obj["embedding"] = inst.embedding;
    obj["label_probs"] = inst.label_probs;
    obj["report"] = inst.report.to_text();
    obj["is_normal"] = inst.is_normal;
    if (inst.precomputed_nll) obj["nll"] = *inst.precomputed_nll;
    out << obj.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
  std::size_t size = 200;
  std::size_t dim = 32;
  double normal_frac = 0.8;
  // Chance that each extra finding slot of an abnormal report is filled.
  double abnormal_rate = 0.3;

  void validate() const {
    if (size == 0) throw Error(ErrorKind::usage, "synthetic size must be positive");
    if (dim == 0) throw Error(ErrorKind::usage, "synthetic dim must be positive");
    if (!(normal_frac >= 0.0 && normal_frac <= 1.0)) {
      throw Error(ErrorKind::usage, "normal_frac must lie in [0,1]");
    }
    if (!(abnormal_rate >= 0.0 && abnormal_rate <= 1.0)) {
      throw Error(ErrorKind::usage, "abnormal_rate must lie in [0,1]");
    }
  }
};

namespace detail {

// Every template contains at least one of no/normal/clear/stable.
inline const std::vector<std::string_view>& normal_sentence_pool() {
  static const std::vector<std::string_view> pool = {
      "the lungs are clear",
      "lungs are clear bilaterally",
      "no pleural effusion or pneumothorax",
      "no pneumothorax",
      "no focal consolidation",
      "no acute cardiopulmonary abnormality",
      "heart size is normal",
      "the heart is normal in size",
      "the cardiomediastinal silhouette is normal",
      "the mediastinum is stable",
      "stable appearance of the chest",
      "osseous structures are normal",
      "pulmonary vasculature is normal",
      "no acute bony abnormality",
  };
  return pool;
}

inline const std::vector<std::string_view>& finding_pool() {
  static const std::vector<std::string_view> pool = {
      "atelectasis",  "opacity",       "granuloma",   "nodule",
      "consolidation", "scarring",     "calcification", "emphysema",
      "effusion",     "infiltrate",    "fibrosis",    "bronchiectasis",
      "hyperinflation", "cardiomegaly", "edema",      "pneumonia",
  };
  return pool;
}

inline const std::vector<std::string_view>& severity_pool() {
  static const std::vector<std::string_view> pool = {"mild", "moderate", "small",
                                                     "large", "patchy", "subtle",
                                                     "focal", "minimal"};
  return pool;
}

inline const std::vector<std::string_view>& location_pool() {
  static const std::vector<std::string_view> pool = {
      "left lower lobe", "right lower lobe", "right middle lobe", "left upper lobe",
      "right upper lobe", "lingula",        "left base",         "right base",
      "right costophrenic angle", "left costophrenic angle", "retrocardiac region",
      "perihilar region"};
  return pool;
}

template <typename Pool>
std::string_view pick(const Pool& pool, Rng& rng) {
  return pool[rng.uniform_index(pool.size())];
}

}  // namespace detail

// Deterministic desk-scale corpus. Normal instances sit in a tight cluster
// around a shared centre and describe only normal findings; abnormal ones are
// pushed away from the centre in proportion to their number of findings and
// carry at least one sentence built from the rare finding vocabulary.
// Only arithmetic on raw generator words is used, so output is bit-identical
// across platforms.
inline Corpus gen_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);

  const auto n_normal = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.size) * config.normal_frac));
  std::vector<bool> normal_flags(config.size, false);
  std::fill(normal_flags.begin(), normal_flags.begin() + static_cast<std::ptrdiff_t>(n_normal), true);
  rng.shuffle(normal_flags);

  std::vector<double> centre(config.dim);
  for (auto& c : centre) c = rng.uniform(0.5, 1.5);

  const std::size_t width = std::max<std::size_t>(4, std::to_string(config.size - 1).size());
  std::vector<TrainingInstance> instances;
  instances.reserve(config.size);
  for (std::size_t i = 0; i < config.size; ++i) {
    TrainingInstance inst;
    std::string number = std::to_string(i);
    inst.id = "syn-" + std::string(width - number.size(), '0') + number;
    inst.is_normal = normal_flags[i];

    std::size_t findings = 0;
    if (!inst.is_normal) {
      findings = 1;
      for (int extra = 0; extra < 3; ++extra) {
        if (rng.bernoulli(config.abnormal_rate)) ++findings;
      }
    }

    // Embedding.
    inst.embedding.resize(config.dim);
    const double spread = 0.15;
    const double displacement = 0.6 * static_cast<double>(findings);
    for (std::size_t d = 0; d < config.dim; ++d) {
      inst.embedding[d] = centre[d] + spread * rng.uniform(-1.0, 1.0) +
                          displacement * rng.uniform(-1.0, 1.0);
    }

    // Label probabilities: near-certain negatives, uncertain positives.
    for (auto& p : inst.label_probs) p = 0.03 * rng.uniform01();
    for (std::size_t f = 0; f < findings; ++f) {
      inst.label_probs[rng.uniform_index(kNumLabels)] = rng.uniform(0.3, 0.9);
    }

    // Report.
    const std::size_t n_normal_sentences =
        inst.is_normal ? 3 + rng.uniform_index(3) : 2 + rng.uniform_index(3);
    std::vector<Sentence> sentences;
    for (std::size_t s = 0; s < n_normal_sentences; ++s) {
      sentences.push_back(normalize_report(detail::pick(detail::normal_sentence_pool(), rng))
                              .sentences.front());
    }
    for (std::size_t f = 0; f < findings; ++f) {
      std::string text = std::string(detail::pick(detail::severity_pool(), rng)) + " " +
                         std::string(detail::pick(detail::finding_pool(), rng)) + " in the " +
                         std::string(detail::pick(detail::location_pool(), rng));
      Sentence abnormal = normalize_report(text).sentences.front();
      auto pos = static_cast<std::ptrdiff_t>(rng.uniform_index(sentences.size() + 1));
      sentences.insert(sentences.begin() + pos, std::move(abnormal));
    }
    inst.report.sentences = std::move(sentences);
    instances.push_back(std::move(inst));
  }
  return Corpus(std::move(instances));
}

}  // namespace curriculum
