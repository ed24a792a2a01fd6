#pragma once

#include <stdexcept>
#include <string>

namespace curriculum {

enum class ErrorKind {
  usage,
  parse,
  schema,
  empty_after_normalization,
  no_normal_instances,
  dimension_mismatch,
  no_oracle,
  score_missing,
  batch_larger_than_corpus,
  strategy_mismatch,
  missing_learner,
  empty_batch,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "UsageError";
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::schema: return "SchemaError";
    case ErrorKind::empty_after_normalization: return "EmptyAfterNormalization";
    case ErrorKind::no_normal_instances: return "NoNormalInstances";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::no_oracle: return "NoOracle";
    case ErrorKind::score_missing: return "ScoreMissing";
    case ErrorKind::batch_larger_than_corpus: return "BatchLargerThanCorpus";
    case ErrorKind::strategy_mismatch: return "StrategyMismatch";
    case ErrorKind::missing_learner: return "MissingLearner";
    case ErrorKind::empty_batch: return "EmptyBatch";
    case ErrorKind::io: return "IOError";
  }
  return "Error";
}

// Every failure raised by the library carries a kind so the CLI can map it
// onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// 0 ok, 1 usage, 2 data/schema, 3 runtime.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::no_oracle:
    case ErrorKind::missing_learner:
      return 1;
    case ErrorKind::parse:
    case ErrorKind::schema:
    case ErrorKind::empty_after_normalization:
    case ErrorKind::no_normal_instances:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::score_missing:
    case ErrorKind::batch_larger_than_corpus:
      return 2;
    case ErrorKind::strategy_mismatch:
    case ErrorKind::empty_batch:
    case ErrorKind::io:
      return 3;
  }
  return 3;
}

}  // namespace curriculum
