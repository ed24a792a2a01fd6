#pragma once

// Implementation of the `curriculum` command-line tool. Kept in the library
// so the subcommands can be driven in-process by tests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curriculum/competence.hpp"
#include "curriculum/config.hpp"
#include "curriculum/corpus.hpp"
#include "curriculum/difficulty.hpp"
#include "curriculum/error.hpp"
#include "curriculum/format.hpp"
#include "curriculum/learner.hpp"
#include "curriculum/metric.hpp"
#include "curriculum/scheduler.hpp"
#include "curriculum/trace.hpp"

namespace curriculum::cli {

namespace detail {

// Resolves one setting: an explicit flag wins over the config file, which
// wins over the built-in default already held in `value`.
template <typename T>
void resolve(T& value, const CLI::Option* flag, const KeyValueConfig& config, const std::string& key) {
  if (flag != nullptr && flag->count() > 0) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = config.get_bool(key)) value = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = config.get_double(key)) value = *v;
  } else if constexpr (std::is_integral_v<T>) {
    if (auto v = config.get_int(key)) {
      if (*v < 0) throw Error(ErrorKind::usage, "config key '" + key + "' must be nonnegative");
      value = static_cast<T>(*v);
    }
  } else {
    if (auto v = config.get_string(key)) value = *v;
  }
}

inline KeyValueConfig load_config(const std::string& path, const std::set<std::string>& keys) {
  if (path.empty()) return {};
  return KeyValueConfig::load(path, keys);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  return out;
}

inline void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error(ErrorKind::io, "failed writing " + path);
}

// "<dir>/<stem>" of an output path, used to name sibling files.
inline std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  return (p.parent_path() / p.stem()).string();
}

struct OracleSettings {
  std::string oracle;  // "" or "ngram"
  NGramOptions ngram;
};

inline std::vector<ScoredInstance> score_with(const Corpus& corpus, const OracleSettings& settings) {
  std::unique_ptr<LanguageModel> oracle;
  if (settings.oracle == "ngram") {
    oracle = std::make_unique<NGramLearner>(fit_ngram_oracle(corpus, settings.ngram));
  } else if (!settings.oracle.empty()) {
    throw Error(ErrorKind::usage, "unknown oracle '" + settings.oracle + "' (expected ngram)");
  }
  return score_corpus(corpus, build_normal_profile(corpus), oracle.get());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen-synthetic

struct GenSyntheticArgs {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::string output;
};

inline void cmd_gen_synthetic(const GenSyntheticArgs& args) {
  Corpus corpus = gen_synthetic(args.config, args.seed);
  auto out = detail::open_output(args.output);
  write_manifest(out, corpus);
  detail::close_output(out, args.output);
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string manifest;
  std::string output;  // CSV; rank files go next to it as <stem>.d1.rank ...
  detail::OracleSettings oracle;
};

inline std::vector<ScoredInstance> cmd_score(const ScoreArgs& args) {
  const Corpus corpus = load_manifest(args.manifest);
  const auto scores = detail::score_with(corpus, args.oracle);
  auto csv = detail::open_output(args.output);
  write_scores_csv(csv, scores);
  detail::close_output(csv, args.output);
  const std::string stem = detail::stem_of(args.output);
  for (Metric m : kAllMetrics) {
    const std::string path = stem + "." + std::string(to_string(m)) + ".rank";
    auto out = detail::open_output(path);
    write_rank(out, rank_by_metric(scores, m));
    detail::close_output(out, path);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string manifest;
  std::string output;
  std::string summary;  // empty: print to stdout
  std::string strategy = "dynamic";
  std::uint64_t n_steps = 1000;
  std::optional<std::uint64_t> T;  // default: quarter of n_steps
  double c0 = 0.01;
  double p = 2.0;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool similar_difficulty_batching = false;
  bool rescore_all_ppl = false;
  std::string scores;  // precomputed scores CSV
  std::string learner = "ngram";
  detail::OracleSettings oracle;
  std::string validation;  // manifest for early stopping
  std::size_t early_stop_every = 0;
  std::size_t patience = 3;
  double epsilon = 1e-3;
};

inline nlohmann::ordered_json cmd_simulate(const SimulateArgs& args) {
  const RouteStrategy strategy = RouteStrategy::parse(args.strategy);
  SchedulerOptions options;
  options.competence.c0 = args.c0;
  options.competence.p = args.p;
  options.competence.T = args.T.value_or(std::max<std::uint64_t>(1, args.n_steps / 4));
  options.batch_size = args.batch_size;
  options.seed = args.seed;
  options.similar_difficulty_batching = args.similar_difficulty_batching;
  options.rescore_all_ppl = args.rescore_all_ppl;
  options.competence.validate();
  if (args.n_steps < 1) throw Error(ErrorKind::usage, "--steps must be >= 1");
  if (args.learner != "ngram" && args.learner != "analytic") {
    throw Error(ErrorKind::usage, "unknown learner '" + args.learner + "' (expected ngram or analytic)");
  }

  const Corpus corpus = load_manifest(args.manifest);
  std::vector<ScoredInstance> scores;
  if (!args.scores.empty()) {
    std::ifstream in(args.scores);
    if (!in) throw Error(ErrorKind::io, "cannot open scores " + args.scores);
    scores = read_scores_csv(in, args.scores);
  } else {
    scores = detail::score_with(corpus, args.oracle);
  }

  std::unique_ptr<Learner> learner;
  const NGramLearner* ngram = nullptr;
  if (args.learner == "ngram") {
    auto model = std::make_unique<NGramLearner>(make_ngram(corpus, args.oracle.ngram));
    ngram = model.get();
    learner = std::move(model);
  } else {
    learner = std::make_unique<AnalyticLearner>();
  }

  std::optional<Corpus> validation_corpus;
  Batch validation;
  EarlyStop early_stop;
  if (args.early_stop_every > 0) {
    validation_corpus = args.validation.empty() ? corpus : load_manifest(args.validation);
    validation = make_batch(*validation_corpus, CurriculumTag::single);
    early_stop = {&validation, args.early_stop_every, args.patience, args.epsilon};
  }

  const ScheduleTrace trace = run(corpus, scores, strategy, options, learner.get(), args.n_steps, early_stop);

  auto out = detail::open_output(args.output);
  write_trace_jsonl(out, trace.rows);
  detail::close_output(out, args.output);

  nlohmann::ordered_json summary;
  summary["strategy"] = strategy.to_string();
  summary["steps"] = trace.rows.size();
  summary["T"] = options.competence.T;
  nlohmann::ordered_json t_counts;
  std::uint64_t total = 0;
  const auto orders = build_orders(corpus, scores, strategy);
  for (std::size_t i = 0; i < trace.final_t.size(); ++i) {
    t_counts[std::string(to_string(orders[i].first))] = trace.final_t[i];
    total += trace.final_t[i];
  }
  summary["t"] = t_counts;
  summary["sum_t"] = total;
  const Batch everything = make_batch(corpus, CurriculumTag::single);
  summary["final_ppl"] = ngram != nullptr ? ngram->mean_report_ppl(everything)
                                          : learner->ppl(everything);
  summary["stopped_early"] = trace.stopped_early;
  if (!trace.validation_ppl.empty()) summary["validation_ppl"] = trace.validation_ppl;
  return summary;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string trace;
  std::string output;     // empty: stdout
  std::string histogram;  // empty: <stem>.histogram.csv when output is a file
  bool check = false;
  std::string strategy;   // optional, enables strategy-specific checks
  std::optional<std::size_t> batch_size;
};

struct ReportResult {
  std::size_t rows = 0;
  std::map<std::string, std::size_t> histogram;
  std::vector<std::string> problems;
};

inline void write_report_csv(std::ostream& out, const std::vector<BatchSpec>& rows) {
  out << "step,curriculum,competence,window,batch_size,ppl\n";
  for (const auto& row : rows) {
    out << row.step << ',' << to_string(row.curriculum) << ',' << format_double(row.competence) << ','
        << row.window << ',' << row.ids.size() << ',' << (row.ppl ? format_double(*row.ppl) : "") << '\n';
  }
}

inline ReportResult cmd_report(const ReportArgs& args, std::ostream& stdout_stream) {
  const auto rows = load_trace(args.trace);
  if (rows.empty()) throw Error(ErrorKind::usage, "trace " + args.trace + " is empty");

  ReportResult result;
  result.rows = rows.size();
  for (const auto& row : rows) ++result.histogram[std::string(to_string(row.curriculum))];

  if (args.check) {
    TraceCheck check;
    if (!args.strategy.empty()) check.strategy = RouteStrategy::parse(args.strategy).kind;
    check.batch_size = args.batch_size;
    result.problems = validate_trace(rows, check);
  }

  if (args.output.empty()) {
    write_report_csv(stdout_stream, rows);
  } else {
    auto out = detail::open_output(args.output);
    write_report_csv(out, rows);
    detail::close_output(out, args.output);
  }
  std::string hist_path = args.histogram;
  if (hist_path.empty() && !args.output.empty()) hist_path = detail::stem_of(args.output) + ".histogram.csv";
  if (!hist_path.empty()) {
    auto out = detail::open_output(hist_path);
    out << "curriculum,count\n";
    for (const auto& [tag, n] : result.histogram) out << tag << ',' << n << '\n';
    detail::close_output(out, hist_path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Competence-based multi-difficulty curriculum scheduler", "curriculum"};
  app.require_subcommand(1);

  // gen-synthetic
  GenSyntheticArgs gen;
  std::string gen_config;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a deterministic synthetic JSONL manifest");
  auto* gen_size = gen_cmd->add_option("--size", gen.config.size, "Number of instances");
  auto* gen_dim = gen_cmd->add_option("--dim", gen.config.dim, "Embedding dimension");
  auto* gen_frac = gen_cmd->add_option("--normal-frac", gen.config.normal_frac, "Fraction of normal instances");
  auto* gen_rate = gen_cmd->add_option("--abnormal-rate", gen.config.abnormal_rate,
                                       "Chance of each extra abnormal finding");
  auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--config", gen_config, "key = value config file");
  gen_cmd->add_option("-o,--output", gen.output, "Manifest path")->required();

  // score
  ScoreArgs score;
  std::string score_config;
  std::uint64_t unused_seed = 0;
  auto* score_cmd = app.add_subcommand("score", "Compute d1..d4 and per-metric rankings");
  score_cmd->add_option("manifest", score.manifest, "Input manifest")->required();
  score_cmd->add_option("-o,--output", score.output, "Scores CSV path")->required();
  auto* score_oracle = score_cmd->add_option("--oracle", score.oracle.oracle, "Reference model for d4 (ngram)");
  auto* score_min = score_cmd->add_option("--min-count", score.oracle.ngram.min_count, "Vocabulary threshold");
  auto* score_k = score_cmd->add_option("--smoothing", score.oracle.ngram.smoothing, "Add-k smoothing");
  score_cmd->add_option("--seed", unused_seed, "Accepted for uniformity; scoring is deterministic");
  score_cmd->add_option("--config", score_config, "key = value config file");

  // simulate
  SimulateArgs sim;
  std::string sim_config;
  std::uint64_t sim_T = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the curriculum scheduler against a built-in learner");
  sim_cmd->add_option("manifest", sim.manifest, "Input manifest")->required();
  sim_cmd->add_option("-o,--output", sim.output, "Trace JSONL path")->required();
  sim_cmd->add_option("--summary", sim.summary, "Summary JSON path (default: stdout)");
  auto* sim_strategy = sim_cmd->add_option("--strategy", sim.strategy,
                                           "single:d1..d4 | dynamic | fuse | random | sequential | shuffled");
  auto* sim_steps = sim_cmd->add_option("--steps", sim.n_steps, "Step budget");
  auto* sim_T_opt = sim_cmd->add_option("--T", sim_T, "Curriculum duration in steps (default: steps/4)");
  auto* sim_c0 = sim_cmd->add_option("--c0", sim.c0, "Initial competence");
  auto* sim_p = sim_cmd->add_option("--p", sim.p, "Competence exponent");
  auto* sim_batch = sim_cmd->add_option("--batch-size", sim.batch_size, "Batch size");
  auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "Random seed");
  auto* sim_similar = sim_cmd->add_flag("--similar-difficulty-batching", sim.similar_difficulty_batching,
                                        "Contiguous batches of similar difficulty");
  auto* sim_rescore = sim_cmd->add_flag("--rescore-all-ppl", sim.rescore_all_ppl,
                                        "Rescore every curriculum before routing");
  sim_cmd->add_option("--scores", sim.scores, "Precomputed scores CSV");
  auto* sim_learner = sim_cmd->add_option("--learner", sim.learner, "ngram | analytic");
  auto* sim_oracle = sim_cmd->add_option("--oracle", sim.oracle.oracle, "Reference model for d4 (ngram)");
  auto* sim_min = sim_cmd->add_option("--min-count", sim.oracle.ngram.min_count, "Vocabulary threshold");
  auto* sim_k = sim_cmd->add_option("--smoothing", sim.oracle.ngram.smoothing, "Add-k smoothing");
  sim_cmd->add_option("--validation", sim.validation, "Validation manifest for early stopping");
  sim_cmd->add_option("--early-stop-every", sim.early_stop_every, "Evaluate every N steps (0: off)");
  sim_cmd->add_option("--patience", sim.patience, "Evaluations without improvement before stopping");
  sim_cmd->add_option("--epsilon", sim.epsilon, "Minimum PPL improvement");
  sim_cmd->add_option("--config", sim_config, "key = value config file");

  // report
  ReportArgs rep;
  std::size_t rep_batch = 0;
  auto* rep_cmd = app.add_subcommand("report", "Plot-ready CSV and invariant check for a trace");
  rep_cmd->add_option("trace", rep.trace, "Trace JSONL")->required();
  rep_cmd->add_option("-o,--output", rep.output, "CSV path (default: stdout)");
  rep_cmd->add_option("--histogram", rep.histogram, "Curriculum histogram CSV path");
  rep_cmd->add_flag("--check", rep.check, "Validate the trace invariants");
  rep_cmd->add_option("--strategy", rep.strategy, "Strategy the trace was produced with");
  auto* rep_batch_opt = rep_cmd->add_option("--batch-size", rep_batch, "Expected batch size");
  rep_cmd->add_option("--seed", unused_seed, "Accepted for uniformity");
  rep_cmd->add_option("--config", score_config, "Accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return 1;
  }

  try {
    if (gen_cmd->parsed()) {
      const auto config = detail::load_config(gen_config, {"size", "dim", "normal_frac", "abnormal_rate", "seed"});
      detail::resolve(gen.config.size, gen_size, config, "size");
      detail::resolve(gen.config.dim, gen_dim, config, "dim");
      detail::resolve(gen.config.normal_frac, gen_frac, config, "normal_frac");
      detail::resolve(gen.config.abnormal_rate, gen_rate, config, "abnormal_rate");
      detail::resolve(gen.seed, gen_seed, config, "seed");
      gen.config.validate();
      cmd_gen_synthetic(gen);
      return 0;
    }
    if (score_cmd->parsed()) {
      const auto config = detail::load_config(score_config, {"oracle", "min_count", "smoothing"});
      detail::resolve(score.oracle.oracle, score_oracle, config, "oracle");
      detail::resolve(score.oracle.ngram.min_count, score_min, config, "min_count");
      detail::resolve(score.oracle.ngram.smoothing, score_k, config, "smoothing");
      const auto scores = cmd_score(score);
      err << "scored " << scores.size() << " instances\n";
      return 0;
    }
    if (sim_cmd->parsed()) {
      const auto config = detail::load_config(
          sim_config, {"strategy", "batch_size", "c0", "p", "T", "n_steps", "seed", "similar_difficulty_batching",
                       "rescore_all_ppl", "learner", "oracle", "min_count", "smoothing"});
      detail::resolve(sim.strategy, sim_strategy, config, "strategy");
      detail::resolve(sim.batch_size, sim_batch, config, "batch_size");
      detail::resolve(sim.c0, sim_c0, config, "c0");
      detail::resolve(sim.p, sim_p, config, "p");
      detail::resolve(sim.n_steps, sim_steps, config, "n_steps");
      detail::resolve(sim.seed, sim_seed, config, "seed");
      detail::resolve(sim.similar_difficulty_batching, sim_similar, config, "similar_difficulty_batching");
      detail::resolve(sim.rescore_all_ppl, sim_rescore, config, "rescore_all_ppl");
      detail::resolve(sim.learner, sim_learner, config, "learner");
      detail::resolve(sim.oracle.oracle, sim_oracle, config, "oracle");
      detail::resolve(sim.oracle.ngram.min_count, sim_min, config, "min_count");
      detail::resolve(sim.oracle.ngram.smoothing, sim_k, config, "smoothing");
      if (sim_T_opt->count() > 0) {
        sim.T = sim_T;
      } else if (auto t = config.get_int("T")) {
        if (*t < 1) throw Error(ErrorKind::usage, "T must be >= 1");
        sim.T = static_cast<std::uint64_t>(*t);
      }
      if (sim.T && *sim.T < 1) throw Error(ErrorKind::usage, "T must be >= 1");
      const auto summary = cmd_simulate(sim);
      if (sim.summary.empty()) {
        out << summary.dump(2) << '\n';
      } else {
        auto file = detail::open_output(sim.summary);
        file << summary.dump(2) << '\n';
        detail::close_output(file, sim.summary);
      }
      return 0;
    }
    if (rep_cmd->parsed()) {
      if (rep_batch_opt->count() > 0) rep.batch_size = rep_batch;
      const auto result = cmd_report(rep, out);
      if (rep.check) {
        for (const auto& p : result.problems) err << "violation: " << p << '\n';
        if (!result.problems.empty()) return 2;
        err << "trace ok: " << result.rows << " rows\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace curriculum::cli
