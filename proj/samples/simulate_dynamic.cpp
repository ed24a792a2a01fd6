// Minimal end-to-end use of the library: synthesize a corpus, score it,
// and run dynamic routing against the bigram learner.

#include <iostream>

#include "curriculum/curriculum.hpp"

int main() {
  using namespace curriculum;

  const Corpus corpus = gen_synthetic({.size = 500, .dim = 32, .normal_frac = 0.8, .abnormal_rate = 0.3}, 7);
  const NGramLearner oracle = fit_ngram_oracle(corpus, {.min_count = 5, .smoothing = 0.1});
  const auto scores = score_corpus(corpus, build_normal_profile(corpus), &oracle);

  SchedulerOptions options;
  options.competence = {.c0 = 0.01, .p = 2.0, .T = 100};
  options.seed = 7;

  NGramLearner learner = make_ngram(corpus, {.min_count = 5, .smoothing = 0.1});
  const ScheduleTrace trace = run(corpus, scores, RouteStrategy::dynamic(), options, &learner, 400);

  for (const auto& row : trace.rows) {
    if (row.step % 50 != 0) continue;
    std::cout << "step " << row.step << "  " << to_string(row.curriculum) << "  c=" << row.competence
              << "  window=" << row.window << "  ppl=" << row.ppl.value_or(0.0) << '\n';
  }
  const char* names[] = {"d1", "d2", "d3", "d4"};
  for (std::size_t i = 0; i < trace.final_t.size(); ++i) {
    std::cout << names[i] << " trained " << trace.final_t[i] << " times\n";
  }
  std::cout << "final mean report PPL: " << learner.mean_report_ppl(make_batch(corpus, CurriculumTag::single))
            << '\n';
}
