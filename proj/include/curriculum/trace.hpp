#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "curriculum/competence.hpp"
#include "curriculum/error.hpp"
#include "curriculum/metric.hpp"
#include "curriculum/scheduler.hpp"

namespace curriculum {

// ---------------------------------------------------------------------------
// JSONL

inline nlohmann::ordered_json to_json(const BatchSpec& spec) {
  nlohmann::ordered_json obj;
  obj["step"] = spec.step;
  obj["curriculum"] = std::string(to_string(spec.curriculum));
  obj["competence"] = spec.competence;
  obj["window"] = spec.window;
  obj["ids"] = spec.ids;
  obj["ppl"] = spec.ppl ? nlohmann::ordered_json(*spec.ppl) : nlohmann::ordered_json(nullptr);
  return obj;
}

inline void write_trace_jsonl(std::ostream& out, const std::vector<BatchSpec>& rows) {
  for (const auto& row : rows) out << to_json(row).dump() << '\n';
}

inline std::vector<BatchSpec> read_trace_jsonl(std::istream& in, const std::string& source = "<trace>") {
  std::vector<BatchSpec> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      const auto obj = nlohmann::json::parse(line);
      BatchSpec spec;
      spec.step = obj.at("step").get<std::uint64_t>();
      spec.curriculum = parse_curriculum_tag(obj.at("curriculum").get<std::string>());
      spec.competence = obj.at("competence").get<double>();
      spec.window = obj.at("window").get<std::size_t>();
      spec.ids = obj.at("ids").get<std::vector<std::string>>();
      const auto& ppl = obj.at("ppl");
      if (!ppl.is_null()) spec.ppl = ppl.get<double>();
      rows.push_back(std::move(spec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, where + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<BatchSpec> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open trace " + path);
  return read_trace_jsonl(in, path);
}

// ---------------------------------------------------------------------------
// Invariant checks

// What the checker knows besides the trace itself. Each optional piece
// switches on the checks that depend on it.
struct TraceCheck {
  std::optional<StrategyKind> strategy;
  std::optional<std::size_t> batch_size;
  // Sorted id list for each curriculum tag; enables the in-window check.
  std::map<CurriculumTag, std::vector<std::string>> orders;
  // With `orders`, enables recomputing competence and window per visit.
  std::optional<CompetenceParams> competence;
  // Final per-curriculum step counters, in slot order.
  std::optional<std::vector<std::uint64_t>> final_t;
  // Off when PPLs were rescored for all curricula before each routing
  // decision; the argmax check then needs values the trace does not hold.
  bool literal_ppl_cache = true;
};

// Returns one message per violated invariant; empty means the trace is valid.
inline std::vector<std::string> validate_trace(const std::vector<BatchSpec>& rows, const TraceCheck& check) {
  std::vector<std::string> problems;
  auto fail = [&](std::size_t row, const std::string& what) {
    problems.push_back("step " + std::to_string(rows[row].step) + ": " + what);
  };

  std::map<CurriculumTag, std::size_t> visits;
  std::map<CurriculumTag, const BatchSpec*> previous;
  std::map<CurriculumTag, std::unordered_map<std::string, std::size_t>> positions;
  for (const auto& [tag, order] : check.orders) {
    auto& pos = positions[tag];
    for (std::size_t i = 0; i < order.size(); ++i) pos.emplace(order[i], i);
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const BatchSpec& row = rows[r];
    if (row.step != r + 1) fail(r, "expected step " + std::to_string(r + 1));
    if (row.ids.empty()) fail(r, "empty batch");
    if (std::set<std::string>(row.ids.begin(), row.ids.end()).size() != row.ids.size()) {
      fail(r, "duplicate ids in batch");
    }
    if (row.ids.size() > row.window) fail(r, "batch larger than its window");
    if (check.batch_size && row.ids.size() != *check.batch_size) fail(r, "wrong batch size");
    if (!(row.competence > 0.0 && row.competence <= 1.0)) fail(r, "competence outside (0,1]");

    if (auto it = previous.find(row.curriculum); it != previous.end()) {
      if (row.window < it->second->window) fail(r, "window shrank for its curriculum");
      if (row.competence < it->second->competence) fail(r, "competence decreased for its curriculum");
    }
    previous[row.curriculum] = &row;

    if (auto it = positions.find(row.curriculum); it != positions.end()) {
      for (const auto& id : row.ids) {
        auto p = it->second.find(id);
        if (p == it->second.end()) {
          fail(r, "id " + id + " not in curriculum order");
        } else if (p->second >= row.window) {
          fail(r, "id " + id + " outside window");
        }
      }
      const bool recompute = check.competence && check.batch_size &&
                             check.strategy != StrategyKind::shuffled;
      if (recompute) {
        const std::size_t k = visits[row.curriculum];
        const double c = curriculum::competence(k, *check.competence);
        const std::size_t n = check.orders.at(row.curriculum).size();
        if (std::abs(c - row.competence) > 1e-12) fail(r, "competence does not match schedule");
        if (window_size(c, n, *check.batch_size) != row.window) fail(r, "window does not match schedule");
      }
    }
    ++visits[row.curriculum];
  }

  const bool multi_tags = std::all_of(rows.begin(), rows.end(), [](const BatchSpec& b) {
    return b.curriculum != CurriculumTag::fused && b.curriculum != CurriculumTag::single;
  });
  if (check.strategy) {
    switch (*check.strategy) {
      case StrategyKind::dynamic:
      case StrategyKind::random:
      case StrategyKind::sequential:
        if (!multi_tags) problems.push_back("multi-curriculum trace contains fused/single rows");
        break;
      case StrategyKind::fuse:
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].curriculum != CurriculumTag::fused) fail(r, "expected curriculum fused");
        }
        break;
      case StrategyKind::single:
      case StrategyKind::shuffled:
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].curriculum != CurriculumTag::single) fail(r, "expected curriculum single");
        }
        break;
    }
  }

  if (check.strategy == StrategyKind::sequential) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].curriculum != tag_of(kAllMetrics[r % 4])) fail(r, "breaks the d1,d2,d3,d4 cycle");
    }
  }

  // Between two visits a curriculum's cached PPL does not change, so the PPL
  // recorded at its next emission is the value the router saw at every
  // intermediate step.
  if (check.strategy == StrategyKind::dynamic && check.literal_ppl_cache) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].ppl) {
        fail(r, "dynamic row without ppl");
        continue;
      }
      const double chosen = *rows[r].ppl;
      const int chosen_rank = static_cast<int>(rows[r].curriculum);
      std::set<CurriculumTag> seen{rows[r].curriculum};
      for (std::size_t later = r + 1; later < rows.size() && seen.size() < 4; ++later) {
        const CurriculumTag other = rows[later].curriculum;
        if (!seen.insert(other).second || !rows[later].ppl) continue;
        const double cached = *rows[later].ppl;
        const bool beats = cached > chosen || (cached == chosen && static_cast<int>(other) < chosen_rank);
        if (beats) {
          fail(r, "routed to " + std::string(to_string(rows[r].curriculum)) + " but " +
                      std::string(to_string(other)) + " had a higher cached PPL");
        }
      }
    }
  }

  if (check.final_t) {
    std::uint64_t total = 0;
    for (auto t : *check.final_t) total += t;
    if (total != rows.size()) {
      problems.push_back("sum of per-curriculum steps " + std::to_string(total) +
                         " != trace length " + std::to_string(rows.size()));
    }
    if (check.final_t->size() == 4 && multi_tags) {
      for (std::size_t i = 0; i < 4; ++i) {
        const auto tag = tag_of(kAllMetrics[i]);
        const std::size_t seen = visits.contains(tag) ? visits.at(tag) : 0;
        if ((*check.final_t)[i] != seen) {
          problems.push_back("t_" + std::to_string(i + 1) + " = " + std::to_string((*check.final_t)[i]) +
                             " but the trace has " + std::to_string(seen) + " " +
                             std::string(to_string(tag)) + " rows");
        }
      }
    }
  }
  return problems;
}

}  // namespace curriculum
