#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "curriculum/error.hpp"

namespace curriculum {

enum class Metric { d1 = 0, d2 = 1, d3 = 2, d4 = 3 };

inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::d1, Metric::d2,
                                                      Metric::d3, Metric::d4};

inline std::string_view to_string(Metric m) {
  static constexpr std::array<std::string_view, 4> names = {"d1", "d2", "d3",
                                                            "d4"};
  return names[static_cast<int>(m)];
}

inline std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

// Label attached to every emitted batch: which sorted list it came from.
enum class CurriculumTag { d1, d2, d3, d4, fused, single };

inline CurriculumTag tag_of(Metric m) {
  return static_cast<CurriculumTag>(static_cast<int>(m));
}

inline std::string_view to_string(CurriculumTag tag) {
  switch (tag) {
    case CurriculumTag::d1: return "d1";
    case CurriculumTag::d2: return "d2";
    case CurriculumTag::d3: return "d3";
    case CurriculumTag::d4: return "d4";
    case CurriculumTag::fused: return "fused";
    case CurriculumTag::single: return "single";
  }
  return "single";
}

inline CurriculumTag parse_curriculum_tag(std::string_view name) {
  for (auto tag : {CurriculumTag::d1, CurriculumTag::d2, CurriculumTag::d3,
                   CurriculumTag::d4, CurriculumTag::fused,
                   CurriculumTag::single}) {
    if (to_string(tag) == name) return tag;
  }
  throw Error(ErrorKind::parse,
              "unknown curriculum tag '" + std::string(name) + "'");
}

}  // namespace curriculum
