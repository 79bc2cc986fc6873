/**
 * @file scheme.hpp
 * @brief Scheme identifiers shared by the steppers, the driver and the stability lab.
 */
#pragma once

#include "taylor_ode/core.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace taylor_ode {

enum class SchemeId {
  ExplT1,
  ExplT2,
  SiT1,
  SiT2,
  IT1,
  IT2,
  ImexRk21,
};

inline constexpr std::array<SchemeId, 7> kAllSchemes = {
    SchemeId::ExplT1, SchemeId::ExplT2, SchemeId::SiT1,     SchemeId::SiT2,
    SchemeId::IT1,    SchemeId::IT2,    SchemeId::ImexRk21,
};

/// Schemes with an embedded companion, i.e. usable by the adaptive driver.
inline constexpr std::array<SchemeId, 5> kAdaptiveSchemes = {
    SchemeId::SiT1, SchemeId::SiT2, SchemeId::IT1, SchemeId::IT2, SchemeId::ImexRk21,
};

[[nodiscard]] constexpr std::string_view to_string(SchemeId id) {
  switch (id) {
    case SchemeId::ExplT1: return "EXPL_T1";
    case SchemeId::ExplT2: return "EXPL_T2";
    case SchemeId::SiT1: return "SI_T1";
    case SchemeId::SiT2: return "SI_T2";
    case SchemeId::IT1: return "I_T1";
    case SchemeId::IT2: return "I_T2";
    case SchemeId::ImexRk21: return "IMEX_RK21";
  }
  return "?";
}

/// Accepts the canonical names plus the hyphenated forms ("SI-T-1", "IMEX-RK(2,1)"), case-insensitive.
[[nodiscard]] inline std::optional<SchemeId> parse_scheme(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || c == '(' || c == ')' || c == ',') continue;
    key.push_back(static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c));
  }
  for (SchemeId id : kAllSchemes) {
    std::string canon;
    for (char c : to_string(id)) {
      if (c != '_') canon.push_back(c);
    }
    if (key == canon) return id;
  }
  return std::nullopt;
}

/// Nominal order of accuracy.
[[nodiscard]] constexpr int nominal_order(SchemeId id) {
  switch (id) {
    case SchemeId::ExplT1:
    case SchemeId::SiT1:
    case SchemeId::IT1: return 1;
    default: return 2;
  }
}

}  // namespace taylor_ode
