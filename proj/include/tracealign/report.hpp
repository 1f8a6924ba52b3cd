#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tracealign/session.hpp"

namespace tracealign {

struct DivergenceReport {
  std::string markdown;
  nlohmann::json document;
};

// Requires an evaluated session. Output depends only on session state.
DivergenceReport build_report(const Session& s);

}  // namespace tracealign
