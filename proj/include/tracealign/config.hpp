#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tracealign {

struct AnalysisConfig {
  std::size_t d = 256;
  double theta_seg = 0.55;
  double theta_merge = 0.80;
  double theta_ctx = 0.75;
  int loop_k = 3;
  int voting_m = 1;
  std::size_t max_chars = 0;  // 0 = embed full content
  double failure_share_threshold = 0.75;
  std::vector<std::string> failure_markers = {"error", "failed", "unable", "blocked"};
  std::vector<std::string> success_markers = {"success", "completed", "retrieved"};

  // Throws ConfigError on any out-of-range field.
  void validate() const;
  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

void to_json(nlohmann::json& j, const AnalysisConfig& c);
void from_json(const nlohmann::json& j, AnalysisConfig& c);

}  // namespace tracealign
