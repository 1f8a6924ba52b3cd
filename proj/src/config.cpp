#include "tracealign/config.hpp"

#include "tracealign/errors.hpp"

namespace tracealign {

namespace {
void check_threshold(const char* name, double v) {
  if (!(v >= -1.0 && v <= 1.0))
    throw ConfigError(std::string(name) + " must lie in [-1, 1], got " + std::to_string(v));
}
}  // namespace

void AnalysisConfig::validate() const {
  if (d < 16) throw ConfigError("d must be >= 16, got " + std::to_string(d));
  check_threshold("theta_seg", theta_seg);
  check_threshold("theta_merge", theta_merge);
  check_threshold("theta_ctx", theta_ctx);
  if (loop_k < 2) throw ConfigError("loop_k must be >= 2, got " + std::to_string(loop_k));
  if (voting_m < 1 || voting_m % 2 == 0)
    throw ConfigError("voting_m must be odd and >= 1, got " + std::to_string(voting_m));
  if (!(failure_share_threshold >= 0.0 && failure_share_threshold <= 1.0))
    throw ConfigError("failure_share_threshold must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const AnalysisConfig& c) {
  j = nlohmann::json{{"d", c.d},
                     {"theta_seg", c.theta_seg},
                     {"theta_merge", c.theta_merge},
                     {"theta_ctx", c.theta_ctx},
                     {"loop_k", c.loop_k},
                     {"voting_m", c.voting_m},
                     {"max_chars", c.max_chars},
                     {"failure_share_threshold", c.failure_share_threshold},
                     {"failure_markers", c.failure_markers},
                     {"success_markers", c.success_markers}};
}

void from_json(const nlohmann::json& j, AnalysisConfig& c) {
  AnalysisConfig def;
  c.d = j.value("d", def.d);
  c.theta_seg = j.value("theta_seg", def.theta_seg);
  c.theta_merge = j.value("theta_merge", def.theta_merge);
  c.theta_ctx = j.value("theta_ctx", def.theta_ctx);
  c.loop_k = j.value("loop_k", def.loop_k);
  c.voting_m = j.value("voting_m", def.voting_m);
  c.max_chars = j.value("max_chars", def.max_chars);
  c.failure_share_threshold = j.value("failure_share_threshold", def.failure_share_threshold);
  c.failure_markers = j.value("failure_markers", def.failure_markers);
  c.success_markers = j.value("success_markers", def.success_markers);
}

}  // namespace tracealign
