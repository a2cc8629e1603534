#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

namespace pgl::runtime {

inline constexpr const char* kMetricsHeader =
    "wall_time_s,env_steps,learner_updates,mean_return_20,policy_loss,value_loss,mean_abs_adv,clip_fraction,clamp_count";

struct MetricsRow {
  double wall_time_s = 0.0;
  std::int64_t env_steps = 0;
  std::int64_t learner_updates = 0;
  double mean_return = std::nan("");  // trailing window of completed episodes
  double policy_loss = std::nan("");
  double value_loss = std::nan("");
  double mean_abs_adv = std::nan("");
  double clip_fraction = std::nan("");
  std::int64_t clamp_count = 0;
};

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << format_number(r.wall_time_s) << ',' << r.env_steps << ',' << r.learner_updates << ','
      << format_number(r.mean_return) << ',' << format_number(r.policy_loss) << ',' << format_number(r.value_loss) << ','
      << format_number(r.mean_abs_adv) << ',' << format_number(r.clip_fraction) << ',' << r.clamp_count << '\n';
}

/// Learner statistics accumulated between two metrics rows.
struct UpdateAccumulator {
  std::int64_t updates = 0;
  double policy_loss_sum = 0.0;
  double value_loss_sum = 0.0;
  double abs_adv_sum = 0.0;
  std::int64_t samples = 0;
  std::int64_t clipped = 0;
  std::int64_t clamps = 0;

  void fill(MetricsRow& row) const {
    if (updates > 0) {
      row.policy_loss = policy_loss_sum / static_cast<double>(updates);
      row.value_loss = value_loss_sum / static_cast<double>(updates);
    }
    if (samples > 0) {
      row.mean_abs_adv = abs_adv_sum / static_cast<double>(samples);
      row.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples);
    }
    row.clamp_count = clamps;
  }
};

}  // namespace pgl::runtime
