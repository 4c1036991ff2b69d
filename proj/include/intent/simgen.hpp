#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace intent::gen {

// Synthetic corpus with a known generative intent model. Per-session intent
// z drives four signal channels of tunable strength: page-transition ORDER
// (forward vs reversed funnel walk, weight temporal_signal), dwell times,
// click rates, and session length. Page-visit counts carry no intent signal
// by construction: both transition matrices are doubly stochastic with a
// uniform stationary distribution, so at temporal_signal = 0 the two
// intents generate identically distributed event multisets.
struct GenConfig {
  int n_users = 13334;
  double sessions_per_user_mean = 1.5;  // geometric, support >= 1
  int page_categories = 8;              // >= 7; first four form the funnel
  int click_fields = 6;                 // >= 3; first two are intent-bearing
  double prevalence = 0.13;
  double temporal_signal = 0.8;  // lambda in [0, 1]
  std::uint64_t seed = 1;

  // secondary shape knobs
  double demographic_odds_ratio = 2.0;
  double length_mean_low = 3.7;   // extra pageviews beyond 2, z = 0
  double length_mean_high = 4.45; // z = 1
  double dwell_log_mean = 3.2189; // ln 25
  double dwell_log_shift = 0.05;  // added for z = 1
  double dwell_log_sd = 0.6;
  double click_rate_low = 0.06;   // intent fields, z = 0
  double click_rate_high = 0.28;  // intent fields, z = 1
  double click_rate_noise = 0.10; // remaining fields, both intents
};

struct Generated {
  std::string clicks_jsonl;
  std::string demographics_jsonl;
  std::string labels_jsonl;
  int n_sessions = 0;
  int n_positive = 0;
};

// Fully deterministic in the seed; emits byte-identical output on repeat
// runs. The purchase pageview (url /shop/confirm) is appended to positive
// sessions and is what the labeling stage matches and censors.
Generated generate(const GenConfig& config);

// The per-intent page transition matrix at the config's temporal_signal;
// exposed so tests can check the order-signal construction directly.
Eigen::MatrixXd transition_matrix(const GenConfig& config, int intent);

// P(z = 1 | informative demographic bit) solved from the prevalence and
// odds-ratio constraints; {p0, p1}.
std::pair<double, double> intent_rates(double prevalence, double odds_ratio);

inline const char* kPurchaseUrl = "/shop/confirm";
inline const char* kPurchaseMatcherSpec = "url:/shop/confirm";

}  // namespace intent::gen
