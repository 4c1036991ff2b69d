#include "intent/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <vector>

#include "intent/errors.hpp"
#include "intent/rng.hpp"
#include "intent/sessions.hpp"

namespace intent::gen {

namespace {

void validate(const GenConfig& c) {
  if (c.n_users <= 0) throw ConfigError("n_users must be positive");
  if (c.sessions_per_user_mean < 1.0) throw ConfigError("sessions per user mean must be >= 1");
  if (c.page_categories < 7) throw ConfigError("need at least 7 page categories");
  if (c.click_fields < 3) throw ConfigError("need at least 3 click fields");
  if (c.prevalence <= 0.0 || c.prevalence >= 1.0) throw ConfigError("prevalence must lie in (0, 1)");
  if (c.temporal_signal < 0.0 || c.temporal_signal > 1.0) {
    throw ConfigError("temporal signal strength must lie in [0, 1]");
  }
  if (c.demographic_odds_ratio < 1.0) throw ConfigError("odds ratio must be >= 1");
  if (c.click_rate_low <= 0.0 || c.click_rate_high >= 1.0 ||
      c.click_rate_low > c.click_rate_high) {
    throw ConfigError("click rates infeasible");
  }
}

// Forward funnel walk: circulant, so rows and columns both sum to one and
// the stationary distribution is uniform. The backward chain is its
// transpose - same stationary distribution, opposite order.
Eigen::MatrixXd forward_chain(int n) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  // soft forward bias: every nearby offset keeps some mass, so a single
  // observed transition is weak evidence and only the accumulated order
  // signal separates the intents
  for (int i = 0; i < n; ++i) {
    T(i, i) += 0.20;
    T(i, (i + 1) % n) += 0.24;
    T(i, (i + 2) % n) += 0.17;
    T(i, (i + 3) % n) += 0.12;
    T(i, (i + n - 1) % n) += 0.14;
    T(i, (i + n - 2) % n) += 0.08;
    T(i, (i + n - 3) % n) += 0.05;
  }
  return T;
}

std::string page_url(const GenConfig& c, int cat) {
  static const char* funnel[4] = {"/shop/landing", "/shop/products", "/shop/quote",
                                  "/shop/checkout"};
  if (cat < 4) return funnel[cat];
  (void)c;
  return "/info/c" + std::to_string(cat);
}

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  double u = rng.unit();
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

// Pages a click field can fire on. Fields 0 and 1 sit on the funnel's
// middle pages; the rest are spread over the whole site.
std::vector<int> field_pages(const GenConfig& c, int field) {
  if (field == 0) return {1, 2};
  if (field == 1) return {2, 3};
  std::vector<int> pages;
  for (int k = 0; k < 3; ++k) pages.push_back((field * 3 + k) % c.page_categories);
  std::sort(pages.begin(), pages.end());
  pages.erase(std::unique(pages.begin(), pages.end()), pages.end());
  return pages;
}

struct LineBuf {
  std::string out;

  void add(const char* fmt, ...) __attribute__((format(printf, 2, 3))) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    out += buf;
  }
};

}  // namespace

std::pair<double, double> intent_rates(double prevalence, double odds_ratio) {
  // With P(bit) = 1/2: solve 2*rho*(1-pi) r^2 + (rho+1)(1-2 pi) r - 2 pi = 0
  // for the low-group odds r; the high group has odds rho*r.
  const double pi = prevalence, rho = odds_ratio;
  const double a = 2.0 * rho * (1.0 - pi);
  const double b = (rho + 1.0) * (1.0 - 2.0 * pi);
  const double c = -2.0 * pi;
  const double disc = b * b - 4.0 * a * c;
  const double r = (-b + std::sqrt(disc)) / (2.0 * a);
  if (r <= 0.0) throw ConfigError("infeasible prevalence/odds-ratio combination");
  const double p0 = r / (1.0 + r);
  const double p1 = rho * r / (1.0 + rho * r);
  if (p1 >= 1.0) throw ConfigError("infeasible prevalence/odds-ratio combination");
  return {p0, p1};
}

Eigen::MatrixXd transition_matrix(const GenConfig& config, int intent) {
  validate(config);
  const Eigen::MatrixXd fwd = forward_chain(config.page_categories);
  const Eigen::MatrixXd bwd = fwd.transpose();
  const Eigen::MatrixXd base = 0.5 * (fwd + bwd);
  const double lambda = config.temporal_signal;
  return (1.0 - lambda) * base + lambda * (intent == 1 ? fwd : bwd);
}

Generated generate(const GenConfig& config) {
  validate(config);
  const auto [p0, p1] = intent_rates(config.prevalence, config.demographic_odds_ratio);
  const Eigen::MatrixXd chain[2] = {transition_matrix(config, 0), transition_matrix(config, 1)};

  Eigen::VectorXd start = Eigen::VectorXd::Constant(
      config.page_categories, 0.65 / static_cast<double>(config.page_categories - 1));
  start[0] = 0.35;  // landing-heavy, identical for both intents

  static const char* kOs[5] = {"Windows", "iOS", "Android", "macOS", "Other"};
  static const double kOsP[5] = {0.35, 0.20, 0.20, 0.15, 0.10};

  const sessions::Timestamp horizon_start = sessions::parse_iso8601("2017-05-01T00:00:00Z");
  const sessions::Timestamp horizon_len = 360LL * 86400;

  Generated out;
  LineBuf clicks, demo, labels;

  for (int user = 0; user < config.n_users; ++user) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(user)));
    char uid[16];
    std::snprintf(uid, sizeof uid, "u%06d", user);

    const bool informative_bit = rng.bernoulli(0.5);
    const double p_intent = informative_bit ? p1 : p0;

    // user-level noise demographics
    const int age = std::clamp(static_cast<int>(std::lround(rng.normal(45.0, 12.0))), 18, 90);
    const char* gender = rng.bernoulli(0.5) ? "F" : "M";
    const int income = 1 + static_cast<int>(rng.below(4));
    const int education = 1 + static_cast<int>(rng.below(5));
    double u_os = rng.unit();
    int os_idx = 4;
    for (int k = 0; k < 5; ++k) {
      u_os -= kOsP[k];
      if (u_os < 0.0) {
        os_idx = k;
        break;
      }
    }

    const int n_sessions =
        1 + static_cast<int>(rng.geometric(1.0 / config.sessions_per_user_mean));
    sessions::Timestamp t =
        horizon_start + static_cast<sessions::Timestamp>(rng.unit() * static_cast<double>(horizon_len));
    sessions::Timestamp prev_start = 0;

    for (int si = 0; si < n_sessions; ++si) {
      const bool z = rng.bernoulli(p_intent);
      const sessions::Timestamp session_start = t;

      const double len_mean = z ? config.length_mean_high : config.length_mean_low;
      int n_pv = 2 + static_cast<int>(rng.geometric(1.0 / (1.0 + len_mean)));
      n_pv = std::min(n_pv, 45);

      const double mu = config.dwell_log_mean + (z ? config.dwell_log_shift : 0.0);

      int page = sample_categorical(start, rng);
      sessions::Timestamp ts = session_start;
      for (int pv = 0; pv < n_pv; ++pv) {
        std::string url = page_url(config, page);
        if (page >= 4 && rng.bernoulli(0.004)) {
          url += "?ref=r" + std::to_string(1 + rng.below(3));  // rare tracked variant
        }
        clicks.add("{\"user_id\":\"%s\",\"ts\":\"%s\",\"url\":\"%s\",\"type\":\"pageview\"}\n",
                   uid, sessions::format_iso8601(ts).c_str(), url.c_str());

        for (int f = 0; f < config.click_fields; ++f) {
          const std::vector<int> pages = field_pages(config, f);
          if (!std::binary_search(pages.begin(), pages.end(), page)) continue;
          const double rate = f < 2 ? (z ? config.click_rate_high : config.click_rate_low)
                                    : config.click_rate_noise;
          if (rng.bernoulli(rate)) {
            clicks.add(
                "{\"user_id\":\"%s\",\"ts\":\"%s\",\"url\":\"%s\",\"type\":\"click\","
                "\"click_id\":\"c%02d\"}\n",
                uid, sessions::format_iso8601(ts).c_str(), url.c_str(), f);
          }
        }

        const double dwell = std::clamp(rng.lognormal(mu, config.dwell_log_sd), 1.0, 1500.0);
        ts += static_cast<sessions::Timestamp>(std::lround(dwell));
        if (pv + 1 < n_pv) page = sample_categorical(chain[z ? 1 : 0].row(page).transpose(), rng);
      }

      if (z) {
        clicks.add("{\"user_id\":\"%s\",\"ts\":\"%s\",\"url\":\"%s\",\"type\":\"pageview\"}\n",
                   uid, sessions::format_iso8601(ts).c_str(), kPurchaseUrl);
        ts += 30;
      }

      // one demographic record per session
      const std::int64_t days = session_start / 86400;
      int yy, mm, dd;
      {
        // reuse the civil-date conversion through the formatter
        const std::string iso = sessions::format_iso8601(session_start);
        yy = std::stoi(iso.substr(0, 4));
        mm = std::stoi(iso.substr(5, 2));
        dd = std::stoi(iso.substr(8, 2));
      }
      (void)yy;
      (void)dd;
      const int month_code = mm - 1;
      const int weekday_code = static_cast<int>((days + 3) % 7);  // Monday = 0

      demo.add("{\"user_id\":\"%s\",\"session_start\":\"%s\"", uid,
               sessions::format_iso8601(session_start).c_str());
      if (rng.bernoulli(0.02)) {
        demo.add(",\"age\":null");
      } else {
        demo.add(",\"age\":%d", age);
      }
      if (rng.bernoulli(0.01)) {
        demo.add(",\"gender\":null");
      } else {
        demo.add(",\"gender\":\"%s\"", gender);
      }
      if (rng.bernoulli(0.03)) {
        demo.add(",\"income_class\":null");
      } else {
        demo.add(",\"income_class\":%d", income);
      }
      if (rng.bernoulli(0.03)) {
        demo.add(",\"education_level\":null");
      } else {
        demo.add(",\"education_level\":%d", education);
      }
      demo.add(",\"existing_customer\":\"%s\"", informative_bit ? "yes" : "no");
      demo.add(",\"month\":%d,\"weekday\":%d", month_code, weekday_code);
      demo.add(",\"os\":\"%s\"", kOs[os_idx]);
      demo.add(",\"previous_visits\":%d", si);
      if (si == 0) {
        demo.add(",\"distance_to_last_visit\":null}\n");
      } else {
        demo.add(",\"distance_to_last_visit\":%lld}\n",
                 static_cast<long long>(session_start - prev_start));
      }

      labels.add("{\"user_id\":\"%s\",\"session_start\":\"%s\",\"label\":%d}\n", uid,
                 sessions::format_iso8601(session_start).c_str(), z ? 1 : 0);

      out.n_sessions += 1;
      out.n_positive += z ? 1 : 0;
      prev_start = session_start;

      // next session starts well past the inactivity gap
      t = ts + 31 * 60 + static_cast<sessions::Timestamp>(std::lround(rng.exponential(2.0 * 86400.0)));
    }
  }

  out.clicks_jsonl = std::move(clicks.out);
  out.demographics_jsonl = std::move(demo.out);
  out.labels_jsonl = std::move(labels.out);
  return out;
}

}  // namespace intent::gen
