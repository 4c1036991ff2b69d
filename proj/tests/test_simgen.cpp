#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "intent/errors.hpp"
#include "intent/features.hpp"
#include "intent/sessions.hpp"
#include "intent/simgen.hpp"
#include "json.hpp"

using namespace intent;

namespace {

gen::GenConfig small_config(std::uint64_t seed = 1) {
  gen::GenConfig c;
  c.n_users = 600;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("generation is byte-deterministic in the seed") {
  const gen::Generated a = gen::generate(small_config(7));
  const gen::Generated b = gen::generate(small_config(7));
  CHECK(a.clicks_jsonl == b.clicks_jsonl);
  CHECK(a.demographics_jsonl == b.demographics_jsonl);
  CHECK(a.labels_jsonl == b.labels_jsonl);

  const gen::Generated c = gen::generate(small_config(8));
  CHECK(a.clicks_jsonl != c.clicks_jsonl);
}

TEST_CASE("config validation") {
  gen::GenConfig c = small_config();
  c.prevalence = 1.2;
  CHECK_THROWS_AS(gen::generate(c), ConfigError);
  c = small_config();
  c.temporal_signal = -0.1;
  CHECK_THROWS_AS(gen::generate(c), ConfigError);
  c = small_config();
  c.page_categories = 4;
  CHECK_THROWS_AS(gen::generate(c), ConfigError);
  c = small_config();
  c.click_rate_low = 0.5;
  c.click_rate_high = 0.4;
  CHECK_THROWS_AS(gen::generate(c), ConfigError);
}

TEST_CASE("intent rates satisfy the prevalence and odds-ratio constraints") {
  const auto [p0, p1] = gen::intent_rates(0.13, 2.0);
  CHECK(0.5 * p0 + 0.5 * p1 == doctest::Approx(0.13).epsilon(1e-12));
  const double odds0 = p0 / (1.0 - p0);
  const double odds1 = p1 / (1.0 - p1);
  CHECK(odds1 / odds0 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("transition matrices: stochastic, shared stationary profile, order-only signal") {
  gen::GenConfig c = small_config();

  SUBCASE("rows sum to one and columns too (uniform stationary distribution)") {
    for (double lambda : {0.0, 0.5, 1.0}) {
      c.temporal_signal = lambda;
      for (int z : {0, 1}) {
        const Eigen::MatrixXd T = gen::transition_matrix(c, z);
        for (int r = 0; r < T.rows(); ++r) {
          CHECK(T.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
          CHECK(T.col(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("no temporal signal means identical chains") {
    c.temporal_signal = 0.0;
    const Eigen::MatrixXd T0 = gen::transition_matrix(c, 0);
    const Eigen::MatrixXd T1 = gen::transition_matrix(c, 1);
    CHECK((T0 - T1).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("full temporal signal separates every row by at least 0.2 TV") {
    c.temporal_signal = 1.0;
    const Eigen::MatrixXd T0 = gen::transition_matrix(c, 0);
    const Eigen::MatrixXd T1 = gen::transition_matrix(c, 1);
    for (int r = 0; r < T0.rows(); ++r) {
      const double tv = 0.5 * (T0.row(r) - T1.row(r)).cwiseAbs().sum();
      CHECK(tv >= 0.2);
    }
  }
}

TEST_CASE("realized prevalence lands within three sigma at desk scale") {
  gen::GenConfig c;
  c.n_users = 13334;  // ~20k sessions
  c.seed = 1;
  const gen::Generated out = gen::generate(c);
  CHECK(out.n_sessions > 18000);
  const double rate = static_cast<double>(out.n_positive) / out.n_sessions;
  const double sigma = std::sqrt(0.13 * 0.87 / out.n_sessions);
  CHECK(std::abs(rate - 0.13) <= 3.0 * sigma);
}

TEST_CASE("generated logs round-trip the ingestion pipeline cleanly") {
  const gen::GenConfig c = small_config(5);
  const gen::Generated out = gen::generate(c);

  std::istringstream clicks(out.clicks_jsonl);
  const sessions::ParseResult parsed = sessions::parse_click_log(clicks);
  CHECK(parsed.issues.empty());

  std::vector<sessions::Session> sess = sessions::sessionize(parsed.events);
  CHECK(static_cast<int>(sess.size()) == out.n_sessions);

  const sessions::PurchaseMatcher matcher =
      sessions::PurchaseMatcher::parse(gen::kPurchaseMatcherSpec);
  const sessions::CensorStats stats = sessions::label_and_censor(sess, matcher);
  CHECK(stats.dropped_sessions == 0);  // purchase is never the only event

  long positives = 0;
  for (const sessions::Session& s : sess) positives += s.label;
  CHECK(static_cast<int>(positives) == out.n_positive);

  // ground-truth labels line up with the derived ones by (user, start)
  std::map<std::pair<std::string, sessions::Timestamp>, int> truth;
  std::istringstream labels(out.labels_jsonl);
  std::string line;
  while (std::getline(labels, line)) {
    const auto j = nlohmann::json::parse(line);
    truth[{j.at("user_id").get<std::string>(),
           sessions::parse_iso8601(j.at("session_start").get<std::string>())}] =
        j.at("label").get<int>();
  }
  CHECK(truth.size() == sess.size());
  for (const sessions::Session& s : sess) {
    REQUIRE(truth.count({s.user_id, s.session_start}) == 1);
    CHECK(truth[{s.user_id, s.session_start}] == s.label);
  }

  // demographics parse and join one-to-one as well
  std::istringstream demo(out.demographics_jsonl);
  const std::vector<features::DemoRecord> records = features::parse_demo_records(demo);
  CHECK(records.size() == sess.size());
}

TEST_CASE("positive sessions end in the purchase page before censoring") {
  const gen::Generated out = gen::generate(small_config(9));
  std::istringstream clicks(out.clicks_jsonl);
  std::vector<sessions::Session> sess =
      sessions::sessionize(sessions::parse_click_log(clicks).events);

  std::map<std::pair<std::string, sessions::Timestamp>, int> truth;
  std::istringstream labels(out.labels_jsonl);
  std::string line;
  while (std::getline(labels, line)) {
    const auto j = nlohmann::json::parse(line);
    truth[{j.at("user_id").get<std::string>(),
           sessions::parse_iso8601(j.at("session_start").get<std::string>())}] =
        j.at("label").get<int>();
  }
  for (const sessions::Session& s : sess) {
    const bool has_purchase = [&] {
      for (const sessions::ClickEvent& e : s.events) {
        if (e.url.find(gen::kPurchaseUrl) != std::string::npos) return true;
      }
      return false;
    }();
    CHECK(has_purchase == (truth[{s.user_id, s.session_start}] == 1));
  }
}

TEST_CASE("sessions per user follow the configured geometric mean") {
  gen::GenConfig c = small_config(11);
  c.n_users = 4000;
  const gen::Generated out = gen::generate(c);
  const double mean = static_cast<double>(out.n_sessions) / c.n_users;
  // geometric with mean 1.5: sd = sqrt(0.75) per user
  const double se = std::sqrt(0.75 / c.n_users);
  CHECK(std::abs(mean - 1.5) <= 4.0 * se);
}
