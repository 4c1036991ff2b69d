#include "intent/sessions.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "intent/errors.hpp"

// The vendored single-header nlohmann/json.
#if __has_include(<nlohmann/json.hpp>)
#else
#include "json.hpp"
#endif

namespace intent::sessions {

using nlohmann::json;

namespace {

// days-from-civil (Howard Hinnant's algorithm); avoids timegm portability
// questions.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

Timestamp parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char t = 0, z = 0;
  std::istringstream is(text);
  char dash1 = 0, dash2 = 0, colon1 = 0, colon2 = 0;
  is >> y >> dash1 >> mo >> dash2 >> d >> t >> h >> colon1 >> mi >> colon2 >> s >> z;
  if (!is || dash1 != '-' || dash2 != '-' || (t != 'T' && t != 't') || colon1 != ':' ||
      colon2 != ':' || (z != 'Z' && z != 'z') || mo < 1 || mo > 12 || d < 1 || d > 31 ||
      h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    throw DataError("bad timestamp: " + text);
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_iso8601(Timestamp ts) {
  std::int64_t days = ts / 86400;
  std::int64_t rem = ts % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

ParseResult parse_click_log(std::istream& in) {
  if (!in.good()) throw IoError("cannot read click log stream");
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    result.total_lines += 1;
    try {
      const json j = json::parse(line);
      ClickEvent e;
      e.user_id = j.at("user_id").get<std::string>();
      e.ts = parse_iso8601(j.at("ts").get<std::string>());
      e.url = j.at("url").get<std::string>();
      const std::string type = j.at("type").get<std::string>();
      if (type == "pageview") {
        e.type = EventType::Pageview;
      } else if (type == "click") {
        e.type = EventType::Click;
        if (!j.contains("click_id") || !j["click_id"].is_string() ||
            j["click_id"].get<std::string>().empty()) {
          throw DataError("click event without click_id");
        }
        e.click_id = j["click_id"].get<std::string>();
      } else {
        throw DataError("unknown event type: " + type);
      }
      result.events.push_back(std::move(e));
    } catch (const std::exception& ex) {
      result.issues.push_back({line_no, ex.what()});
    }
  }
  if (in.bad()) throw IoError("stream failure while reading click log");
  if (result.total_lines > 0 &&
      10 * result.issues.size() > result.total_lines) {
    throw DataError("too many malformed lines: " + std::to_string(result.issues.size()) +
                    " of " + std::to_string(result.total_lines));
  }
  return result;
}

std::vector<Session> sessionize(std::vector<ClickEvent> events, int gap_minutes) {
  const Timestamp gap = static_cast<Timestamp>(gap_minutes) * 60;

  // group by user, keeping input order inside each group
  std::map<std::string, std::vector<ClickEvent>> by_user;
  for (ClickEvent& e : events) by_user[e.user_id].push_back(std::move(e));

  std::vector<Session> sessions;
  for (auto& [user, evs] : by_user) {
    std::stable_sort(evs.begin(), evs.end(),
                     [](const ClickEvent& a, const ClickEvent& b) { return a.ts < b.ts; });

    // Sessions are delimited by pageview-to-pageview gaps; clicks belong to
    // the window of the most recent pageview.
    Session* cur = nullptr;
    Timestamp last_pageview = 0;
    for (ClickEvent& e : evs) {
      if (e.type == EventType::Pageview) {
        if (cur == nullptr || e.ts - last_pageview > gap) {
          sessions.emplace_back();
          cur = &sessions.back();
          cur->user_id = user;
          cur->session_start = e.ts;
        }
        last_pageview = e.ts;
        cur->events.push_back(std::move(e));
      } else {
        if (cur == nullptr) continue;  // click before any pageview
        cur->events.push_back(std::move(e));
      }
    }
  }
  std::stable_sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    return a.session_start < b.session_start;
  });
  return sessions;
}

bool PurchaseMatcher::matches(const ClickEvent& e) const {
  for (const std::string& pat : url_substrings) {
    if (e.url.find(pat) != std::string::npos) return true;
  }
  return e.type == EventType::Click && click_ids.count(e.click_id) > 0;
}

PurchaseMatcher PurchaseMatcher::parse(const std::string& text) {
  PurchaseMatcher m;
  std::istringstream is(text);
  std::string token;
  while (std::getline(is, token, ',')) {
    if (token.empty()) continue;
    if (token.rfind("url:", 0) == 0) {
      m.url_substrings.push_back(token.substr(4));
    } else if (token.rfind("click:", 0) == 0) {
      m.click_ids.insert(token.substr(6));
    } else {
      throw ConfigError("purchase matcher tokens must start with url: or click:, got " + token);
    }
  }
  if (m.empty()) throw ConfigError("empty purchase matcher");
  return m;
}

CensorStats label_and_censor(std::vector<Session>& sessions, const PurchaseMatcher& matcher) {
  if (matcher.empty()) throw ConfigError("empty purchase matcher");
  CensorStats stats;
  std::vector<Session> kept;
  kept.reserve(sessions.size());
  for (Session& s : sessions) {
    std::size_t first_match = s.events.size();
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      if (matcher.matches(s.events[i])) {
        first_match = i;
        break;
      }
    }
    if (first_match == s.events.size()) {
      s.label = 0;
      kept.push_back(std::move(s));
      continue;
    }
    stats.matched_sessions += 1;
    stats.matched_events += s.events.size() - first_match;
    s.label = 1;
    s.events.erase(s.events.begin() + static_cast<std::ptrdiff_t>(first_match), s.events.end());
    const bool has_pageview = std::any_of(s.events.begin(), s.events.end(), [](const ClickEvent& e) {
      return e.type == EventType::Pageview;
    });
    if (!has_pageview) {
      stats.dropped_sessions += 1;
      continue;
    }
    kept.push_back(std::move(s));
  }
  sessions = std::move(kept);
  return stats;
}

std::vector<PageWindow> pageview_windows(const Session& s) {
  std::vector<PageWindow> windows;
  for (const ClickEvent& e : s.events) {
    if (e.type == EventType::Pageview) {
      PageWindow w;
      w.url = e.url;
      w.ts = e.ts;
      if (!windows.empty()) {
        const double gap = static_cast<double>(e.ts - windows.back().ts);
        w.delta_prev = gap;
        windows.back().dwell = gap;
      }
      windows.push_back(std::move(w));
    } else if (!windows.empty()) {
      windows.back().clicks.push_back(e.click_id);
    }
  }
  return windows;
}

std::string parent_page(const std::string& url) {
  const std::size_t cut = url.find_first_of("?#");
  if (cut != std::string::npos) return url.substr(0, cut);
  const std::size_t slash = url.find_last_of('/');
  if (slash == std::string::npos || slash == 0) return url;
  return url.substr(0, slash);
}

int Vocab::page_category(const std::string& url) const {
  auto it = page_map.find(url);
  if (it != page_map.end()) return it->second;
  auto parent = page_map.find(parent_page(url));
  if (parent != page_map.end()) return parent->second;
  return page_count() - 1;  // catch-all
}

int Vocab::click_category(const std::string& click_id) const {
  auto it = click_map.find(click_id);
  return it == click_map.end() ? -1 : it->second;
}

Vocab fit_vocab(const std::vector<Session>& train_sessions, double min_fraction) {
  if (train_sessions.empty()) throw DataError("cannot fit vocab on an empty training split");
  if (min_fraction <= 0.0 || min_fraction >= 1.0) {
    throw ConfigError("min_fraction must lie in (0, 1)");
  }

  // session-level presence counts
  std::map<std::string, long> page_sessions;
  std::map<std::string, long> click_sessions;
  for (const Session& s : train_sessions) {
    std::set<std::string> pages, clicks;
    for (const ClickEvent& e : s.events) {
      if (e.type == EventType::Pageview) {
        pages.insert(e.url);
      } else {
        clicks.insert(e.click_id);
      }
    }
    for (const std::string& p : pages) page_sessions[p] += 1;
    for (const std::string& c : clicks) click_sessions[c] += 1;
  }

  const double threshold = min_fraction * static_cast<double>(train_sessions.size());
  Vocab v;
  v.min_fraction = min_fraction;

  // Frequent URLs keep their own category; rare ones fold into their
  // parent-page group (which joins a frequent URL of the same name when one
  // exists).
  std::vector<std::string> frequent;
  std::vector<std::string> rare;
  for (const auto& [url, count] : page_sessions) {
    (static_cast<double>(count) > threshold ? frequent : rare).push_back(url);
  }
  for (const std::string& url : frequent) {
    v.page_map.emplace(url, static_cast<int>(v.page_categories.size()));
    v.page_categories.push_back(url);
  }
  for (const std::string& url : rare) {
    const std::string parent = parent_page(url);
    auto it = v.page_map.find(parent);
    int cat;
    if (it != v.page_map.end()) {
      cat = it->second;
    } else {
      cat = static_cast<int>(v.page_categories.size());
      v.page_categories.push_back(parent);
      v.page_map.emplace(parent, cat);
    }
    v.page_map.emplace(url, cat);
  }
  v.page_categories.push_back("__other__");

  for (const auto& [click, count] : click_sessions) {
    if (static_cast<double>(count) > threshold) {
      v.click_map.emplace(click, static_cast<int>(v.click_categories.size()));
      v.click_categories.push_back(click);
    }
  }

  // Which page categories each kept click appeared on (denominator of the
  // click-rate feature).
  std::vector<std::set<int>> assoc(static_cast<std::size_t>(v.click_count()));
  for (const Session& s : train_sessions) {
    for (const PageWindow& w : pageview_windows(s)) {
      const int page = v.page_category(w.url);
      for (const std::string& c : w.clicks) {
        const int cc = v.click_category(c);
        if (cc >= 0) assoc[static_cast<std::size_t>(cc)].insert(page);
      }
    }
  }
  v.click_pages.resize(assoc.size());
  for (std::size_t i = 0; i < assoc.size(); ++i) {
    v.click_pages[i].assign(assoc[i].begin(), assoc[i].end());
  }
  return v;
}

Scaler fit_scaler(const std::vector<double>& values) {
  if (values.empty()) throw DataError("cannot fit scaler on empty data");
  Scaler sc;
  sc.fitted = true;
  double sum = 0.0;
  for (double v : values) sum += v;
  sc.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - sc.mean) * (v - sc.mean);
  const double var =
      values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;
  if (var <= 0.0) {
    sc.sd = 1.0;
    sc.degenerate = true;
  } else {
    sc.sd = std::sqrt(var);
  }
  return sc;
}

Scaler fit_delta_scaler(const std::vector<Session>& train_sessions) {
  std::vector<double> deltas;
  for (const Session& s : train_sessions) {
    for (const PageWindow& w : pageview_windows(s)) deltas.push_back(w.delta_prev);
  }
  return fit_scaler(deltas);
}

EncodedSequence encode_sequence(const Session& s, const Vocab& vocab, const Scaler& scaler,
                                int T) {
  if (!vocab.fitted()) throw StateError("vocab is not fitted");
  if (!scaler.fitted) throw StateError("scaler is not fitted");

  EncodedSequence enc;
  enc.T = T;
  enc.page_dims = vocab.page_count();
  enc.click_dims = vocab.click_count();
  enc.y = s.label;

  std::vector<PageWindow> windows = pageview_windows(s);
  if (static_cast<int>(windows.size()) > T) {
    windows.resize(static_cast<std::size_t>(T));  // keep the earliest behaviour
  }
  enc.steps.reserve(windows.size());
  for (const PageWindow& w : windows) {
    SeqStep step;
    step.page = vocab.page_category(w.url);
    std::set<int> cats;
    for (const std::string& c : w.clicks) {
      const int cc = vocab.click_category(c);
      if (cc >= 0) cats.insert(cc);
    }
    step.clicks.assign(cats.begin(), cats.end());
    step.delta = scaler.transform(w.delta_prev);
    enc.steps.push_back(std::move(step));
  }
  return enc;
}

}  // namespace intent::sessions
