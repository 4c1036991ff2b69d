#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "intent/dataset.hpp"

namespace intent::sessions {

using Timestamp = std::int64_t;  // seconds since the Unix epoch, UTC

enum class EventType { Pageview, Click };

struct ClickEvent {
  std::string user_id;
  Timestamp ts = 0;
  std::string url;
  EventType type = EventType::Pageview;
  std::string click_id;  // present iff type == Click
};

// ISO-8601 UTC ("2017-05-01T12:30:00Z") <-> epoch seconds.
Timestamp parse_iso8601(const std::string& text);
std::string format_iso8601(Timestamp ts);

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<ClickEvent> events;  // in file order
  std::vector<ParseIssue> issues;
  std::size_t total_lines = 0;
};

// JSON Lines click log. Malformed lines are collected with their line
// numbers; more than 10% malformed aborts with a DataError.
ParseResult parse_click_log(std::istream& in);

struct Session {
  std::string user_id;
  std::vector<ClickEvent> events;  // feature-visible events after censoring
  int label = 0;
  Timestamp session_start = 0;
  std::string os_tag;  // optional, filled from demographics for breakdowns
};

// Groups events by user, sorts by timestamp (stable on ties) and splits
// whenever the gap between consecutive pageviews strictly exceeds
// gap_minutes. Clicks attach to the session of their enclosing pageview
// window; clicks with no preceding pageview are dropped.
std::vector<Session> sessionize(std::vector<ClickEvent> events, int gap_minutes = 30);

struct PurchaseMatcher {
  std::vector<std::string> url_substrings;
  std::set<std::string> click_ids;

  bool matches(const ClickEvent& e) const;
  bool empty() const { return url_substrings.empty() && click_ids.empty(); }
  // "url:/shop/confirm,click:buy_now"
  static PurchaseMatcher parse(const std::string& text);
};

struct CensorStats {
  std::size_t matched_sessions = 0;
  std::size_t dropped_sessions = 0;  // emptied by censoring
  std::size_t matched_events = 0;
};

// Labels each session 1 iff any event matches, then removes the first
// matching event and everything after it from the visible event list.
// Sessions left without a pageview are dropped.
CensorStats label_and_censor(std::vector<Session>& sessions, const PurchaseMatcher& matcher);

// One pageview plus everything that happened before the next pageview.
struct PageWindow {
  std::string url;
  Timestamp ts = 0;
  std::vector<std::string> clicks;  // click ids inside the window
  double delta_prev = 0.0;          // seconds since previous pageview, 0 for first
  double dwell = 0.0;               // seconds until next pageview, 0 for last
};

std::vector<PageWindow> pageview_windows(const Session& s);

struct Vocab {
  std::vector<std::string> page_categories;  // id -> name; last is the fallback
  std::unordered_map<std::string, int> page_map;
  std::vector<std::string> click_categories;
  std::unordered_map<std::string, int> click_map;  // kept clicks only
  double min_fraction = 0.01;
  // click category -> page categories it was seen on in training; used for
  // click-rate denominators.
  std::vector<std::vector<int>> click_pages;

  int page_count() const { return static_cast<int>(page_categories.size()); }
  int click_count() const { return static_cast<int>(click_categories.size()); }
  bool fitted() const { return !page_categories.empty(); }

  // Total mapping: unseen URLs fall back to their parent group or the
  // catch-all category.
  int page_category(const std::string& url) const;
  // -1 for clicks that were pruned or never seen.
  int click_category(const std::string& click_id) const;
};

// Strips query/fragment, else the last path segment: the group a rare URL
// is folded into.
std::string parent_page(const std::string& url);

// Category inventory from the training split only. Pages appearing in at
// most min_fraction of training sessions are merged into their parent-page
// group; clicks below the same threshold are dropped.
Vocab fit_vocab(const std::vector<Session>& train_sessions, double min_fraction = 0.01);

struct Scaler {
  double mean = 0.0;
  double sd = 1.0;
  bool fitted = false;
  bool degenerate = false;  // constant feature; sd forced to 1

  double transform(double v) const { return (v - mean) / sd; }
};

Scaler fit_scaler(const std::vector<double>& values);

// Per-step time deltas (seconds between consecutive pageviews, 0 for the
// first) across all training sessions.
Scaler fit_delta_scaler(const std::vector<Session>& train_sessions);

// Fixed-length encoding: one step per pageview, page one-hot, click
// multi-hot over the window, standardized delta. Longer sessions keep their
// FIRST `T` pageviews; shorter ones are pre-padded with zero steps.
EncodedSequence encode_sequence(const Session& s, const Vocab& vocab, const Scaler& scaler,
                                int T = 30);

}  // namespace intent::sessions
