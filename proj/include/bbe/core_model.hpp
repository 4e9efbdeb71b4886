#ifndef BBE_CORE_MODEL_HPP
#define BBE_CORE_MODEL_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bbe/error.hpp"

namespace bbe {

using BannerId = std::string;
/// Canonical feature key: "pv:<normalized url>" or "kw:<lowercased keyword>".
using FeatureId = std::string;
using UserId = std::string;
/// Integer seconds since the epoch.
using Timestamp = std::int64_t;
using Count = std::uint64_t;

enum class EventType { Impression, Click, Registration, PageView, SearchQuery };

struct EventKind {
  EventType type = EventType::PageView;
  /// Registration level, >= 1 for registrations and 0 otherwise.
  int level = 0;

  static constexpr EventKind impression() { return {EventType::Impression, 0}; }
  static constexpr EventKind click() { return {EventType::Click, 0}; }
  static constexpr EventKind registration(int level) { return {EventType::Registration, level}; }
  static constexpr EventKind page_view() { return {EventType::PageView, 0}; }
  static constexpr EventKind search_query() { return {EventType::SearchQuery, 0}; }

  /// Only page views and search queries grant features.
  constexpr bool is_feature_event() const {
    return type == EventType::PageView || type == EventType::SearchQuery;
  }

  friend constexpr bool operator==(const EventKind&, const EventKind&) = default;
};

struct HistoryEvent {
  EventKind kind;
  /// Banner id for impressions, clicks and registrations; URL or keyword otherwise.
  std::string obj;
  Timestamp time = 0;

  static HistoryEvent impression(BannerId banner, Timestamp t) {
    return {EventKind::impression(), std::move(banner), t};
  }
  static HistoryEvent click(BannerId banner, Timestamp t) {
    return {EventKind::click(), std::move(banner), t};
  }
  static HistoryEvent registration(BannerId banner, int level, Timestamp t) {
    return {EventKind::registration(level), std::move(banner), t};
  }
  static HistoryEvent page_view(std::string url, Timestamp t) {
    return {EventKind::page_view(), std::move(url), t};
  }
  static HistoryEvent search_query(std::string keyword, Timestamp t) {
    return {EventKind::search_query(), std::move(keyword), t};
  }

  friend bool operator==(const HistoryEvent&, const HistoryEvent&) = default;
};

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Lowercases scheme and host (when the URL has a scheme) and drops the query
/// string and fragment. Paths keep their case.
inline std::string normalize_url(std::string_view url) {
  url = url.substr(0, std::min(url.find('?'), url.find('#')));
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) return std::string(url);
  const auto host_end = url.find('/', scheme_end + 3);
  std::string out = detail::to_lower(url.substr(0, host_end));
  if (host_end != std::string_view::npos) out.append(url.substr(host_end));
  return out;
}

inline std::string normalize_keyword(std::string_view keyword) {
  return detail::to_lower(detail::trim(keyword));
}

/// Throws InvalidEvent when the event breaks a HistoryEvent invariant.
inline void validate(const HistoryEvent& e) {
  if (e.obj.empty()) throw InvalidEvent("event object must be non-empty");
  if (e.time < 0) throw InvalidEvent("event time must be >= 0");
  if (e.kind.type == EventType::Registration) {
    if (e.kind.level < 1) throw InvalidEvent("registration level must be >= 1");
  } else if (e.kind.level != 0) {
    throw InvalidEvent("only registrations carry a level");
  }
  if (e.kind.type == EventType::SearchQuery && normalize_keyword(e.obj).empty())
    throw InvalidEvent("search keyword is blank");
  if (e.kind.type == EventType::PageView && normalize_url(e.obj).empty())
    throw InvalidEvent("page view url is empty after normalization");
}

/// The feature a feature event grants, or nullopt for impressions, clicks and
/// registrations.
inline std::optional<FeatureId> feature_of(const HistoryEvent& e) {
  switch (e.kind.type) {
    case EventType::PageView:
      return "pv:" + normalize_url(e.obj);
    case EventType::SearchQuery:
      return "kw:" + normalize_keyword(e.obj);
    default:
      return std::nullopt;
  }
}

/// The per-user cookie log. Events are kept sorted by time; equal timestamps
/// keep arrival order.
class UserHistory {
 public:
  UserHistory() = default;
  explicit UserHistory(UserId user) : user_(std::move(user)) {}

  /// Builds a history from events in arrival order, validating and normalizing.
  static UserHistory from_events(UserId user, std::vector<HistoryEvent> events) {
    for (const auto& e : events) validate(e);
    std::stable_sort(events.begin(), events.end(),
                     [](const HistoryEvent& a, const HistoryEvent& b) { return a.time < b.time; });
    UserHistory h(std::move(user));
    h.events_ = std::move(events);
    return h;
  }

  /// Appends in place. Throws InvalidEvent and leaves the history untouched on
  /// a malformed event.
  void record(HistoryEvent e) {
    validate(e);
    const auto pos = std::upper_bound(
        events_.begin(), events_.end(), e.time,
        [](Timestamp t, const HistoryEvent& x) { return t < x.time; });
    events_.insert(pos, std::move(e));
  }

  /// Keeps only the newest `max_events` events. Returns true if anything was dropped.
  bool truncate_to_newest(std::size_t max_events) {
    if (events_.size() <= max_events) return false;
    events_.erase(events_.begin(), events_.end() - static_cast<std::ptrdiff_t>(max_events));
    return true;
  }

  const UserId& user() const noexcept { return user_; }
  const std::vector<HistoryEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  friend bool operator==(const UserHistory&, const UserHistory&) = default;

 private:
  UserId user_;
  std::vector<HistoryEvent> events_;
};

inline UserHistory record_event(UserHistory history, HistoryEvent event) {
  history.record(std::move(event));
  return history;
}

/// (F_u, S_u, C_u): feature occurrence counters and per-banner impression and
/// click counts. Absent keys mean zero.
struct UserProfile {
  std::map<FeatureId, Count> features;
  std::map<BannerId, Count> impressions;
  std::map<BannerId, Count> clicks;

  bool has_feature(const FeatureId& f) const { return features.count(f) != 0; }

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

template <typename Map, typename Key>
Count count_of(const Map& m, const Key& k) {
  const auto it = m.find(k);
  return it == m.end() ? Count{0} : it->second;
}

/// Folds one event into a profile.
inline void accumulate(UserProfile& p, const HistoryEvent& e) {
  switch (e.kind.type) {
    case EventType::Impression:
      ++p.impressions[e.obj];
      break;
    case EventType::Click:
      ++p.clicks[e.obj];
      break;
    case EventType::PageView:
    case EventType::SearchQuery:
      ++p.features[*feature_of(e)];
      break;
    case EventType::Registration:
      break;
  }
}

inline UserProfile derive_profile(const UserHistory& history) {
  UserProfile p;
  for (const auto& e : history.events()) accumulate(p, e);
  return p;
}

}  // namespace bbe

#endif  // BBE_CORE_MODEL_HPP
