#ifndef BBE_PERSISTENCE_HPP
#define BBE_PERSISTENCE_HPP

#include <charconv>
#include <limits>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bbe/core_model.hpp"
#include "bbe/error.hpp"
#include "bbe/event_ingest.hpp"

namespace bbe {

// ---------------------------------------------------------------------------
// Cookie codec
//
//   {"v":1,"u":"<user>","e":[["<kind>","<obj>",<time>],...]}
//
// kinds: "imp", "clk", "reg:<level>", "pv", "kw". Events are written in
// normalized (time-sorted) order, compact, UTF-8.
// ---------------------------------------------------------------------------

inline constexpr int kCookieVersion = 1;
inline constexpr std::size_t kDefaultMaxCookieEvents = 500;

inline std::string kind_tag(const EventKind& k) {
  switch (k.type) {
    case EventType::Impression:
      return "imp";
    case EventType::Click:
      return "clk";
    case EventType::Registration:
      return "reg:" + std::to_string(k.level);
    case EventType::PageView:
      return "pv";
    case EventType::SearchQuery:
      return "kw";
  }
  return {};
}

/// Inverse of kind_tag. Throws DecodeError on an unknown tag.
inline EventKind parse_kind_tag(std::string_view tag) {
  if (tag == "imp") return EventKind::impression();
  if (tag == "clk") return EventKind::click();
  if (tag == "pv") return EventKind::page_view();
  if (tag == "kw") return EventKind::search_query();
  if (tag.substr(0, 4) == "reg:") {
    const auto digits = tag.substr(4);
    int level = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), level);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty() &&
        digits.front() != '0' && level >= 1) {
      return EventKind::registration(level);
    }
  }
  throw DecodeError("unknown event kind '" + std::string(tag) + "'");
}

inline nlohmann::ordered_json history_to_json(const UserHistory& history) {
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (const auto& e : history.events()) events.push_back({kind_tag(e.kind), e.obj, e.time});
  nlohmann::ordered_json j;
  j["v"] = kCookieVersion;
  j["u"] = history.user();
  j["e"] = std::move(events);
  return j;
}

inline std::string encode_history(const UserHistory& history) { return history_to_json(history).dump(); }

struct DecodedHistory {
  UserHistory history;
  /// Older events were dropped to respect the event cap.
  bool truncated = false;
};

template <typename Json>
DecodedHistory history_from_json(const Json& j, std::size_t max_events = kDefaultMaxCookieEvents) {
  if (!j.is_object()) throw DecodeError("cookie must be a JSON object");
  const auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer()) throw DecodeError("cookie version missing");
  if (v->template get<std::int64_t>() != kCookieVersion)
    throw DecodeError("unsupported cookie version " + v->dump());
  const auto u = j.find("u");
  if (u == j.end() || !u->is_string()) throw DecodeError("cookie user missing");
  const auto e = j.find("e");
  if (e == j.end() || !e->is_array()) throw DecodeError("cookie event list missing");

  std::vector<HistoryEvent> events;
  events.reserve(e->size());
  for (const auto& item : *e) {
    if (!item.is_array() || item.size() != 3 || !item[0].is_string() || !item[1].is_string() ||
        !item[2].is_number_integer()) {
      throw DecodeError("cookie event must be [kind, obj, time]");
    }
    events.push_back({parse_kind_tag(item[0].template get<std::string>()),
                      item[1].template get<std::string>(), item[2].template get<Timestamp>()});
  }

  DecodedHistory out;
  try {
    out.history = UserHistory::from_events(u->template get<std::string>(), std::move(events));
  } catch (const InvalidEvent& ex) {
    throw DecodeError(std::string("cookie holds an invalid event: ") + ex.what());
  }
  out.truncated = out.history.truncate_to_newest(max_events);
  return out;
}

/// Throws DecodeError on malformed JSON, an unknown version or a bad kind tag.
inline DecodedHistory decode_history(std::string_view blob, std::size_t max_events = kDefaultMaxCookieEvents) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::parse_error& ex) {
    throw DecodeError(std::string("cookie is not valid JSON: ") + ex.what());
  }
  return history_from_json(j, max_events);
}

// ---------------------------------------------------------------------------
// Stats snapshot
//
//   bbe-snapshot v1
//   <feature> TAB <banner> TAB <imps> TAB <clicks>      one per nonzero cell
//   #totals
//   <banner> TAB <imps> TAB <clicks>
//   #registrations
//   <banner> TAB <level> TAB <count>
//   #features
//   <feature> TAB <users> TAB <occurrences>
//
// Every section is sorted by its key columns. Ids escape '\\', TAB, LF and CR
// as \\, \t, \n, \r.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSnapshotHeader = "bbe-snapshot v1";

namespace detail {

inline void append_escaped(std::string& out, std::string_view id) {
  for (char c : id) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
}

inline std::string unescape(std::string_view s, std::size_t line) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw SnapshotError(line, "dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw SnapshotError(line, "bad escape sequence");
    }
  }
  if (out.empty()) throw SnapshotError(line, "empty id");
  return out;
}

/// Canonical unsigned decimal: no sign, no leading zeros.
inline std::uint64_t parse_count(std::string_view s, std::size_t line) {
  if (s.empty()) throw SnapshotError(line, "empty count");
  if (s.front() == '-') throw SnapshotError(line, "negative count");
  if (s.size() > 1 && s.front() == '0') throw SnapshotError(line, "non-canonical count");
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw SnapshotError(line, "bad count '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find('\t', start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline std::string snapshot(const GlobalStats& stats) {
  std::string out(kSnapshotHeader);
  out += '\n';
  const auto field = [&out](auto n) {
    out += '\t';
    out += std::to_string(n);
  };
  for (const auto& [f, row] : stats.matrix()) {
    for (const auto& [b, c] : row) {
      detail::append_escaped(out, f);
      out += '\t';
      detail::append_escaped(out, b);
      field(c.imps);
      field(c.clicks);
      out += '\n';
    }
  }
  out += "#totals\n";
  for (const auto& [b, t] : stats.banners()) {
    detail::append_escaped(out, b);
    field(t.imps);
    field(t.clicks);
    out += '\n';
  }
  out += "#registrations\n";
  for (const auto& [b, t] : stats.banners()) {
    for (const auto& [level, n] : t.registrations) {
      detail::append_escaped(out, b);
      field(level);
      field(n);
      out += '\n';
    }
  }
  out += "#features\n";
  for (const auto& [f, t] : stats.features()) {
    detail::append_escaped(out, f);
    field(t.users);
    field(t.occurrences);
    out += '\n';
  }
  return out;
}

/// Inverse of snapshot(). Throws SnapshotError naming the offending line.
inline GlobalStats restore(std::string_view bytes) {
  enum class Section { Cells, Totals, Registrations, Features };
  constexpr std::string_view kSectionNames[] = {"", "#totals", "#registrations", "#features"};

  GlobalStats stats;
  Section section = Section::Cells;
  std::vector<std::string> prev_key;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  if (bytes.empty()) throw SnapshotError(1, "missing header");
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw SnapshotError(line_no + 1, "missing trailing newline");
    const std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (line_no == 1) {
      if (line != kSnapshotHeader) throw SnapshotError(1, "bad header");
      continue;
    }
    if (line.find('\t') == std::string_view::npos) {
      const auto next = static_cast<int>(section) + 1;
      if (next > static_cast<int>(Section::Features) || line != kSectionNames[next])
        throw SnapshotError(line_no, "unexpected line '" + std::string(line) + "'");
      section = static_cast<Section>(next);
      prev_key.clear();
      continue;
    }

    const auto fields = detail::split_tabs(line);
    const std::size_t want = section == Section::Cells ? 4 : 3;
    if (fields.size() != want) throw SnapshotError(line_no, "expected " + std::to_string(want) + " fields");

    std::vector<std::string> key;
    std::vector<std::uint64_t> counts;
    if (section == Section::Cells) {
      key = {detail::unescape(fields[0], line_no), detail::unescape(fields[1], line_no)};
      counts = {detail::parse_count(fields[2], line_no), detail::parse_count(fields[3], line_no)};
      if (counts[0] == 0 && counts[1] == 0) throw SnapshotError(line_no, "zero cell");
    } else if (section == Section::Registrations) {
      const auto level = detail::parse_count(fields[1], line_no);
      if (level < 1 || level > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
        throw SnapshotError(line_no, "bad registration level");
      // Levels sort numerically, so compare on a zero-padded rendering.
      std::string padded = std::to_string(level);
      padded.insert(0, 20 - padded.size(), '0');
      key = {detail::unescape(fields[0], line_no), padded};
      counts = {level, detail::parse_count(fields[2], line_no)};
    } else {
      key = {detail::unescape(fields[0], line_no)};
      counts = {detail::parse_count(fields[1], line_no), detail::parse_count(fields[2], line_no)};
    }
    if (!prev_key.empty() && !(prev_key < key)) throw SnapshotError(line_no, "duplicate or out-of-order entry");

    switch (section) {
      case Section::Cells:
        stats.add_imps(key[0], key[1], counts[0]);
        stats.add_clicks(key[0], key[1], counts[1]);
        break;
      case Section::Totals: {
        auto& t = stats.banner_totals(key[0]);
        t.imps = counts[0];
        t.clicks = counts[1];
        break;
      }
      case Section::Registrations:
        stats.banner_totals(key[0]).registrations[static_cast<int>(counts[0])] = counts[1];
        break;
      case Section::Features: {
        auto& t = stats.feature_totals(key[0]);
        t.users = counts[0];
        t.occurrences = counts[1];
        break;
      }
    }
    prev_key = std::move(key);
  }
  if (line_no == 0) throw SnapshotError(1, "missing header");
  if (section != Section::Features) throw SnapshotError(line_no + 1, "truncated snapshot");
  return stats;
}

}  // namespace bbe

#endif  // BBE_PERSISTENCE_HPP
