// SPDX-License-Identifier: Apache-2.0
//
// Audit-log ingestion: ProcMon CSV exports and the canonical JSONL
// interchange format, plus chronological windowing into model sequences.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "apthunt/error.hpp"

namespace apthunt::ingest {

/// One audit record as a (subject, action, object) triple.
struct CanonicalEvent {
  std::uint64_t seq_id = 0;
  std::int64_t timestamp = 0;  // integer microseconds
  std::string subject;         // process image name
  std::int64_t subject_pid = 0;
  std::string action;          // operation, e.g. RegOpenKey
  std::string object;          // path, key or address
  std::optional<std::string> result;
  std::optional<std::string> label;  // BIO2 tag, only in labeled data

  friend bool operator==(const CanonicalEvent&, const CanonicalEvent&) = default;
};

struct Origin {
  std::string source;
  std::size_t window = 0;
  friend bool operator==(const Origin&, const Origin&) = default;
};

struct EventSequence {
  std::vector<CanonicalEvent> events;
  Origin origin;
};

enum class ParseMode { Lenient, Strict };

struct ParseIssue {
  ErrorKind kind;
  std::size_t line;  // 1-based data row (CSV) or line (JSONL)
  std::string message;
};

struct ParseResult {
  std::vector<CanonicalEvent> events;
  std::vector<ParseIssue> issues;  // rows skipped in lenient mode
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Splits an RFC-4180 document into records. Quoted fields may contain
/// commas, doubled quotes and line breaks. Records are returned with the
/// 1-based physical line on which they start.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> split_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool record_has_content = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_record = [&] {
    if (record_has_content || !fields.empty()) {
      fields.push_back(std::move(field));
      records.emplace_back(record_line, std::move(fields));
    }
    fields.clear();
    field.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        record_has_content = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        record_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(c);
        record_has_content = true;
    }
  }
  end_record();
  return records;
}

}  // namespace detail

/// Parses a ProcMon "Time of Day" value such as "4:10:21.1000000" or
/// "4:10:21.1000000 PM" into microseconds since midnight.
inline std::optional<std::int64_t> parse_time_of_day(std::string_view raw) {
  std::string s = detail::trim(raw);
  int pm = -1;
  if (s.size() >= 2) {
    const std::string suffix = detail::lower(s.substr(s.size() - 2));
    if (suffix == "am" || suffix == "pm") {
      pm = suffix == "pm" ? 1 : 0;
      s = detail::trim(s.substr(0, s.size() - 2));
    }
  }
  std::int64_t parts[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start || pos - start > 2) return std::nullopt;
    parts[p] = std::stoll(s.substr(start, pos - start));
    if (p < 2) {
      if (pos >= s.size() || s[pos] != ':') return std::nullopt;
      ++pos;
    }
  }
  std::int64_t micros = 0;
  if (pos < s.size()) {
    if (s[pos] != '.') return std::nullopt;
    ++pos;
    std::int64_t scale = 100000;
    std::size_t digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (scale > 0) {
        micros += (s[pos] - '0') * scale;
        scale /= 10;
      }
      ++pos;
      ++digits;
    }
    if (digits == 0 || pos != s.size()) return std::nullopt;
  }
  auto [hours, minutes, seconds] = parts;
  if (pm >= 0) {
    if (hours < 1 || hours > 12) return std::nullopt;
    hours = hours % 12 + (pm == 1 ? 12 : 0);
  }
  if (hours > 23 || minutes > 59 || seconds > 60) return std::nullopt;
  return ((hours * 60 + minutes) * 60 + seconds) * 1000000 + micros;
}

/// Parses a ProcMon CSV export. The header must contain Time of Day,
/// Process Name, PID, Operation and Path; Result and Detail are optional.
///
/// seq_id is the 1-based data row number, so rows skipped in lenient mode
/// leave gaps but the sequence stays strictly increasing.
inline ParseResult parse_procmon_csv(std::string_view text, ParseMode mode = ParseMode::Lenient) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  auto records = detail::split_csv(text);
  if (records.empty()) throw ParseError(ErrorKind::MissingColumn, 1, "empty document, no header row");

  std::map<std::string, std::size_t> columns;
  const auto& header = records.front().second;
  for (std::size_t i = 0; i < header.size(); ++i) {
    columns.emplace(detail::lower(detail::trim(header[i])), i);
  }
  auto column = [&](const char* name, bool required) -> std::optional<std::size_t> {
    auto it = columns.find(name);
    if (it != columns.end()) return it->second;
    if (required) throw ParseError(ErrorKind::MissingColumn, 1, std::string("header lacks column '") + name + "'");
    return std::nullopt;
  };
  const std::size_t c_time = *column("time of day", true);
  const std::size_t c_proc = *column("process name", true);
  const std::size_t c_pid = *column("pid", true);
  const std::size_t c_op = *column("operation", true);
  const std::size_t c_path = *column("path", true);
  const auto c_result = column("result", false);

  ParseResult out;
  auto reject = [&](ErrorKind kind, std::size_t row, std::string message) {
    if (mode == ParseMode::Strict) throw ParseError(kind, row, message);
    out.issues.push_back({kind, row, std::move(message)});
  };

  for (std::size_t r = 1; r < records.size(); ++r) {
    const std::size_t row = r;
    const auto& fields = records[r].second;
    if (fields.size() != header.size()) {
      reject(ErrorKind::RowArity, row,
             "expected " + std::to_string(header.size()) + " columns, found " + std::to_string(fields.size()));
      continue;
    }
    CanonicalEvent e;
    e.seq_id = row;
    const auto ts = parse_time_of_day(fields[c_time]);
    if (!ts) {
      reject(ErrorKind::BadField, row, "unparseable Time of Day '" + fields[c_time] + "'");
      continue;
    }
    e.timestamp = *ts;
    const std::string pid = detail::trim(fields[c_pid]);
    if (pid.empty() || pid.size() > 18 ||
        !std::all_of(pid.begin(), pid.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      reject(ErrorKind::BadField, row, "non-integer PID '" + pid + "'");
      continue;
    }
    e.subject_pid = std::stoll(pid);
    e.subject = fields[c_proc];
    e.action = fields[c_op];
    e.object = fields[c_path];
    if (c_result) e.result = fields[*c_result];
    if (detail::trim(e.subject).empty() || detail::trim(e.action).empty()) {
      reject(ErrorKind::BadField, row, "empty Process Name or Operation");
      continue;
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

inline nlohmann::json to_json(const CanonicalEvent& e) {
  nlohmann::json j;
  j["seq_id"] = e.seq_id;
  j["timestamp"] = e.timestamp;
  j["subject"] = e.subject;
  j["subject_pid"] = e.subject_pid;
  j["action"] = e.action;
  j["object"] = e.object;
  if (e.result) j["result"] = *e.result;
  if (e.label) j["label"] = *e.label;
  return j;
}

/// One JSON object per line with the CanonicalEvent field names.
inline std::string write_canonical_jsonl(const std::vector<CanonicalEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline ParseResult parse_canonical_jsonl(std::string_view text) {
  ParseResult out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty()) continue;

    auto fail = [&](const std::string& why) { throw ParseError(ErrorKind::MalformedLine, line_no, why); };
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("not a JSON object");

    auto str = [&](const char* key) -> std::string {
      auto it = j.find(key);
      if (it == j.end() || !it->is_string()) fail(std::string("missing string field '") + key + "'");
      return it->get<std::string>();
    };
    auto integer = [&](const char* key) -> std::int64_t {
      auto it = j.find(key);
      if (it == j.end() || !it->is_number_integer()) fail(std::string("missing integer field '") + key + "'");
      return it->get<std::int64_t>();
    };
    auto opt_str = [&](const char* key) -> std::optional<std::string> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return std::nullopt;
      if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
      return it->get<std::string>();
    };

    CanonicalEvent e;
    const std::int64_t seq = integer("seq_id");
    if (seq < 0) fail("negative seq_id");
    e.seq_id = static_cast<std::uint64_t>(seq);
    e.timestamp = integer("timestamp");
    if (e.timestamp < 0) fail("negative timestamp");
    e.subject = str("subject");
    e.subject_pid = integer("subject_pid");
    e.action = str("action");
    e.object = str("object");
    e.result = opt_str("result");
    e.label = opt_str("label");
    if (e.subject.empty() || e.action.empty()) fail("empty subject or action");
    if (!out.events.empty() && e.seq_id <= out.events.back().seq_id) fail("seq_id not strictly increasing");
    out.events.push_back(std::move(e));
  }
  return out;
}

inline bool chronological_less(const CanonicalEvent& a, const CanonicalEvent& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.seq_id < b.seq_id;
}

inline std::vector<CanonicalEvent> sort_chronologically(std::vector<CanonicalEvent> events) {
  std::stable_sort(events.begin(), events.end(), chronological_less);
  return events;
}

struct SessionizeOptions {
  std::size_t max_window = 256;
  bool per_pid = false;  // window each process separately
  std::string source;
};

/// Sorts by (timestamp, seq_id) and chunks into consecutive windows of at
/// most max_window events. With per_pid set, each PID's events are windowed
/// independently (PIDs in ascending order).
inline std::vector<EventSequence> sessionize(std::vector<CanonicalEvent> events, const SessionizeOptions& opts) {
  if (opts.max_window == 0) throw Error(ErrorKind::InvalidArgument, "max_window must be >= 1");
  events = sort_chronologically(std::move(events));

  std::vector<std::vector<CanonicalEvent>> groups;
  if (opts.per_pid) {
    std::map<std::int64_t, std::vector<CanonicalEvent>> by_pid;
    for (auto& e : events) by_pid[e.subject_pid].push_back(std::move(e));
    for (auto& [pid, group] : by_pid) groups.push_back(std::move(group));
  } else {
    groups.push_back(std::move(events));
  }

  std::vector<EventSequence> out;
  for (auto& group : groups) {
    for (std::size_t begin = 0; begin < group.size(); begin += opts.max_window) {
      const std::size_t end = std::min(group.size(), begin + opts.max_window);
      EventSequence seq;
      seq.origin = {opts.source, out.size()};
      seq.events.assign(std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(begin)),
                        std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(end)));
      out.push_back(std::move(seq));
    }
  }
  return out;
}

inline std::vector<EventSequence> sessionize(std::vector<CanonicalEvent> events, std::size_t max_window) {
  return sessionize(std::move(events), SessionizeOptions{max_window, false, {}});
}

}  // namespace apthunt::ingest
