// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "apthunt/ingest.hpp"
#include "apthunt/random.hpp"

using namespace apthunt;
using namespace apthunt::ingest;

namespace {

const char* kHeader = "\"Time of Day\",\"Process Name\",\"PID\",\"Operation\",\"Path\",\"Result\"\n";

CanonicalEvent ev(std::uint64_t seq, std::int64_t ts) {
  CanonicalEvent e;
  e.seq_id = seq;
  e.timestamp = ts;
  e.subject = "a.exe";
  e.subject_pid = 10;
  e.action = "ReadFile";
  e.object = "C:\\x";
  return e;
}

}  // namespace

TEST(Ingest, ProcmonSingleRow) {
  const std::string text = std::string(kHeader) +
      "\"4:10:21.1000000\",\"groupagent.exe\",\"5216\",\"RegOpenKey\","
      "\"HKLM\\System\\CurrentControlSet\\Control\\SafeBoot\\Option\",\"SUCCESS\"\n";
  auto r = parse_procmon_csv(text);
  ASSERT_EQ(r.events.size(), 1u);
  const auto& e = r.events[0];
  EXPECT_EQ(e.subject, "groupagent.exe");
  EXPECT_EQ(e.subject_pid, 5216);
  EXPECT_EQ(e.action, "RegOpenKey");
  EXPECT_EQ(e.object, "HKLM\\System\\CurrentControlSet\\Control\\SafeBoot\\Option");
  EXPECT_EQ(e.result, "SUCCESS");
  EXPECT_EQ(e.timestamp, ((4 * 60 + 10) * 60 + 21) * 1000000LL + 100000);
  EXPECT_EQ(e.seq_id, 1u);
}

TEST(Ingest, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_procmon_csv(kHeader).events.empty());
}

TEST(Ingest, StrictArityNamesRow) {
  const std::string text = std::string(kHeader) + "\"1:00:00\",\"a.exe\",\"3\"\n";
  try {
    parse_procmon_csv(text, ParseMode::Strict);
    FAIL() << "expected RowArity";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RowArity);
    EXPECT_EQ(e.line(), 1u);
  }
  auto lenient = parse_procmon_csv(text);
  EXPECT_TRUE(lenient.events.empty());
  ASSERT_EQ(lenient.issues.size(), 1u);
  EXPECT_EQ(lenient.issues[0].kind, ErrorKind::RowArity);
}

TEST(Ingest, MissingColumn) {
  try {
    parse_procmon_csv("Time of Day,Process Name,PID,Operation\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingColumn);
  }
}

TEST(Ingest, QuotedCommaBomAndCrlf) {
  const std::string text = "\xEF\xBB\xBF" "Time of Day,Process Name,PID,Operation,Path\r\n"
                           "\"9:00:00.5\",\"a b.exe\",7,WriteFile,\"C:\\x,y \"\"q\"\".txt\"\r\n";
  auto r = parse_procmon_csv(text, ParseMode::Strict);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].object, "C:\\x,y \"q\".txt");
  EXPECT_EQ(r.events[0].timestamp, 9 * 3600 * 1000000LL + 500000);
  EXPECT_FALSE(r.events[0].result.has_value());
}

TEST(Ingest, TimeOfDayForms) {
  EXPECT_EQ(parse_time_of_day("12:00:00 AM"), 0);
  EXPECT_EQ(parse_time_of_day("1:02:03.0000010 PM"), ((13 * 60 + 2) * 60 + 3) * 1000000LL + 1);
  EXPECT_FALSE(parse_time_of_day("25:00:00"));
  EXPECT_FALSE(parse_time_of_day("abc"));
  EXPECT_FALSE(parse_time_of_day("1:00"));
}

TEST(Ingest, JsonlRoundTrip) {
  std::string csv = kHeader;
  for (int i = 0; i < 20; ++i)
    csv += "\"10:00:0" + std::to_string(i % 10) + "\",\"p.exe\",\"" + std::to_string(100 + i) +
           "\",\"CreateFile\",\"C:\\\\f" + std::to_string(i) + "\",\"SUCCESS\"\n";
  auto parsed = parse_procmon_csv(csv, ParseMode::Strict).events;
  ASSERT_EQ(parsed.size(), 20u);
  parsed[3].label = "B-PA";
  auto back = parse_canonical_jsonl(write_canonical_jsonl(parsed)).events;
  EXPECT_EQ(back, parsed);
}

TEST(Ingest, JsonlEmptyObjectIsMalformedLine1) {
  try {
    parse_canonical_jsonl("{}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedLine);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Ingest, SessionizeChunks) {
  std::vector<CanonicalEvent> events;
  for (int i = 0; i < 5; ++i) events.push_back(ev(static_cast<std::uint64_t>(i + 1), i * 10));
  auto w = sessionize(events, 2);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].events.size(), 2u);
  EXPECT_EQ(w[1].events.size(), 2u);
  EXPECT_EQ(w[2].events.size(), 1u);
  EXPECT_EQ(sessionize({ev(1, 0)}, 256).size(), 1u);
  EXPECT_THROW(sessionize(events, 0), Error);
}

TEST(Ingest, SessionizeIsOrderInvariantPartition) {
  Rng rng(3);
  std::vector<CanonicalEvent> events;
  for (int i = 0; i < 100; ++i)
    events.push_back(ev(static_cast<std::uint64_t>(i + 1), static_cast<std::int64_t>(rng.below(20))));
  auto sorted = sort_chronologically(events);
  auto shuffled = events;
  rng.shuffle(std::span(shuffled));
  auto a = sessionize(events, 7), b = sessionize(shuffled, 7);
  std::vector<CanonicalEvent> flat;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].events, b[i].events);
    flat.insert(flat.end(), a[i].events.begin(), a[i].events.end());
  }
  EXPECT_EQ(flat, sorted);
}

TEST(Ingest, PerPidWindows) {
  std::vector<CanonicalEvent> events{ev(1, 0), ev(2, 1), ev(3, 2)};
  events[1].subject_pid = 4;
  auto w = sessionize(events, SessionizeOptions{256, true, "x"});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].events.size(), 1u);
  EXPECT_EQ(w[0].events[0].subject_pid, 4);
  EXPECT_EQ(w[1].events.size(), 2u);
}

TEST(Ingest, LenientFuzzNeverThrowsPastHeader) {
  Rng rng(11);
  using namespace std::string_literals;
  const std::string alphabet = "\",\n\r abc:0123456789.\xEF\xBB\xBF\x00\xff"s;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string body;
    const auto len = rng.below(200);
    for (std::uint64_t i = 0; i < len; ++i) body += alphabet[rng.below(alphabet.size())];
    EXPECT_NO_THROW(parse_procmon_csv(std::string(kHeader) + body));
    // JSONL errors must be typed, never a crash or a foreign exception.
    try {
      parse_canonical_jsonl(body);
    } catch (const ParseError&) {
    }
  }
}
