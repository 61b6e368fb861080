#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace botuq::ingest {

enum class ActionKind { Tweet, Retweet, Reply };

ActionKind parse_action(const std::string& raw);
const char* action_name(ActionKind kind);

// Epoch seconds from either a numeric string or an ISO-8601 datetime
// ("2024-01-01T00:00:05Z", fractional seconds and +-HH:MM offsets accepted;
// a missing offset means UTC).
double parse_timestamp(const std::string& raw);

struct TimelineEvent {
  double timestamp = 0;  // epoch seconds
  ActionKind action = ActionKind::Tweet;
  std::vector<std::string> entities;  // content kinds, repeats meaningful
};

struct AccountTimeline {
  std::string account_id;
  std::vector<TimelineEvent> events;  // ascending timestamp
};

struct ParsedTimelines {
  std::vector<AccountTimeline> timelines;  // accounts in first-appearance order
  std::int64_t malformed = 0;              // structurally broken rows, skipped
};

enum class TimelineFormat { Jsonl, Csv };

// Reads an event log and groups it per account, sorting each account's events
// by timestamp (stable, so equal stamps keep file order).  Structurally broken
// rows — unparseable JSON, missing or mistyped required fields — are counted
// in `malformed` and skipped.  Rows that parse but carry a value outside the
// contract (unknown action name, garbled timestamp) raise ValidationError.
//
// JSONL rows: {"account_id": ..., "timestamp": ..., "action": ..., "entities": [...]}
// CSV rows:   account_id,timestamp,action,entities   with entities ';'-joined.
ParsedTimelines parse_timelines(const std::string& path, TimelineFormat format);

}  // namespace botuq::ingest
