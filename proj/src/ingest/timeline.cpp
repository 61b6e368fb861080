#include "botuq/ingest/timeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

#include "botuq/errors.hpp"
#include "botuq/io/csv.hpp"

namespace botuq::ingest {

using nlohmann::json;

ActionKind parse_action(const std::string& raw) {
  if (raw == "tweet") return ActionKind::Tweet;
  if (raw == "retweet") return ActionKind::Retweet;
  if (raw == "reply") return ActionKind::Reply;
  throw ValidationError("parse_action: unknown action '" + raw + "'");
}

const char* action_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::Tweet: return "tweet";
    case ActionKind::Retweet: return "retweet";
    case ActionKind::Reply: return "reply";
  }
  return "?";
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date; pure arithmetic so no
// dependence on the host timezone database.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool all_digits(const std::string& s, std::size_t from, std::size_t count) {
  if (from + count > s.size()) return false;
  for (std::size_t i = from; i < from + count; ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

double parse_timestamp(const std::string& raw) {
  if (raw.empty()) throw ValidationError("parse_timestamp: empty timestamp");
  // ISO-8601 starts YYYY-MM-DD; anything else must be a plain number.
  bool iso = raw.size() >= 10 && raw[4] == '-' && raw[7] == '-' &&
             all_digits(raw, 0, 4) && all_digits(raw, 5, 2) && all_digits(raw, 8, 2);
  if (!iso) {
    char* end = nullptr;
    double v = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0')
      throw ValidationError("parse_timestamp: cannot parse '" + raw + "'");
    return v;
  }

  auto fail = [&]() -> double {
    throw ValidationError("parse_timestamp: malformed ISO-8601 datetime '" + raw + "'");
  };
  std::int64_t year = std::atoll(raw.substr(0, 4).c_str());
  unsigned month = static_cast<unsigned>(std::atoi(raw.substr(5, 2).c_str()));
  unsigned day = static_cast<unsigned>(std::atoi(raw.substr(8, 2).c_str()));
  if (month < 1 || month > 12 || day < 1 || day > 31) return fail();

  double seconds_in_day = 0;
  double offset_seconds = 0;
  std::size_t i = 10;
  if (i < raw.size()) {
    if (raw[i] != 'T' && raw[i] != ' ') return fail();
    ++i;
    if (!all_digits(raw, i, 2) || raw[i + 2] != ':' || !all_digits(raw, i + 3, 2) ||
        raw[i + 5] != ':' || !all_digits(raw, i + 6, 2))
      return fail();
    int hh = std::atoi(raw.substr(i, 2).c_str());
    int mm = std::atoi(raw.substr(i + 3, 2).c_str());
    int ss = std::atoi(raw.substr(i + 6, 2).c_str());
    if (hh > 23 || mm > 59 || ss > 60) return fail();
    i += 8;
    double frac = 0;
    if (i < raw.size() && raw[i] == '.') {
      std::size_t j = i + 1;
      double scale = 0.1;
      if (j >= raw.size() || !std::isdigit(static_cast<unsigned char>(raw[j]))) return fail();
      while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) {
        frac += (raw[j] - '0') * scale;
        scale *= 0.1;
        ++j;
      }
      i = j;
    }
    seconds_in_day = hh * 3600.0 + mm * 60.0 + ss + frac;
    if (i < raw.size()) {
      char c = raw[i];
      if (c == 'Z') {
        ++i;
      } else if (c == '+' || c == '-') {
        ++i;
        if (!all_digits(raw, i, 2)) return fail();
        int oh = std::atoi(raw.substr(i, 2).c_str());
        i += 2;
        if (i < raw.size() && raw[i] == ':') ++i;
        int om = 0;
        if (all_digits(raw, i, 2)) {
          om = std::atoi(raw.substr(i, 2).c_str());
          i += 2;
        }
        offset_seconds = (oh * 3600.0 + om * 60.0) * (c == '+' ? 1 : -1);
      } else {
        return fail();
      }
    }
    if (i != raw.size()) return fail();
  }
  return days_from_civil(year, month, day) * 86400.0 + seconds_in_day - offset_seconds;
}

namespace {

struct Builder {
  std::vector<AccountTimeline> timelines;
  std::unordered_map<std::string, std::size_t> index;

  void add(const std::string& id, TimelineEvent event) {
    auto [it, fresh] = index.try_emplace(id, timelines.size());
    if (fresh) timelines.push_back(AccountTimeline{id, {}});
    timelines[it->second].events.push_back(std::move(event));
  }

  ParsedTimelines finish(std::int64_t malformed) {
    for (auto& tl : timelines)
      std::stable_sort(tl.events.begin(), tl.events.end(),
                       [](const TimelineEvent& a, const TimelineEvent& b) {
                         return a.timestamp < b.timestamp;
                       });
    return ParsedTimelines{std::move(timelines), malformed};
  }
};

ParsedTimelines parse_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("parse_timelines: cannot open '" + path + "'");
  Builder builder;
  std::int64_t malformed = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) continue;
    json row = json::parse(line, nullptr, false);
    bool shaped = row.is_object() && row.contains("account_id") &&
                  row["account_id"].is_string() && row.contains("timestamp") &&
                  (row["timestamp"].is_string() || row["timestamp"].is_number()) &&
                  row.contains("action") && row["action"].is_string() &&
                  row.contains("entities") && row["entities"].is_array() &&
                  std::all_of(row["entities"].begin(), row["entities"].end(),
                              [](const json& e) { return e.is_string(); });
    if (!shaped) {
      ++malformed;
      continue;
    }
    TimelineEvent event;
    event.timestamp = row["timestamp"].is_number()
                          ? row["timestamp"].get<double>()
                          : parse_timestamp(row["timestamp"].get<std::string>());
    event.action = parse_action(row["action"].get<std::string>());
    for (const auto& e : row["entities"]) event.entities.push_back(e.get<std::string>());
    builder.add(row["account_id"].get<std::string>(), std::move(event));
  }
  return builder.finish(malformed);
}

ParsedTimelines parse_csv_log(const std::string& path) {
  io::CsvTable table = io::read_csv(path);
  Builder builder;
  std::int64_t malformed = 0;
  if (table.rows.empty()) return builder.finish(0);
  const std::vector<std::string> expected{"account_id", "timestamp", "action", "entities"};
  if (table.rows[0] != expected)
    throw ValidationError(
        "parse_timelines: CSV header must be account_id,timestamp,action,entities");
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 4 || row[0].empty()) {
      ++malformed;
      continue;
    }
    TimelineEvent event;
    event.timestamp = parse_timestamp(row[1]);
    event.action = parse_action(row[2]);
    const std::string& ent = row[3];
    std::size_t start = 0;
    while (start <= ent.size() && !ent.empty()) {
      std::size_t sep = ent.find(';', start);
      std::string piece = ent.substr(start, sep == std::string::npos ? sep : sep - start);
      if (!piece.empty()) event.entities.push_back(piece);
      if (sep == std::string::npos) break;
      start = sep + 1;
    }
    builder.add(row[0], std::move(event));
  }
  return builder.finish(malformed);
}

}  // namespace

ParsedTimelines parse_timelines(const std::string& path, TimelineFormat format) {
  return format == TimelineFormat::Jsonl ? parse_jsonl(path) : parse_csv_log(path);
}

}  // namespace botuq::ingest
