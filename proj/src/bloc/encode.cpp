#include "botuq/bloc/encode.hpp"

#include <set>

#include "botuq/errors.hpp"

namespace botuq::bloc {

using ingest::AccountTimeline;
using ingest::ActionKind;

BlocAlphabet BlocAlphabet::defaults() {
  BlocAlphabet a;
  a.actions = {{ActionKind::Tweet, 'T'}, {ActionKind::Retweet, 'r'},
               {ActionKind::Reply, 'p'}};
  a.content = {{"media", 'E'}, {"mention", 'm'}, {"url", 'U'}, {"text", 't'}};
  a.pause = '.';
  a.pause_threshold_seconds = 60.0;
  return a;
}

void BlocAlphabet::validate() const {
  if (actions.empty()) throw ValidationError("BlocAlphabet: no action symbols");
  if (content.empty()) throw ValidationError("BlocAlphabet: no content symbols");
  if (!(pause_threshold_seconds > 0))
    throw ValidationError("BlocAlphabet: pause threshold must be positive");
  std::set<char> symbols;
  auto add = [&](char c, const char* where) {
    if (c == '(' || c == ')')
      throw ValidationError(std::string("BlocAlphabet: parentheses are reserved (") +
                            where + ")");
    if (!symbols.insert(c).second)
      throw ValidationError(std::string("BlocAlphabet: symbol '") + c + "' reused (" +
                            where + ")");
  };
  for (const auto& [kind, c] : actions) add(c, "actions");
  for (const auto& [name, c] : content) add(c, "content");
  add(pause, "pause");
}

char BlocAlphabet::action_symbol(ActionKind kind) const {
  for (const auto& [k, c] : actions)
    if (k == kind) return c;
  throw ValidationError("BlocAlphabet: no symbol for action '" +
                        std::string(ingest::action_name(kind)) + "'");
}

std::string encode_actions(const AccountTimeline& timeline, const BlocAlphabet& alphabet) {
  std::string out;
  out.reserve(timeline.events.size() * 2);
  for (std::size_t i = 0; i < timeline.events.size(); ++i) {
    if (i > 0) {
      double gap = timeline.events[i].timestamp - timeline.events[i - 1].timestamp;
      if (gap > alphabet.pause_threshold_seconds) out.push_back(alphabet.pause);
    }
    out.push_back(alphabet.action_symbol(timeline.events[i].action));
  }
  return out;
}

std::string encode_content(const AccountTimeline& timeline, const BlocAlphabet& alphabet) {
  std::string out;
  for (const auto& event : timeline.events) {
    for (const auto& entity : event.entities) {
      bool known = false;
      for (const auto& [name, c] : alphabet.content)
        if (name == entity) {
          known = true;
          break;
        }
      if (!known)
        throw ValidationError("encode_content: unknown entity kind '" + entity + "'");
    }
    out.push_back('(');
    for (const auto& [name, c] : alphabet.content) {
      for (const auto& entity : event.entities)
        if (entity == name) out.push_back(c);
    }
    out.push_back(')');
  }
  return out;
}

std::vector<std::string> tokenize_bigrams(const std::string& s) {
  if (s.empty()) return {};
  if (s.size() == 1) return {s};
  std::vector<std::string> tokens;
  tokens.reserve(s.size() - 1);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) tokens.push_back(s.substr(i, 2));
  return tokens;
}

std::vector<std::string> bloc_document(const AccountTimeline& timeline,
                                       const BlocAlphabet& alphabet) {
  std::vector<std::string> doc = tokenize_bigrams(encode_actions(timeline, alphabet));
  std::vector<std::string> content = tokenize_bigrams(encode_content(timeline, alphabet));
  doc.insert(doc.end(), content.begin(), content.end());
  return doc;
}

}  // namespace botuq::bloc
