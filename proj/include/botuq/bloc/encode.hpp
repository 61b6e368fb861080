#pragma once

#include <string>
#include <utility>
#include <vector>

#include "botuq/ingest/timeline.hpp"

namespace botuq::bloc {

// Symbol tables for turning a timeline into strings.  `content` order matters:
// within one event's group, symbols are emitted in this order.
struct BlocAlphabet {
  std::vector<std::pair<ingest::ActionKind, char>> actions;
  std::vector<std::pair<std::string, char>> content;
  char pause = '.';
  double pause_threshold_seconds = 60.0;

  // tweet T, retweet r, reply p; media E, mention m, url U, text t; pause '.'
  // after gaps longer than a minute.
  static BlocAlphabet defaults();

  // Distinct symbols everywhere, a positive pause threshold, non-empty maps.
  void validate() const;

  char action_symbol(ingest::ActionKind kind) const;
};

// One symbol per event in time order, with a pause mark between consecutive
// events whose gap strictly exceeds the threshold.  Empty timeline, empty
// string.
std::string encode_actions(const ingest::AccountTimeline& timeline,
                           const BlocAlphabet& alphabet);

// One parenthesized group per event; inside a group each configured content
// kind contributes its symbol once per occurrence among the event's entities,
// in alphabet order.  Unknown entity kinds are rejected.  No pause marks.
std::string encode_content(const ingest::AccountTimeline& timeline,
                           const BlocAlphabet& alphabet);

// Sliding window of width 2, stride 1, over the raw string (pauses and
// parentheses included).  A 1-character string is its own token; empty in,
// empty out.
std::vector<std::string> tokenize_bigrams(const std::string& s);

// The account's bag of words: action bigrams followed by content bigrams.
std::vector<std::string> bloc_document(const ingest::AccountTimeline& timeline,
                                       const BlocAlphabet& alphabet);

}  // namespace botuq::bloc
