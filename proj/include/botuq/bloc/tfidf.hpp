#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "botuq/bloc/encode.hpp"
#include "botuq/features.hpp"
#include "botuq/ingest/timeline.hpp"

namespace botuq::bloc {

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<std::int64_t> doc_freq;  // aligned with words, each in [1, total_docs]
  std::int64_t total_docs = 0;
};

// Top `max_words` words ranked by document frequency (ties broken by word,
// ascending) over a non-empty corpus of token lists.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::int64_t max_words);

// Term frequency weighted by corpus rarity: weight = count * (1 + ln(D/d)).
// Out-of-vocabulary tokens are ignored; a document with no vocabulary word
// gets a zero row.
FeatureMatrix<double> vectorize_tfidf(const std::vector<std::vector<std::string>>& corpus,
                                      const std::vector<std::string>& account_ids,
                                      const Vocabulary& vocabulary);

// Full pipeline for training data: encode every timeline, build the
// vocabulary, and weight the counts.
FeatureMatrix<double> featurize_timelines(
    const std::vector<ingest::AccountTimeline>& timelines, const BlocAlphabet& alphabet,
    std::int64_t max_words);

// Same encoding against a frozen vocabulary, for scoring new accounts with a
// trained model.
FeatureMatrix<double> featurize_timelines(
    const std::vector<ingest::AccountTimeline>& timelines, const BlocAlphabet& alphabet,
    const Vocabulary& vocabulary);

}  // namespace botuq::bloc
