#include "botuq/bloc/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "botuq/errors.hpp"

namespace botuq::bloc {

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::int64_t max_words) {
  if (corpus.empty()) throw ValidationError("build_vocabulary: empty corpus");
  if (max_words < 1) throw ValidationError("build_vocabulary: max_words must be positive");
  std::map<std::string, std::int64_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string> unique(doc.begin(), doc.end());
    for (const auto& w : unique) ++df[w];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.total_docs = static_cast<std::int64_t>(corpus.size());
  std::size_t keep = std::min<std::size_t>(ranked.size(),
                                           static_cast<std::size_t>(max_words));
  vocab.words.reserve(keep);
  vocab.doc_freq.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    vocab.words.push_back(ranked[i].first);
    vocab.doc_freq.push_back(ranked[i].second);
  }
  return vocab;
}

FeatureMatrix<double> vectorize_tfidf(const std::vector<std::vector<std::string>>& corpus,
                                      const std::vector<std::string>& account_ids,
                                      const Vocabulary& vocabulary) {
  if (corpus.size() != account_ids.size())
    throw ValidationError("vectorize_tfidf: corpus and account id counts differ");
  if (vocabulary.words.empty())
    throw ValidationError("vectorize_tfidf: empty vocabulary");
  if (vocabulary.words.size() != vocabulary.doc_freq.size() || vocabulary.total_docs < 1)
    throw ValidationError("vectorize_tfidf: inconsistent vocabulary");
  const Index k = static_cast<Index>(vocabulary.words.size());
  Vector<double> idf(k);
  std::unordered_map<std::string, Index> column;
  column.reserve(vocabulary.words.size());
  for (Index j = 0; j < k; ++j) {
    std::int64_t d = vocabulary.doc_freq[j];
    if (d < 1 || d > vocabulary.total_docs)
      throw ValidationError("vectorize_tfidf: document frequency for '" +
                            vocabulary.words[j] + "' outside [1, total_docs]");
    idf(j) = 1.0 + std::log(static_cast<double>(vocabulary.total_docs) /
                            static_cast<double>(d));
    column.emplace(vocabulary.words[j], j);
  }

  FeatureMatrix<double> out;
  out.vocabulary = vocabulary.words;
  out.doc_freq = vocabulary.doc_freq;
  out.total_docs = vocabulary.total_docs;
  out.account_ids = account_ids;
  out.weights = Matrix<double>::Zero(static_cast<Index>(corpus.size()), k);
  for (Index i = 0; i < static_cast<Index>(corpus.size()); ++i) {
    for (const auto& token : corpus[i]) {
      auto it = column.find(token);
      if (it != column.end()) out.weights(i, it->second) += 1.0;
    }
    out.weights.row(i).array() *= idf.transpose().array();
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> encode_corpus(
    const std::vector<ingest::AccountTimeline>& timelines, const BlocAlphabet& alphabet,
    std::vector<std::string>& ids) {
  alphabet.validate();
  if (timelines.empty())
    throw ValidationError("featurize_timelines: no timelines to encode");
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(timelines.size());
  ids.reserve(timelines.size());
  for (const auto& tl : timelines) {
    corpus.push_back(bloc_document(tl, alphabet));
    ids.push_back(tl.account_id);
  }
  return corpus;
}

}  // namespace

FeatureMatrix<double> featurize_timelines(
    const std::vector<ingest::AccountTimeline>& timelines, const BlocAlphabet& alphabet,
    std::int64_t max_words) {
  std::vector<std::string> ids;
  auto corpus = encode_corpus(timelines, alphabet, ids);
  Vocabulary vocab = build_vocabulary(corpus, max_words);
  return vectorize_tfidf(corpus, ids, vocab);
}

FeatureMatrix<double> featurize_timelines(
    const std::vector<ingest::AccountTimeline>& timelines, const BlocAlphabet& alphabet,
    const Vocabulary& vocabulary) {
  std::vector<std::string> ids;
  auto corpus = encode_corpus(timelines, alphabet, ids);
  return vectorize_tfidf(corpus, ids, vocabulary);
}

}  // namespace botuq::bloc
