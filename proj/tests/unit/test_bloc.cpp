#include <cmath>
#include <string>
#include <vector>

#include "botuq/bloc/encode.hpp"
#include "botuq/bloc/tfidf.hpp"
#include "botuq/errors.hpp"
#include "doctest.h"

using namespace botuq;
using namespace botuq::bloc;
using ingest::AccountTimeline;
using ingest::ActionKind;
using ingest::TimelineEvent;

namespace {

TimelineEvent ev(double t, ActionKind a, std::vector<std::string> entities = {}) {
  return TimelineEvent{t, a, std::move(entities)};
}

}  // namespace

TEST_CASE("encode_actions: symbols in time order with pause marks after long gaps") {
  AccountTimeline tl{"acct",
                     {ev(0, ActionKind::Reply), ev(100, ActionKind::Tweet),
                      ev(300, ActionKind::Retweet)}};
  CHECK(encode_actions(tl, BlocAlphabet::defaults()) == "p.T.r");
}

TEST_CASE("encode_actions: the pause threshold is strict") {
  BlocAlphabet alphabet = BlocAlphabet::defaults();
  AccountTimeline at_threshold{"a", {ev(0, ActionKind::Tweet), ev(60, ActionKind::Tweet)}};
  CHECK(encode_actions(at_threshold, alphabet) == "TT");
  AccountTimeline just_over{"a",
                            {ev(0, ActionKind::Tweet), ev(60.001, ActionKind::Tweet)}};
  CHECK(encode_actions(just_over, alphabet) == "T.T");
}

TEST_CASE("encode_actions: empty timeline encodes to the empty string") {
  AccountTimeline tl{"quiet", {}};
  CHECK(encode_actions(tl, BlocAlphabet::defaults()).empty());
  CHECK(encode_content(tl, BlocAlphabet::defaults()).empty());
}

TEST_CASE("encode_content: one group per event, symbols in alphabet order") {
  AccountTimeline tl{
      "acct",
      {ev(0, ActionKind::Tweet, {"media", "mention", "text"}),
       ev(1000, ActionKind::Tweet, {"mention", "mention", "text"}),
       ev(9000, ActionKind::Tweet,
          {"mention", "mention", "mention", "mention", "mention", "url", "text"})}};
  CHECK(encode_content(tl, BlocAlphabet::defaults()) == "(Emt)(mmt)(mmmmmUt)");
}

TEST_CASE("encode_content: input entity order does not matter") {
  AccountTimeline tl{"acct", {ev(0, ActionKind::Tweet, {"text", "url", "mention", "media"})}};
  CHECK(encode_content(tl, BlocAlphabet::defaults()) == "(EmUt)");
}

TEST_CASE("encode_content: unknown entity kinds are rejected") {
  AccountTimeline tl{"acct", {ev(0, ActionKind::Tweet, {"hologram"})}};
  CHECK_THROWS_AS(encode_content(tl, BlocAlphabet::defaults()), ValidationError);
}

TEST_CASE("alphabet: validation catches reused symbols and bad thresholds") {
  BlocAlphabet ok = BlocAlphabet::defaults();
  CHECK_NOTHROW(ok.validate());

  BlocAlphabet reused = BlocAlphabet::defaults();
  reused.pause = 'T';
  CHECK_THROWS_AS(reused.validate(), ValidationError);

  BlocAlphabet zeroth = BlocAlphabet::defaults();
  zeroth.pause_threshold_seconds = 0;
  CHECK_THROWS_AS(zeroth.validate(), ValidationError);

  BlocAlphabet paren = BlocAlphabet::defaults();
  paren.content[0].second = '(';
  CHECK_THROWS_AS(paren.validate(), ValidationError);
}

TEST_CASE("tokenize_bigrams: window of two, stride one, raw characters") {
  CHECK(tokenize_bigrams("p.T.r") ==
        std::vector<std::string>{"p.", ".T", "T.", ".r"});
  CHECK(tokenize_bigrams("(mt)") == std::vector<std::string>{"(m", "mt", "t)"});
  CHECK(tokenize_bigrams("T") == std::vector<std::string>{"T"});
  CHECK(tokenize_bigrams("").empty());
}

TEST_CASE("build_vocabulary: ranked by document frequency, ties by word") {
  std::vector<std::vector<std::string>> corpus{
      {"TT", "T.", "TT"},  // repeats inside a document count once for frequency
      {"TT", "rr"},
      {"rr", "T."},
  };
  Vocabulary v = build_vocabulary(corpus, 10);
  CHECK(v.total_docs == 3);
  REQUIRE(v.words.size() == 3);
  // T., TT, rr all appear in two documents; alphabetical order breaks the tie.
  CHECK(v.words == std::vector<std::string>{"T.", "TT", "rr"});
  CHECK(v.doc_freq == std::vector<std::int64_t>{2, 2, 2});

  SUBCASE("max_words keeps the top of the ranking") {
    std::vector<std::vector<std::string>> c2{{"aa", "bb"}, {"aa"}, {"aa", "cc"}};
    Vocabulary top = build_vocabulary(c2, 2);
    CHECK(top.words == std::vector<std::string>{"aa", "bb"});
  }
  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(build_vocabulary({}, 5), ValidationError);
  }
}

TEST_CASE("vectorize_tfidf: counts weighted by 1 + ln(D/d)") {
  // Word seen 3 times in a document, present in 1 of 2 documents.
  std::vector<std::vector<std::string>> corpus{{"TT", "TT", "TT"}, {"rr"}};
  Vocabulary v = build_vocabulary(corpus, 10);
  FeatureMatrix<double> f = vectorize_tfidf(corpus, {"a", "b"}, v);
  Index tt = -1;
  for (Index j = 0; j < f.cols(); ++j)
    if (f.vocabulary[j] == "TT") tt = j;
  REQUIRE(tt >= 0);
  double expect = 3.0 * (1.0 + std::log(2.0 / 1.0));
  CHECK(f.weights(0, tt) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(f.weights(1, tt) == 0.0);
}

TEST_CASE("vectorize_tfidf: out-of-vocabulary tokens are ignored") {
  Vocabulary v;
  v.words = {"TT"};
  v.doc_freq = {1};
  v.total_docs = 2;
  std::vector<std::vector<std::string>> corpus{{"zz", "zz"}, {"TT", "zz"}};
  FeatureMatrix<double> f = vectorize_tfidf(corpus, {"a", "b"}, v);
  CHECK(f.weights.row(0).isZero());  // nothing in vocabulary: zero row
  CHECK(f.weights(1, 0) == doctest::Approx(1.0 + std::log(2.0)));
}

TEST_CASE("vectorize_tfidf: inconsistent vocabulary statistics are rejected") {
  Vocabulary v;
  v.words = {"TT"};
  v.doc_freq = {3};
  v.total_docs = 2;  // d > D is impossible
  CHECK_THROWS_AS(vectorize_tfidf({{"TT"}}, {"a"}, v), ValidationError);
}

TEST_CASE("featurize_timelines: end to end over the fixture accounts") {
  AccountTimeline human{"human",
                        {ev(0, ActionKind::Reply, {"text"}),
                         ev(100, ActionKind::Tweet, {"media", "text"}),
                         ev(300, ActionKind::Retweet, {"url", "text"})}};
  AccountTimeline bot{"bot",
                      {ev(0, ActionKind::Tweet, {"mention", "text"}),
                       ev(1, ActionKind::Tweet, {"mention", "text"}),
                       ev(2, ActionKind::Tweet, {"mention", "text"})}};
  FeatureMatrix<double> f = featurize_timelines({human, bot}, BlocAlphabet::defaults(), 64);
  CHECK(f.rows() == 2);
  CHECK(f.account_ids == std::vector<std::string>{"human", "bot"});
  CHECK(f.total_docs == 2);
  CHECK(f.cols() >= 4);
  CHECK((f.weights.array() >= 0).all());
  // The bot's burst has no pauses, so any ".x" word scores zero for it.
  for (Index j = 0; j < f.cols(); ++j)
    if (f.vocabulary[j].front() == '.') CHECK(f.weights(1, j) == 0.0);

  SUBCASE("a frozen vocabulary reproduces the same weights for the same accounts") {
    Vocabulary frozen;
    frozen.words = f.vocabulary;
    frozen.doc_freq = f.doc_freq;
    frozen.total_docs = f.total_docs;
    FeatureMatrix<double> again =
        featurize_timelines({human, bot}, BlocAlphabet::defaults(), frozen);
    CHECK(again.weights.isApprox(f.weights));
  }
}
