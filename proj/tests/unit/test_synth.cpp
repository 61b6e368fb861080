#include <doctest.h>

#include <cmath>
#include <set>

#include "botuq/bloc/tfidf.hpp"
#include "botuq/errors.hpp"
#include "botuq/synth/generate.hpp"

using namespace botuq;

namespace {

// Mean class contrast along the all-ones direction.
double blob_contrast(const synth::GaussianData& data) {
  double mean[2] = {0, 0};
  std::int64_t count[2] = {0, 0};
  for (Index i = 0; i < data.features.rows(); ++i) {
    int y = data.labels[static_cast<std::size_t>(i)];
    mean[y] += data.features.row(i).sum();
    ++count[y];
  }
  return mean[1] / static_cast<double>(count[1]) -
         mean[0] / static_cast<double>(count[0]);
}

// Fraction of within-account gaps longer than a minute, per class.
std::pair<double, double> pause_rates(const synth::TimelineData& data) {
  double frac[2] = {0, 0};
  std::int64_t n[2] = {0, 0};
  for (std::size_t a = 0; a < data.timelines.size(); ++a) {
    const auto& events = data.timelines[a].events;
    std::int64_t pauses = 0;
    for (std::size_t e = 1; e < events.size(); ++e)
      if (events[e].timestamp - events[e - 1].timestamp > 60.0) ++pauses;
    int y = data.labels[a];
    frac[y] += static_cast<double>(pauses) / static_cast<double>(events.size() - 1);
    ++n[y];
  }
  return {frac[0] / static_cast<double>(n[0]), frac[1] / static_cast<double>(n[1])};
}

}  // namespace

TEST_CASE("gaussian benchmark puts two labelled blobs at the configured contrast") {
  synth::SynthConfig cfg;
  cfg.n_per_class = 400;
  cfg.dim = 8;
  cfg.overlap = 0.0;
  cfg.seed = 9;
  auto data = synth::gaussian_benchmark(cfg);
  REQUIRE(data.features.rows() == 800);
  REQUIRE(data.features.cols() == 8);
  REQUIRE(data.ids.size() == 800);
  REQUIRE(data.labels.size() == 800);
  std::set<std::string> unique(data.ids.begin(), data.ids.end());
  CHECK(unique.size() == 800);
  for (Index i = 0; i < 800; ++i)
    CHECK(data.labels[static_cast<std::size_t>(i)] == (i < 400 ? 0 : 1));

  // Sum over dim coordinates has mean +-dim * shift = +-sqrt(dim) * delta / 2,
  // so the class contrast along ones is sqrt(dim) * delta = sqrt(8) * 6.
  double expect = std::sqrt(8.0) * 6.0;
  double se = std::sqrt(8.0 / 400.0) * 2.0;  // spread of the contrast estimate
  CHECK(std::abs(blob_contrast(data) - expect) < 5 * se);

  cfg.overlap = 1.0;
  auto merged = synth::gaussian_benchmark(cfg);
  CHECK(std::abs(blob_contrast(merged)) < 5 * se);

  cfg.overlap = 0.5;
  auto mid = synth::gaussian_benchmark(cfg);
  double c_mid = blob_contrast(mid);
  CHECK(c_mid < blob_contrast(data));
  CHECK(c_mid > blob_contrast(merged));
  CHECK(c_mid == doctest::Approx(std::sqrt(8.0) * 6.0 * 0.25).epsilon(0.2));
}

TEST_CASE("gaussian benchmark is deterministic and validates its config") {
  synth::SynthConfig cfg;
  cfg.n_per_class = 20;
  cfg.dim = 3;
  cfg.seed = 4;
  auto a = synth::gaussian_benchmark(cfg);
  auto b = synth::gaussian_benchmark(cfg);
  CHECK(a.features == b.features);
  CHECK(a.ids == b.ids);

  cfg.overlap = 1.5;
  CHECK_THROWS_AS(synth::gaussian_benchmark(cfg), ValidationError);
  cfg.overlap = 0.0;
  cfg.n_per_class = 0;
  CHECK_THROWS_AS(synth::gaussian_benchmark(cfg), ValidationError);
  cfg.n_per_class = 10;
  cfg.dim = 0;
  CHECK_THROWS_AS(synth::gaussian_benchmark(cfg), ValidationError);
}

TEST_CASE("behavioural benchmark separates the archetypes and closes the gap") {
  synth::SynthConfig cfg;
  cfg.mode = synth::SynthMode::BlocLike;
  cfg.n_per_class = 60;
  cfg.seed = 17;
  cfg.min_events = 30;
  cfg.max_events = 60;

  cfg.overlap = 0.0;
  auto apart = synth::bloclike_benchmark(cfg);
  REQUIRE(apart.timelines.size() == 120);
  REQUIRE(apart.labels.size() == 120);
  for (std::size_t a = 0; a < apart.timelines.size(); ++a) {
    const auto& tl = apart.timelines[a];
    CHECK(tl.account_id == apart.ids[a]);
    CHECK(tl.events.size() >= 30);
    CHECK(tl.events.size() <= 60);
    for (std::size_t e = 0; e < tl.events.size(); ++e) {
      if (e > 0) CHECK(tl.events[e].timestamp >= tl.events[e - 1].timestamp);
      CHECK(tl.events[e].entities.front() == "text");
    }
  }
  auto [human_pause, bot_pause] = pause_rates(apart);
  CHECK(human_pause > bot_pause + 0.3);  // humans idle, bots burst

  cfg.overlap = 1.0;
  auto close = synth::bloclike_benchmark(cfg);
  auto [hp, bp] = pause_rates(close);
  CHECK(std::abs(hp - bp) < 0.06);  // identical archetypes at full overlap

  auto again = synth::bloclike_benchmark(cfg);
  REQUIRE(again.timelines.size() == close.timelines.size());
  for (std::size_t a = 0; a < close.timelines.size(); ++a) {
    CHECK(again.timelines[a].events.size() == close.timelines[a].events.size());
    for (std::size_t e = 0; e < close.timelines[a].events.size(); ++e)
      CHECK(again.timelines[a].events[e].timestamp ==
            close.timelines[a].events[e].timestamp);
  }

  cfg.min_events = 5;
  cfg.max_events = 4;
  CHECK_THROWS_AS(synth::bloclike_benchmark(cfg), ValidationError);
}

TEST_CASE("behavioural benchmark flows straight into the featurizer") {
  synth::SynthConfig cfg;
  cfg.mode = synth::SynthMode::BlocLike;
  cfg.n_per_class = 15;
  cfg.seed = 23;
  auto data = synth::bloclike_benchmark(cfg);
  auto feats = bloc::featurize_timelines(data.timelines, bloc::BlocAlphabet::defaults(), 64);
  CHECK(feats.weights.rows() == 30);
  CHECK(feats.weights.cols() <= 64);
  CHECK(feats.weights.cols() > 0);
  CHECK(feats.weights.allFinite());
  CHECK((feats.weights.array() >= 0).all());
}

TEST_CASE("synthetic mode names parse") {
  CHECK(synth::synth_mode_from_string("gaussian") == synth::SynthMode::Gaussian);
  CHECK(synth::synth_mode_from_string("bloc") == synth::SynthMode::BlocLike);
  CHECK_THROWS_AS(synth::synth_mode_from_string("quantum"), ValidationError);
}
