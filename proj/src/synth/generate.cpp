#include "botuq/synth/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "botuq/errors.hpp"
#include "botuq/rng.hpp"

namespace botuq::synth {

namespace {

void check_common(const SynthConfig& cfg) {
  if (cfg.n_per_class < 1) throw ValidationError("synth: n_per_class must be positive");
  if (!(cfg.overlap >= 0.0 && cfg.overlap <= 1.0))
    throw ValidationError("synth: overlap must lie in [0, 1]");
}

std::string account_name(int label, Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06lld", label == 1 ? "bot" : "human",
                static_cast<long long>(i));
  return buf;
}

// Class contrast as a function of overlap.
double separation(double overlap) { return 6.0 * (1.0 - overlap) * (1.0 - overlap); }

// Behavioural archetype knobs; `blend` pulls a class toward the midpoint of
// the two archetypes.
struct Archetype {
  double p_tweet, p_retweet;  // reply takes the rest
  double gap_log_mean, gap_log_sigma;
  double p_media, p_mention, p_url;
};

Archetype human_archetype() { return {0.50, 0.25, std::log(300.0), 1.2, 0.25, 0.20, 0.15}; }
Archetype bot_archetype() { return {0.85, 0.10, std::log(15.0), 0.6, 0.10, 0.70, 0.50}; }

Archetype blend(const Archetype& own, const Archetype& other, double overlap) {
  auto mix = [&](double a, double b) { return (1.0 - overlap) * a + overlap * (a + b) / 2.0; };
  Archetype out;
  out.p_tweet = mix(own.p_tweet, other.p_tweet);
  out.p_retweet = mix(own.p_retweet, other.p_retweet);
  out.gap_log_mean = mix(own.gap_log_mean, other.gap_log_mean);
  out.gap_log_sigma = mix(own.gap_log_sigma, other.gap_log_sigma);
  out.p_media = mix(own.p_media, other.p_media);
  out.p_mention = mix(own.p_mention, other.p_mention);
  out.p_url = mix(own.p_url, other.p_url);
  return out;
}

}  // namespace

SynthMode synth_mode_from_string(const std::string& text) {
  if (text == "gaussian") return SynthMode::Gaussian;
  if (text == "bloc") return SynthMode::BlocLike;
  throw ValidationError("unknown synthetic mode '" + text + "' (expected gaussian or bloc)");
}

GaussianData gaussian_benchmark(const SynthConfig& cfg) {
  check_common(cfg);
  if (cfg.dim < 1) throw ValidationError("synth: dim must be positive");
  double shift = separation(cfg.overlap) / (2.0 * std::sqrt(static_cast<double>(cfg.dim)));

  Rng rng = Rng(cfg.seed).derive("gaussian");
  GaussianData data;
  data.features.resize(2 * cfg.n_per_class, cfg.dim);
  for (int label : {0, 1}) {
    double center = label == 1 ? shift : -shift;
    for (Index i = 0; i < cfg.n_per_class; ++i) {
      Index row = label * cfg.n_per_class + i;
      for (Index j = 0; j < cfg.dim; ++j) data.features(row, j) = center + rng.normal();
      data.ids.push_back(account_name(label, i));
      data.labels.push_back(label);
    }
  }
  return data;
}

TimelineData bloclike_benchmark(const SynthConfig& cfg) {
  check_common(cfg);
  if (cfg.min_events < 2 || cfg.max_events < cfg.min_events)
    throw ValidationError("synth: bad event count range");

  Archetype human = blend(human_archetype(), bot_archetype(), cfg.overlap);
  Archetype bot = blend(bot_archetype(), human_archetype(), cfg.overlap);

  Rng rng = Rng(cfg.seed).derive("timelines");
  TimelineData data;
  for (int label : {0, 1}) {
    const Archetype& arch = label == 1 ? bot : human;
    for (Index i = 0; i < cfg.n_per_class; ++i) {
      ingest::AccountTimeline timeline;
      timeline.account_id = account_name(label, i);
      Index n_events =
          cfg.min_events + static_cast<Index>(rng.integer(
                               static_cast<std::uint64_t>(cfg.max_events - cfg.min_events + 1)));
      // Spread the accounts over a year so nothing hinges on a shared origin.
      double t = 1.6e9 + 3.15e7 * rng.uniform();
      for (Index e = 0; e < n_events; ++e) {
        ingest::TimelineEvent event;
        event.timestamp = std::floor(t);
        double u = rng.uniform();
        event.action = u < arch.p_tweet ? ingest::ActionKind::Tweet
                       : u < arch.p_tweet + arch.p_retweet ? ingest::ActionKind::Retweet
                                                           : ingest::ActionKind::Reply;
        event.entities.push_back("text");
        if (rng.uniform() < arch.p_media) event.entities.push_back("media");
        if (rng.uniform() < arch.p_mention) {
          event.entities.push_back("mention");
          // Bursty accounts often tag several handles at once.
          while (rng.uniform() < arch.p_mention / 2.0) event.entities.push_back("mention");
        }
        if (rng.uniform() < arch.p_url) event.entities.push_back("url");
        timeline.events.push_back(std::move(event));
        t += std::exp(arch.gap_log_mean + arch.gap_log_sigma * rng.normal());
      }
      data.ids.push_back(timeline.account_id);
      data.labels.push_back(label);
      data.timelines.push_back(std::move(timeline));
    }
  }
  return data;
}

}  // namespace botuq::synth
