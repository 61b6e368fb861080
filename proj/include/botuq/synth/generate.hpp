#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "botuq/ingest/timeline.hpp"
#include "botuq/types.hpp"

namespace botuq::synth {

enum class SynthMode { Gaussian, BlocLike };

SynthMode synth_mode_from_string(const std::string& text);

// `overlap` runs from 0 (well separated classes) to 1 (identical classes);
// it shrinks the class contrast smoothly in between.
struct SynthConfig {
  SynthMode mode = SynthMode::Gaussian;
  Index n_per_class = 1000;
  double overlap = 0.0;
  Index dim = 8;  // gaussian feature width
  std::uint64_t seed = 0;
  Index min_events = 40;  // timeline lengths for the behavioural mode
  Index max_events = 120;
};

struct GaussianData {
  Matrix<double> features;  // humans first, then bots
  std::vector<std::string> ids;
  std::vector<int> labels;  // 0 human, 1 bot
};

// Two unit-variance blobs whose mean separation is 6 * (1 - overlap)^2, split
// evenly over the coordinates.  At overlap 1 the classes coincide.
GaussianData gaussian_benchmark(const SynthConfig& cfg);

struct TimelineData {
  std::vector<ingest::AccountTimeline> timelines;
  std::vector<std::string> ids;  // timeline order
  std::vector<int> labels;
};

// Behavioural benchmark: bots post in quick bursts of repetitive tweets laced
// with mentions and links, humans mix actions with minute-plus pauses.
// `overlap` pulls both archetypes toward their midpoint, erasing the contrast
// at 1.
TimelineData bloclike_benchmark(const SynthConfig& cfg);

}  // namespace botuq::synth
