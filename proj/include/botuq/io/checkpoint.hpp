#pragma once

#include <optional>
#include <string>

#include "botuq/bloc/tfidf.hpp"
#include "botuq/bnn/model.hpp"

namespace botuq::io {

struct Checkpoint {
  bnn::BayesianModel<double> model;
  std::optional<bloc::Vocabulary> vocabulary;  // present for behavioural features
};

// Versioned JSON snapshot of a model: architecture, every parameter, the
// normalization statistics, and optionally the vocabulary the features were
// built with.  Doubles round-trip exactly.
void save_checkpoint(const std::string& path, bnn::BayesianModel<double>& model,
                     const bloc::Vocabulary* vocabulary = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Stand-alone vocabulary sidecar, for featurizing new timelines with a frozen
// word list.
void save_vocabulary(const std::string& path, const bloc::Vocabulary& vocabulary);
bloc::Vocabulary load_vocabulary(const std::string& path);

}  // namespace botuq::io
