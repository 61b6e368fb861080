#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "botuq/errors.hpp"

namespace botuq::uq {

enum class Decision { Unset, Bot, Human, Abstain };

// Which spread feeds the abstention rule.  Quadrature combines the epistemic
// and aleatoric components as the square root of the sum of their squares.
enum class UncertaintyKind { None, Epistemic, Aleatoric, Quadrature };

struct AccountPrediction {
  std::string account_id;
  double p_mean = 0;
  double sigma_epistemic = 0;
  double sigma_aleatoric = 0;
  double sigma_total = 0;
  std::int64_t n_weight_samples = 0;
  Decision decision = Decision::Unset;
};

const char* to_string(Decision d);
const char* to_string(UncertaintyKind k);
Decision decision_from_string(const std::string& text);
UncertaintyKind uncertainty_from_string(const std::string& text);

// Applies the k-sigma abstention band around 0.5: commit to Bot or Human only
// when |p_mean - 0.5| exceeds k_sigma times the selected spread, otherwise
// abstain.  Kind None is the plain threshold rule.
AccountPrediction decide(AccountPrediction pred, UncertaintyKind kind, double k_sigma);
std::vector<AccountPrediction> decide_all(std::vector<AccountPrediction> preds,
                                          UncertaintyKind kind, double k_sigma);

struct ClosurePair {
  std::string account_id;
  double z = 0;
};

struct ClosureResult {
  std::vector<ClosurePair> pairs;  // in the first argument's order
  std::int64_t n_excluded = 0;     // pairs where both epistemic spreads vanish
};

// Per-account agreement score between two independently trained models:
// z = (p_a - p_b) / sqrt(sigma_a^2 + sigma_b^2) with epistemic spreads.
// The id sets must coincide; order may differ.
ClosureResult closure_zscore(const std::vector<AccountPrediction>& a,
                             const std::vector<AccountPrediction>& b);

struct ProfileBin {
  double lo = 0;
  double hi = 0;
  std::int64_t count = 0;
  double mean_p = 0;
  double mean_epistemic = 0;
  double mean_aleatoric = 0;
  double mean_total = 0;
};

// Bins accounts by p_mean over [0, 1] and averages each spread within the
// bin.  Empty bins keep count 0 and NaN means so they are never mistaken for
// confident regions.
std::vector<ProfileBin> uncertainty_profile(const std::vector<AccountPrediction>& preds,
                                            int n_bins);

}  // namespace botuq::uq
