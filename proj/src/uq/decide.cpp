#include "botuq/uq/prediction.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace botuq::uq {

namespace {
// Below this, an epistemic spread is treated as numerically zero when pairing
// two models for a closure score.
constexpr double kMinClosureSigma = 1e-9;
}  // namespace

const char* to_string(Decision d) {
  switch (d) {
    case Decision::Unset: return "unset";
    case Decision::Bot: return "bot";
    case Decision::Human: return "human";
    case Decision::Abstain: return "abstain";
  }
  throw ValidationError("to_string: bad decision value");
}

const char* to_string(UncertaintyKind k) {
  switch (k) {
    case UncertaintyKind::None: return "none";
    case UncertaintyKind::Epistemic: return "epistemic";
    case UncertaintyKind::Aleatoric: return "aleatoric";
    case UncertaintyKind::Quadrature: return "quadrature";
  }
  throw ValidationError("to_string: bad uncertainty kind");
}

Decision decision_from_string(const std::string& text) {
  if (text == "unset") return Decision::Unset;
  if (text == "bot") return Decision::Bot;
  if (text == "human") return Decision::Human;
  if (text == "abstain") return Decision::Abstain;
  throw ValidationError("unknown decision '" + text + "'");
}

UncertaintyKind uncertainty_from_string(const std::string& text) {
  if (text == "none") return UncertaintyKind::None;
  if (text == "epistemic") return UncertaintyKind::Epistemic;
  if (text == "aleatoric") return UncertaintyKind::Aleatoric;
  if (text == "quadrature") return UncertaintyKind::Quadrature;
  throw ValidationError("unknown uncertainty kind '" + text +
                        "' (expected none, epistemic, aleatoric, or quadrature)");
}

AccountPrediction decide(AccountPrediction pred, UncertaintyKind kind, double k_sigma) {
  if (k_sigma < 0) throw ValidationError("decide: k_sigma must be non-negative");
  double margin = pred.p_mean - 0.5;
  double band = 0;
  switch (kind) {
    case UncertaintyKind::None: band = 0; break;
    case UncertaintyKind::Epistemic: band = k_sigma * pred.sigma_epistemic; break;
    case UncertaintyKind::Aleatoric: band = k_sigma * pred.sigma_aleatoric; break;
    case UncertaintyKind::Quadrature: band = k_sigma * pred.sigma_total; break;
  }
  if (std::abs(margin) > band)
    pred.decision = margin > 0 ? Decision::Bot : Decision::Human;
  else
    pred.decision = Decision::Abstain;  // includes p_mean exactly at 0.5
  return pred;
}

std::vector<AccountPrediction> decide_all(std::vector<AccountPrediction> preds,
                                          UncertaintyKind kind, double k_sigma) {
  for (auto& p : preds) p = decide(std::move(p), kind, k_sigma);
  return preds;
}

ClosureResult closure_zscore(const std::vector<AccountPrediction>& a,
                             const std::vector<AccountPrediction>& b) {
  if (a.size() != b.size())
    throw ValidationError("closure_zscore: prediction sets differ in size");
  std::unordered_map<std::string, const AccountPrediction*> lookup;
  lookup.reserve(b.size());
  for (const auto& pred : b)
    if (!lookup.emplace(pred.account_id, &pred).second)
      throw ValidationError("closure_zscore: duplicate account '" + pred.account_id + "'");
  ClosureResult result;
  result.pairs.reserve(a.size());
  for (const auto& pa : a) {
    auto it = lookup.find(pa.account_id);
    if (it == lookup.end())
      throw ValidationError("closure_zscore: account '" + pa.account_id +
                            "' missing from the second set");
    const AccountPrediction& pb = *it->second;
    if (pa.sigma_epistemic < kMinClosureSigma && pb.sigma_epistemic < kMinClosureSigma) {
      ++result.n_excluded;
      continue;
    }
    double denom = std::sqrt(pa.sigma_epistemic * pa.sigma_epistemic +
                             pb.sigma_epistemic * pb.sigma_epistemic);
    result.pairs.push_back({pa.account_id, (pa.p_mean - pb.p_mean) / denom});
  }
  return result;
}

std::vector<ProfileBin> uncertainty_profile(const std::vector<AccountPrediction>& preds,
                                            int n_bins) {
  if (n_bins < 1) throw ValidationError("uncertainty_profile: need at least one bin");
  std::vector<ProfileBin> bins(static_cast<std::size_t>(n_bins));
  for (int i = 0; i < n_bins; ++i) {
    bins[static_cast<std::size_t>(i)].lo = static_cast<double>(i) / n_bins;
    bins[static_cast<std::size_t>(i)].hi = static_cast<double>(i + 1) / n_bins;
  }
  for (const auto& p : preds) {
    if (!(p.p_mean >= 0.0 && p.p_mean <= 1.0))
      throw ValidationError("uncertainty_profile: score for '" + p.account_id +
                            "' is outside [0, 1]");
    int idx = std::min(n_bins - 1, static_cast<int>(p.p_mean * n_bins));
    ProfileBin& bin = bins[static_cast<std::size_t>(idx)];
    ++bin.count;
    bin.mean_p += p.p_mean;
    bin.mean_epistemic += p.sigma_epistemic;
    bin.mean_aleatoric += p.sigma_aleatoric;
    bin.mean_total += p.sigma_total;
  }
  for (auto& bin : bins) {
    if (bin.count == 0) {
      double nan = std::numeric_limits<double>::quiet_NaN();
      bin.mean_p = bin.mean_epistemic = bin.mean_aleatoric = bin.mean_total = nan;
      continue;
    }
    bin.mean_p /= static_cast<double>(bin.count);
    bin.mean_epistemic /= static_cast<double>(bin.count);
    bin.mean_aleatoric /= static_cast<double>(bin.count);
    bin.mean_total /= static_cast<double>(bin.count);
  }
  return bins;
}

}  // namespace botuq::uq
