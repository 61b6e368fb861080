#pragma once

#include <cstdint>
#include <vector>

#include "botuq/types.hpp"
#include "botuq/uq/prediction.hpp"

namespace botuq::eval {

// A metric with its sampling spread.  `defined` is false when the underlying
// count is empty (for example precision with no positive calls); undefined
// values are reported as such, never as silent zeros.
struct MetricValue {
  double value = 0;
  double stddev = 0;
  bool defined = false;
};

struct RocCurve {
  std::vector<double> thresholds;  // descending unique scores
  std::vector<double> fpr;         // rate at score >= threshold
  std::vector<double> tpr;
  double auc = 0;
};

// Threshold sweep over the unique scores; the area is the trapezoid integral
// of the resulting staircase, which equals the pairwise win rate with ties
// counted half.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocBand {
  std::vector<double> thresholds;  // common grid, descending
  std::vector<double> fpr_mean, fpr_lo, fpr_hi;
  std::vector<double> tpr_mean, tpr_lo, tpr_hi;
  double auc_mean = 0;
  double auc_stddev = 0;
  double n_sigma = 0;
};

// Uncertainty-aware ROC: every posterior score column is swept on the grid of
// the mean-score curve, and the band is mean +- n_sigma population spreads
// per grid point (clamped to [0, 1]).
RocBand roc_band(const Matrix<double>& posterior_scores, const std::vector<int>& labels,
                 double n_sigma = 5.0);

struct ClassMetrics {
  MetricValue precision, recall, f1;
};

// Precision/recall/F1 for one side of the fence.  `positive_label` 1 treats
// Bot calls as positive, 0 treats Human calls as positive.  Every decision
// must be committed (Bot or Human); filter abstentions first.
ClassMetrics prf1(const std::vector<uq::Decision>& decisions,
                  const std::vector<int>& labels, int positive_label);

MetricValue accuracy(const std::vector<uq::Decision>& decisions,
                     const std::vector<int>& labels);

struct AbstentionRow {
  uq::UncertaintyKind kind = uq::UncertaintyKind::None;
  double k_sigma = 0;
  std::int64_t n_total = 0;
  std::int64_t n_retained = 0;
  bool empty_retained = false;  // the band swallowed every account
  MetricValue acc;
  ClassMetrics bot;
  ClassMetrics human;
  double rejection_overall = 0;  // abstained fraction
  double rejection_bot = 0;      // abstained fraction among true bots
  double rejection_human = 0;
};

// Applies the abstention rule for one uncertainty kind and scores what
// remains.
AbstentionRow abstention_row(const std::vector<uq::AccountPrediction>& preds,
                             const std::vector<int>& labels, uq::UncertaintyKind kind,
                             double k_sigma);

// One row per kind: none, epistemic, aleatoric, quadrature.
std::vector<AbstentionRow> abstention_report(const std::vector<uq::AccountPrediction>& preds,
                                             const std::vector<int>& labels,
                                             double k_sigma);

}  // namespace botuq::eval
