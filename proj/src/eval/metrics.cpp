#include "botuq/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "botuq/errors.hpp"

namespace botuq::eval {

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n, const char* who) {
  if (labels.size() != n)
    throw ValidationError(std::string(who) + ": labels do not match the inputs");
  for (int v : labels)
    if (v != 0 && v != 1) throw ValidationError(std::string(who) + ": labels must be 0 or 1");
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<int>& labels,
                                                   const char* who) {
  std::int64_t pos = std::count(labels.begin(), labels.end(), 1);
  std::int64_t neg = static_cast<std::int64_t>(labels.size()) - pos;
  if (pos == 0 || neg == 0)
    throw ValidationError(std::string(who) + ": need both classes present");
  return {pos, neg};
}

MetricValue binomial(std::int64_t hits, std::int64_t trials) {
  MetricValue m;
  if (trials == 0) return m;
  m.defined = true;
  m.value = static_cast<double>(hits) / static_cast<double>(trials);
  m.stddev = std::sqrt(m.value * (1.0 - m.value) / static_cast<double>(trials));
  return m;
}

}  // namespace

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_labels(labels, scores.size(), "roc_auc");
  for (double s : scores)
    if (!std::isfinite(s)) throw ValidationError("roc_auc: scores must be finite");
  auto [n_pos, n_neg] = class_counts(labels, "roc_auc");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  std::int64_t cum_tp = 0, cum_fp = 0;
  double prev_fpr = 0, prev_tpr = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double t = scores[order[i]];
    std::int64_t tp = 0, fp = 0;
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    cum_tp += tp;
    cum_fp += fp;
    double fpr = static_cast<double>(cum_fp) / static_cast<double>(n_neg);
    double tpr = static_cast<double>(cum_tp) / static_cast<double>(n_pos);
    curve.thresholds.push_back(t);
    curve.fpr.push_back(fpr);
    curve.tpr.push_back(tpr);
    curve.auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return curve;
}

RocBand roc_band(const Matrix<double>& posterior_scores, const std::vector<int>& labels,
                 double n_sigma) {
  const Index n = posterior_scores.rows();
  const Index samples = posterior_scores.cols();
  check_labels(labels, static_cast<std::size_t>(n), "roc_band");
  if (samples < 2) throw ValidationError("roc_band: need at least two score samples");
  if (n_sigma < 0) throw ValidationError("roc_band: n_sigma must be non-negative");
  auto [n_pos, n_neg] = class_counts(labels, "roc_band");

  std::vector<double> mean_scores(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mean_scores[static_cast<std::size_t>(i)] =
      posterior_scores.row(i).mean();
  RocCurve center = roc_auc(mean_scores, labels);
  const std::size_t grid = center.thresholds.size();

  RocBand band;
  band.thresholds = center.thresholds;
  band.n_sigma = n_sigma;
  // The per-sample rates are counts over fixed denominators, so their spread
  // is computed on integer sums; identical columns then give an exactly
  // zero-width band instead of square-root-amplified rounding noise.
  std::vector<std::int64_t> fp_sum(grid, 0), fp_sum2(grid, 0);
  std::vector<std::int64_t> tp_sum(grid, 0), tp_sum2(grid, 0);
  std::vector<double> aucs;
  aucs.reserve(static_cast<std::size_t>(samples));

  std::vector<double> col_pos, col_neg;
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Index s = 0; s < samples; ++s) {
    col_pos.clear();
    col_neg.clear();
    for (Index i = 0; i < n; ++i) {
      col[static_cast<std::size_t>(i)] = posterior_scores(i, s);
      (labels[static_cast<std::size_t>(i)] == 1 ? col_pos : col_neg)
          .push_back(posterior_scores(i, s));
    }
    std::sort(col_pos.begin(), col_pos.end(), std::greater<>());
    std::sort(col_neg.begin(), col_neg.end(), std::greater<>());
    std::size_t ip = 0, in = 0;
    for (std::size_t g = 0; g < grid; ++g) {
      double t = band.thresholds[g];
      while (ip < col_pos.size() && col_pos[ip] >= t) ++ip;
      while (in < col_neg.size() && col_neg[in] >= t) ++in;
      auto fc = static_cast<std::int64_t>(in);
      auto tc = static_cast<std::int64_t>(ip);
      fp_sum[g] += fc;
      fp_sum2[g] += fc * fc;
      tp_sum[g] += tc;
      tp_sum2[g] += tc * tc;
    }
    aucs.push_back(roc_auc(col, labels).auc);
  }

  const double S = static_cast<double>(samples);
  auto count_stats = [&](std::int64_t c1, std::int64_t c2, std::int64_t denom,
                         double& mean, double& spread) {
    mean = static_cast<double>(c1) / (S * static_cast<double>(denom));
    // S * sum(c^2) - sum(c)^2 = S^2 * population variance of the counts.
    double num = static_cast<double>(samples * c2 - c1 * c1);
    spread = std::sqrt(std::max(0.0, num)) / (S * static_cast<double>(denom));
  };
  band.fpr_mean.resize(grid);
  band.fpr_lo.resize(grid);
  band.fpr_hi.resize(grid);
  band.tpr_mean.resize(grid);
  band.tpr_lo.resize(grid);
  band.tpr_hi.resize(grid);
  for (std::size_t g = 0; g < grid; ++g) {
    double fm, fs, tm, ts;
    count_stats(fp_sum[g], fp_sum2[g], n_neg, fm, fs);
    count_stats(tp_sum[g], tp_sum2[g], n_pos, tm, ts);
    band.fpr_mean[g] = fm;
    band.fpr_lo[g] = std::max(0.0, fm - n_sigma * fs);
    band.fpr_hi[g] = std::min(1.0, fm + n_sigma * fs);
    band.tpr_mean[g] = tm;
    band.tpr_lo[g] = std::max(0.0, tm - n_sigma * ts);
    band.tpr_hi[g] = std::min(1.0, tm + n_sigma * ts);
  }
  double auc_mean = 0;
  for (double a : aucs) auc_mean += a;
  auc_mean /= S;
  double auc_var = 0;
  for (double a : aucs) auc_var += (a - auc_mean) * (a - auc_mean);
  band.auc_mean = auc_mean;
  band.auc_stddev = std::sqrt(auc_var / S);
  return band;
}

namespace {

void check_committed(const std::vector<uq::Decision>& decisions, const char* who) {
  for (auto d : decisions)
    if (d != uq::Decision::Bot && d != uq::Decision::Human)
      throw ValidationError(std::string(who) + ": every decision must be bot or human");
}

}  // namespace

ClassMetrics prf1(const std::vector<uq::Decision>& decisions,
                  const std::vector<int>& labels, int positive_label) {
  check_labels(labels, decisions.size(), "prf1");
  check_committed(decisions, "prf1");
  if (positive_label != 0 && positive_label != 1)
    throw ValidationError("prf1: positive_label must be 0 or 1");
  uq::Decision positive_call =
      positive_label == 1 ? uq::Decision::Bot : uq::Decision::Human;

  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    bool called = decisions[i] == positive_call;
    bool truly = labels[i] == positive_label;
    if (called && truly) ++tp;
    else if (called) ++fp;
    else if (truly) ++fn;
  }

  ClassMetrics m;
  m.precision = binomial(tp, tp + fp);
  m.recall = binomial(tp, tp + fn);
  if (m.precision.defined && m.recall.defined &&
      m.precision.value + m.recall.value > 0) {
    double p = m.precision.value, r = m.recall.value;
    double denom = (p + r) * (p + r);
    double dp = 2.0 * r * r / denom;  // dF/dP
    double dr = 2.0 * p * p / denom;
    m.f1.defined = true;
    m.f1.value = 2.0 * p * r / (p + r);
    m.f1.stddev = std::sqrt(dp * dp * m.precision.stddev * m.precision.stddev +
                            dr * dr * m.recall.stddev * m.recall.stddev);
  }
  return m;
}

MetricValue accuracy(const std::vector<uq::Decision>& decisions,
                     const std::vector<int>& labels) {
  check_labels(labels, decisions.size(), "accuracy");
  check_committed(decisions, "accuracy");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    uq::Decision want = labels[i] == 1 ? uq::Decision::Bot : uq::Decision::Human;
    if (decisions[i] == want) ++hits;
  }
  return binomial(hits, static_cast<std::int64_t>(decisions.size()));
}

AbstentionRow abstention_row(const std::vector<uq::AccountPrediction>& preds,
                             const std::vector<int>& labels, uq::UncertaintyKind kind,
                             double k_sigma) {
  check_labels(labels, preds.size(), "abstention_row");
  if (preds.empty()) throw ValidationError("abstention_row: no predictions");
  auto decided = uq::decide_all(preds, kind, k_sigma);

  AbstentionRow row;
  row.kind = kind;
  row.k_sigma = k_sigma;
  row.n_total = static_cast<std::int64_t>(preds.size());

  std::vector<uq::Decision> kept;
  std::vector<int> kept_labels;
  std::int64_t bots = 0, humans = 0, bots_rej = 0, humans_rej = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) {
    (labels[i] == 1 ? bots : humans) += 1;
    if (decided[i].decision == uq::Decision::Abstain) {
      (labels[i] == 1 ? bots_rej : humans_rej) += 1;
      continue;
    }
    kept.push_back(decided[i].decision);
    kept_labels.push_back(labels[i]);
  }
  row.n_retained = static_cast<std::int64_t>(kept.size());
  row.rejection_overall =
      static_cast<double>(bots_rej + humans_rej) / static_cast<double>(row.n_total);
  row.rejection_bot =
      bots > 0 ? static_cast<double>(bots_rej) / static_cast<double>(bots) : 0.0;
  row.rejection_human =
      humans > 0 ? static_cast<double>(humans_rej) / static_cast<double>(humans) : 0.0;

  if (kept.empty()) {
    row.empty_retained = true;  // metrics stay undefined
    return row;
  }
  row.acc = accuracy(kept, kept_labels);
  row.bot = prf1(kept, kept_labels, 1);
  row.human = prf1(kept, kept_labels, 0);
  return row;
}

std::vector<AbstentionRow> abstention_report(const std::vector<uq::AccountPrediction>& preds,
                                             const std::vector<int>& labels,
                                             double k_sigma) {
  std::vector<AbstentionRow> rows;
  for (auto kind : {uq::UncertaintyKind::None, uq::UncertaintyKind::Epistemic,
                    uq::UncertaintyKind::Aleatoric, uq::UncertaintyKind::Quadrature})
    rows.push_back(abstention_row(preds, labels, kind, k_sigma));
  return rows;
}

}  // namespace botuq::eval
