#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "botuq/errors.hpp"
#include "botuq/features.hpp"

namespace botuq::ingest {

struct LabeledRecord {
  std::string account_id;
  int label = 0;  // 0 human, 1 bot
  std::string source;
};

struct LabeledDataset {
  std::vector<LabeledRecord> records;

  std::array<std::int64_t, 2> class_counts() const {
    std::array<std::int64_t, 2> counts{0, 0};
    for (const auto& r : records) ++counts[r.label];
    return counts;
  }
  std::int64_t size() const { return static_cast<std::int64_t>(records.size()); }
};

// CSV with header account_id,label,source; label must be 0 or 1, source may
// be empty.  Duplicate account ids are rejected.
LabeledDataset load_labels(const std::string& path);

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

// Class-balanced, seed-reproducible partition.  `excess` holds the majority
// class records left over after downsampling to the minority count; they
// never overlap the other subsets.
struct SplitBundle {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
  LabeledDataset excess;
  std::uint64_t seed = 0;
};

// Downsamples the majority class uniformly to the minority count m, then per
// class takes floor(validation*m) validation rows, floor(test*m) test rows,
// and leaves the remainder for training, so both classes contribute equally
// to every subset.  Same seed, same split.
SplitBundle balance_and_split(const LabeledDataset& data, SplitFractions fractions,
                              std::uint64_t seed);

// Feature CSV alone (header: account_id,<name>,...), no label join; for
// scoring accounts that may have no ground truth.
FeatureMatrix<double> load_features(const std::string& path);

// Feature CSV (header: account_id,<name>,...) joined with a label CSV.  The
// two files must cover exactly the same accounts; rows come back in feature
// file order with the label records aligned to them.
std::pair<FeatureMatrix<double>, LabeledDataset> load_feature_matrix(
    const std::string& features_path, const std::string& labels_path);

// Rows of `features` selected (in order) for the accounts in `subset`.
// Throws when an account has no feature row.
template <typename Scalar>
std::pair<Matrix<Scalar>, Vector<Scalar>> assemble(const FeatureMatrix<Scalar>& features,
                                                   const LabeledDataset& subset) {
  std::unordered_map<std::string, Index> row_of;
  row_of.reserve(features.account_ids.size());
  for (Index i = 0; i < static_cast<Index>(features.account_ids.size()); ++i)
    row_of.emplace(features.account_ids[i], i);
  Matrix<Scalar> x(subset.size(), features.cols());
  Vector<Scalar> y(subset.size());
  for (Index i = 0; i < subset.size(); ++i) {
    const LabeledRecord& r = subset.records[i];
    auto it = row_of.find(r.account_id);
    if (it == row_of.end())
      throw ValidationError("assemble: no feature row for account '" + r.account_id + "'");
    x.row(i) = features.weights.row(it->second);
    y(i) = Scalar(r.label);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace botuq::ingest
