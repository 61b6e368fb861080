#include "botuq/ingest/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

#include "botuq/errors.hpp"
#include "botuq/io/csv.hpp"
#include "botuq/rng.hpp"

namespace botuq::ingest {

LabeledDataset load_labels(const std::string& path) {
  io::CsvTable table = io::read_csv(path);
  if (table.rows.empty())
    throw ValidationError("load_labels: '" + path + "' is empty");
  const auto& header = table.rows[0];
  if (header.size() < 2 || header[0] != "account_id" || header[1] != "label")
    throw ValidationError("load_labels: header must start account_id,label");
  bool has_source = header.size() >= 3 && header[2] == "source";

  LabeledDataset data;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < 2 || row[0].empty())
      throw ValidationError("load_labels: malformed row " + std::to_string(r + 1));
    if (!seen.insert(row[0]).second)
      throw ValidationError("load_labels: duplicate account '" + row[0] + "'");
    int label;
    if (row[1] == "0") label = 0;
    else if (row[1] == "1") label = 1;
    else
      throw ValidationError("load_labels: label for '" + row[0] +
                            "' must be 0 or 1, got '" + row[1] + "'");
    data.records.push_back(
        {row[0], label, has_source && row.size() > 2 ? row[2] : std::string()});
  }
  return data;
}

SplitBundle balance_and_split(const LabeledDataset& data, SplitFractions fractions,
                              std::uint64_t seed) {
  if (fractions.validation <= 0 || fractions.test <= 0 ||
      fractions.validation + fractions.test >= 1.0)
    throw ValidationError(
        "balance_and_split: validation and test fractions must be positive and leave "
        "room for training");
  auto counts = data.class_counts();
  std::int64_t m = std::min(counts[0], counts[1]);
  if (m == 0)
    throw ValidationError("balance_and_split: need at least one account of each class");
  std::int64_t n_val = static_cast<std::int64_t>(std::floor(fractions.validation * m));
  std::int64_t n_test = static_cast<std::int64_t>(std::floor(fractions.test * m));
  std::int64_t n_train = m - n_val - n_test;
  if (n_val < 1 || n_test < 1 || n_train < 1)
    throw ValidationError("balance_and_split: dataset too small for the requested "
                          "fractions (minority class has " + std::to_string(m) +
                          " accounts)");

  SplitBundle bundle;
  bundle.seed = seed;
  Rng rng(seed);
  for (int label = 0; label < 2; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.records.size(); ++i)
      if (data.records[i].label == label) idx.push_back(i);
    Rng stream = rng.derive("split.class", static_cast<std::uint64_t>(label));
    stream.shuffle(idx);
    // After downsampling to m: validation, then test, remainder to train.
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(idx.size()); ++k) {
      const LabeledRecord& rec = data.records[idx[k]];
      if (k >= m) bundle.excess.records.push_back(rec);
      else if (k < n_val) bundle.validation.records.push_back(rec);
      else if (k < n_val + n_test) bundle.test.records.push_back(rec);
      else bundle.train.records.push_back(rec);
    }
  }
  return bundle;
}

FeatureMatrix<double> load_features(const std::string& path) {
  io::CsvTable table = io::read_csv(path);
  if (table.rows.size() < 2)
    throw ValidationError("load_features: '" + path +
                          "' needs a header and at least one data row");
  const auto& header = table.rows[0];
  if (header.empty() || header[0] != "account_id")
    throw ValidationError("load_features: first column must be account_id");
  const Index k = static_cast<Index>(header.size()) - 1;
  if (k < 1) throw ValidationError("load_features: no feature columns");

  FeatureMatrix<double> features;
  features.vocabulary.assign(header.begin() + 1, header.end());
  const Index n = static_cast<Index>(table.rows.size()) - 1;
  features.weights.resize(n, k);
  features.account_ids.reserve(n);
  std::unordered_set<std::string> seen;
  for (Index r = 0; r < n; ++r) {
    const auto& row = table.rows[r + 1];
    if (static_cast<Index>(row.size()) != k + 1)
      throw ValidationError("load_features: row " + std::to_string(r + 2) + " has " +
                            std::to_string(row.size()) + " fields, expected " +
                            std::to_string(k + 1));
    if (!seen.insert(row[0]).second)
      throw ValidationError("load_features: duplicate account '" + row[0] + "'");
    for (Index j = 0; j < k; ++j) {
      char* end = nullptr;
      double v = std::strtod(row[j + 1].c_str(), &end);
      if (end == row[j + 1].c_str() || *end != '\0' || !std::isfinite(v))
        throw ValidationError("load_features: bad value '" + row[j + 1] + "' at row " +
                              std::to_string(r + 2) + " column " + std::to_string(j + 2));
      features.weights(r, j) = v;
    }
    features.account_ids.push_back(row[0]);
  }
  return features;
}

std::pair<FeatureMatrix<double>, LabeledDataset> load_feature_matrix(
    const std::string& features_path, const std::string& labels_path) {
  LabeledDataset labels = load_labels(labels_path);
  std::unordered_map<std::string, const LabeledRecord*> by_id;
  for (const auto& r : labels.records) by_id.emplace(r.account_id, &r);

  FeatureMatrix<double> features = load_features(features_path);
  LabeledDataset aligned;
  for (const auto& id : features.account_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ValidationError("load_feature_matrix: account '" + id + "' has no label");
    aligned.records.push_back(*it->second);
  }
  if (aligned.size() != labels.size())
    throw ValidationError("load_feature_matrix: " +
                          std::to_string(labels.size() - aligned.size()) +
                          " labeled account(s) have no feature row");
  return {std::move(features), std::move(aligned)};
}

}  // namespace botuq::ingest
