#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "botuq/types.hpp"

namespace botuq {

// Account-by-feature weight matrix with named rows and columns.  Matrices
// built from behavioral vocabularies carry the per-word document frequencies
// and corpus size behind the weighting; externally loaded matrices leave
// `doc_freq` empty and `total_docs` zero.
template <typename Scalar>
struct FeatureMatrix {
  std::vector<std::string> vocabulary;   // column names
  std::vector<std::int64_t> doc_freq;    // documents containing each word
  std::int64_t total_docs = 0;
  std::vector<std::string> account_ids;  // row names
  Matrix<Scalar> weights;

  Index rows() const { return weights.rows(); }
  Index cols() const { return weights.cols(); }
};

}  // namespace botuq
