#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qexpand/index.hpp"

namespace qexpand {

enum class QEMethod { None, Aqe, Aqewd, Dqe, AlphaQe, Lattqe };

enum class WeightMode { Similarity, TemperedSoftmax };

QEMethod parse_method(const std::string& name);
std::string method_name(QEMethod m);

// Tagged choice of expansion method with its hyperparameters.
struct QEMethodConfig {
  QEMethod method = QEMethod::None;
  std::size_t nqe = 0;
  float alpha = 3.0f;           // alpha-qe exponent
  float c_svm = 0.1f;           // dqe regularization
  std::size_t neg = 5;          // dqe negative count
  std::string checkpoint;       // lattqe model path
  WeightMode weight_mode = WeightMode::Similarity;

  void validate() const;
};

// Weights aligned with [q, d_1..d_k].
using WeightVector = std::vector<float>;

// l2-normalized weighted sum of the query and its neighbors; index 0 of the
// weight vector belongs to the query.
std::vector<float> aggregate(std::span<const float> query, const NeighborList& neighbors,
                             const EmbeddingMatrix& matrix, const WeightVector& weights);

WeightVector weights_aqe(std::size_t k);
WeightVector weights_aqewd(std::size_t k);
WeightVector weights_alpha(const NeighborList& neighbors, float alpha);

struct SvmSolution {
  std::vector<float> w;     // separating direction (without bias)
  float b = 0;              // bias from the augmented feature
  std::vector<float> duals; // one per training point, positives first
  std::size_t sweeps = 0;
};

// Hinge-loss linear SVM solved by dual coordinate descent. Bias handled via
// an augmented constant-1 feature.
SvmSolution svm_train(const std::vector<std::vector<float>>& positives,
                      const std::vector<std::vector<float>>& negatives, float c,
                      std::uint64_t seed = 0, std::size_t max_sweeps = 10000,
                      double tol = 1e-6);

class LattqeRunner;  // defined in lattqe.hpp

// Dispatches to the configured weighting scheme. For lattqe a loaded runner
// must be supplied. `exclude` is forwarded to neighbor retrieval.
std::vector<float> expand_query(std::span<const float> query, const VectorIndex& index,
                                const QEMethodConfig& config,
                                const LattqeRunner* model = nullptr,
                                const std::unordered_set<std::string>* exclude = nullptr);

}  // namespace qexpand
