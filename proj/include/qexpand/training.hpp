#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <unordered_map>

#include "qexpand/adam.hpp"
#include "qexpand/evaluation.hpp"
#include "qexpand/index.hpp"
#include "qexpand/io.hpp"
#include "qexpand/lattqe.hpp"

namespace qexpand {

struct TrainConfig {
  float margin = 0.1f;
  float lr = 1e-4f;
  float lr_decay = 0.99f;  // exponential, per epoch
  float weight_decay = 1e-6f;
  std::size_t batch_size = 64;
  std::size_t negatives = 5;
  std::size_t pool_size = 20000;
  std::size_t pool_refresh = 2000;  // updates between pool refreshes
  std::size_t neighbors_lo = 32;
  std::size_t neighbors_hi = 64;
  float drop_prob_max = 0.6f;
  float aux_weight = 1.0f;
  std::size_t max_epochs = 20;
  std::size_t queries_per_epoch = 0;  // 0 = every eligible training query
  std::size_t val_nqe = 64;           // neighbor count for validation mAP
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate(std::size_t kmax) const;
};

// y z^2 + (1-y) max(0, m-z)^2 with z = ||q_hat - d||.
float contrastive_loss(std::span<const float> q_hat, std::span<const float> d, int y, float m);

struct TrainingSample {
  std::string query_id;
  std::size_t query_row = 0;             // row in the training matrix
  std::vector<std::size_t> neighbor_rows;
  std::vector<std::size_t> positions;    // rank positions of [q, d_1..d_k]
  std::size_t positive_row = 0;
  std::vector<std::size_t> negative_rows;
  std::vector<float> relevance;          // labels over [q, d_1..d_k]
};

// Total loss for one sample on the given tape. Templated so the 64-bit
// gradient checks can reuse the exact training path.
template <typename T>
typename Tape<T>::Var sample_loss(Tape<T>& tape, LAttQEModel<T>& model,
                                  const Tensor<T>& inputs,
                                  const std::vector<std::size_t>& positions,
                                  const std::vector<T>& positive,
                                  const std::vector<std::vector<T>>& negatives,
                                  const std::vector<T>& relevance, T margin, T aux_weight,
                                  WeightMode mode) {
  using Var = typename Tape<T>::Var;
  Var x = tape.constant(inputs);
  Var transformed = model.encode(tape, model.positional_encode(tape, x, positions), positions);
  Var w = model.attention_weights(tape, transformed, mode);
  Var q_hat = tape.l2_normalize(tape.weighted_sum_rows(w, inputs));

  auto contrastive = [&](const std::vector<T>& d, bool positive_pair) {
    Var z = tape.l2norm(tape.sub(q_hat, tape.constant(Tensor<T>::vec(d))));
    if (positive_pair) return tape.square(z);
    // max(0, m - z)^2
    return tape.square(tape.relu(tape.add_const(tape.scale(z, T(-1)), margin)));
  };

  Var loss = contrastive(positive, true);
  for (const auto& d : negatives) loss = tape.add(loss, contrastive(d, false));
  if (aux_weight != T(0) && model.cfg.use_aux_head) {
    Var logits = model.aux_logits(tape, transformed);
    Var bce = tape.bce_with_logits_sum(logits, relevance);
    loss = tape.add(loss, tape.scale(bce, aux_weight / T(relevance.size())));
  }
  return loss;
}

struct FitResult {
  std::vector<double> val_map_curve;  // one entry per epoch
  std::size_t best_epoch = 0;         // index into the curve
  double best_map = 0;
};

// Discriminative training of LAttQE against a labeled training corpus, with
// hard-negative mining, neighbor-sampling augmentation and epoch selection
// by validation mAP.
class Trainer {
 public:
  Trainer(LAttQEModelF& model, EmbeddingMatrix train, std::vector<ItemMeta> train_meta,
          TrainConfig config);

  // Draw n ~ U[lo,hi] neighbors of the query (own row excluded), then drop
  // each independently with p ~ U(0, drop_prob_max). `forced_drop` pins p.
  std::vector<std::size_t> sample_neighbor_rows(std::size_t query_row,
                                                std::vector<std::size_t>& positions,
                                                std::optional<double> forced_drop = std::nullopt);

  // The `count` pool items most similar to q_hat whose class differs from
  // the query's, at most one per class.
  std::vector<std::size_t> mine_negatives(std::span<const float> q_hat,
                                          const std::string& query_class, std::size_t count);

  TrainingSample make_sample(std::size_t query_row);

  // Forward + backward + one Adam update over the batch. Returns the loss.
  double train_step(const std::vector<TrainingSample>& batch);

  FitResult fit(const VectorIndex& val_index, const EmbeddingMatrix& val_queries,
                const std::vector<QueryAnnotation>& val_annotations, Protocol protocol,
                std::ostream* log = nullptr);

  // Temperature curriculum: everything frozen except T, tempered-softmax
  // weights. Returns the fitted temperature.
  float fit_dba_temperature(std::size_t epochs);

  void refresh_pool();
  std::size_t updates() const { return updates_; }
  const std::vector<std::size_t>& pool() const { return pool_; }
  const std::vector<std::size_t>& eligible_queries() const { return eligible_; }

 private:
  double run_step(const std::vector<TrainingSample>& batch, AdamOptimizer<float>& opt,
                  WeightMode mode, float lr);
  TrainingSample make_sample_with_mode(std::size_t query_row, WeightMode mode);
  std::size_t sample_positive(std::size_t query_row);

  LAttQEModelF& model_;
  EmbeddingMatrix train_;
  std::vector<ItemMeta> meta_;
  TrainConfig cfg_;
  std::unique_ptr<VectorIndex> index_;
  std::unordered_map<std::string, std::vector<std::size_t>> rows_by_class_;
  std::vector<std::size_t> eligible_;  // rows usable as training queries
  std::vector<std::size_t> pool_;
  std::mt19937_64 rng_;
  std::size_t updates_ = 0;
  std::unique_ptr<AdamOptimizer<float>> opt_;
};

}  // namespace qexpand
