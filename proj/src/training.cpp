#include "qexpand/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "qexpand/errors.hpp"

namespace qexpand {

void TrainConfig::validate(std::size_t kmax) const {
  if (!(margin > 0)) throw ConfigError("train: margin must be positive");
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (!(lr_decay > 0) || lr_decay > 1) throw ConfigError("train: lr_decay must be in (0,1]");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (negatives < 1) throw ConfigError("train: need at least one negative");
  if (pool_refresh < 1) throw ConfigError("train: pool_refresh must be >= 1");
  if (neighbors_lo > neighbors_hi) throw ConfigError("train: bad neighbor range");
  if (neighbors_hi > kmax) throw ConfigError("train: neighbor range exceeds model kmax");
  if (drop_prob_max < 0 || drop_prob_max > 1)
    throw ConfigError("train: drop_prob_max must be in [0,1]");
}

float contrastive_loss(std::span<const float> q_hat, std::span<const float> d, int y, float m) {
  if (q_hat.size() != d.size()) throw ShapeError("contrastive_loss: dimension mismatch");
  if (!(m > 0)) throw ConfigError("contrastive_loss: margin must be positive");
  double s = 0;
  for (std::size_t i = 0; i < q_hat.size(); ++i) {
    const double diff = double(q_hat[i]) - d[i];
    s += diff * diff;
  }
  const double z = std::sqrt(s);
  if (y) return float(z * z);
  const double t = std::max(0.0, double(m) - z);
  return float(t * t);
}

Trainer::Trainer(LAttQEModelF& model, EmbeddingMatrix train, std::vector<ItemMeta> train_meta,
                 TrainConfig config)
    : model_(model), train_(std::move(train)), meta_(std::move(train_meta)), cfg_(config),
      rng_(config.seed) {
  cfg_.validate(model_.cfg.kmax);
  if (train_.n == 0) throw ConfigError("train: empty training set");
  if (meta_.size() != train_.n) throw DataError("train: metadata/matrix size mismatch");
  index_ = std::make_unique<VectorIndex>(train_);
  for (const auto& it : meta_) {
    if (!it.cls) throw DataError("train: training item '" + it.id + "' has no class");
    rows_by_class_[*it.cls].push_back(it.row);
  }
  for (const auto& it : meta_)
    if (rows_by_class_[*it.cls].size() >= 2) eligible_.push_back(it.row);
  if (eligible_.empty()) throw ConfigError("train: no class has two or more items");
  opt_ = std::make_unique<AdamOptimizer<float>>(model_.encoder_parameters());
  refresh_pool();
}

void Trainer::refresh_pool() {
  std::vector<std::size_t> all(train_.n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng_);
  all.resize(std::min(cfg_.pool_size, all.size()));
  pool_ = std::move(all);
}

std::vector<std::size_t> Trainer::sample_neighbor_rows(std::size_t query_row,
                                                       std::vector<std::size_t>& positions,
                                                       std::optional<double> forced_drop) {
  std::uniform_int_distribution<std::size_t> ndist(cfg_.neighbors_lo, cfg_.neighbors_hi);
  std::size_t n = std::min(ndist(rng_), train_.n > 0 ? train_.n - 1 : 0);
  std::unordered_set<std::string> self{train_.ids[query_row]};
  NeighborList nn = index_->knn(train_.row(query_row), n, &self);
  std::uniform_real_distribution<double> pdist(0.0, cfg_.drop_prob_max);
  const double p = forced_drop ? *forced_drop : pdist(rng_);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::size_t> kept;
  positions.clear();
  positions.push_back(0);  // query slot
  for (std::size_t i = 0; i < nn.entries.size(); ++i) {
    if (coin(rng_) < p) continue;
    kept.push_back(nn.entries[i].row);
    positions.push_back(i + 1);  // dropped neighbors leave rank gaps
  }
  return kept;
}

std::size_t Trainer::sample_positive(std::size_t query_row) {
  const std::string& cls = *meta_[query_row].cls;
  // prefer same-class items inside the current pool, fall back to the class
  std::vector<std::size_t> cand;
  for (std::size_t r : pool_)
    if (r != query_row && *meta_[r].cls == cls) cand.push_back(r);
  if (cand.empty())
    for (std::size_t r : rows_by_class_[cls])
      if (r != query_row) cand.push_back(r);
  std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
  return cand[pick(rng_)];
}

std::vector<std::size_t> Trainer::mine_negatives(std::span<const float> q_hat,
                                                 const std::string& query_class,
                                                 std::size_t count) {
  if (pool_.empty()) throw ConfigError("mine_negatives: empty pool");
  struct Cand {
    float sim;
    std::size_t row;
  };
  std::vector<Cand> cands;
  cands.reserve(pool_.size());
  for (std::size_t r : pool_) {
    if (*meta_[r].cls == query_class) continue;
    auto v = train_.row(r);
    float s = 0;
    for (std::size_t j = 0; j < v.size(); ++j) s += q_hat[j] * v[j];
    cands.push_back({s, r});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.sim != b.sim ? a.sim > b.sim : a.row < b.row;
  });
  // hardest first, at most one per class
  std::vector<std::size_t> out;
  std::unordered_set<std::string> used;
  for (const auto& c : cands) {
    if (out.size() == count) break;
    if (!used.insert(*meta_[c.row].cls).second) continue;
    out.push_back(c.row);
  }
  return out;
}

TrainingSample Trainer::make_sample_with_mode(std::size_t query_row, WeightMode mode) {
  TrainingSample s;
  s.query_id = train_.ids[query_row];
  s.query_row = query_row;
  s.neighbor_rows = sample_neighbor_rows(query_row, s.positions);
  s.positive_row = sample_positive(query_row);

  const std::string& cls = *meta_[query_row].cls;
  s.relevance.push_back(1.0f);  // the query slot
  for (std::size_t r : s.neighbor_rows) s.relevance.push_back(*meta_[r].cls == cls ? 1.f : 0.f);

  // mine against the current model's expansion
  const std::size_t d = train_.d;
  Tensor<float> inputs = Tensor<float>::zeros({s.neighbor_rows.size() + 1, d});
  std::copy_n(train_.row(query_row).begin(), d, inputs.data.begin());
  for (std::size_t i = 0; i < s.neighbor_rows.size(); ++i)
    std::copy_n(train_.row(s.neighbor_rows[i]).begin(), d, inputs.data.begin() + (i + 1) * d);
  Tape<float> tape;
  auto q_hat = model_.expanded_query(tape, inputs, mode, s.positions);
  s.negative_rows = mine_negatives(tape.value(q_hat).data, cls, cfg_.negatives);
  return s;
}

TrainingSample Trainer::make_sample(std::size_t query_row) {
  return make_sample_with_mode(query_row, WeightMode::Similarity);
}

double Trainer::run_step(const std::vector<TrainingSample>& batch, AdamOptimizer<float>& opt,
                         WeightMode mode, float lr) {
  opt.zero_grad();
  double total = 0;
  const std::size_t d = train_.d;
  for (const auto& s : batch) {
    Tensor<float> inputs = Tensor<float>::zeros({s.neighbor_rows.size() + 1, d});
    std::copy_n(train_.row(s.query_row).begin(), d, inputs.data.begin());
    for (std::size_t i = 0; i < s.neighbor_rows.size(); ++i)
      std::copy_n(train_.row(s.neighbor_rows[i]).begin(), d, inputs.data.begin() + (i + 1) * d);
    auto pos = train_.row(s.positive_row);
    std::vector<float> positive(pos.begin(), pos.end());
    std::vector<std::vector<float>> negatives;
    for (std::size_t r : s.negative_rows) {
      auto v = train_.row(r);
      negatives.emplace_back(v.begin(), v.end());
    }
    Tape<float> tape;
    auto loss = sample_loss(tape, model_, inputs, s.positions, positive, negatives,
                            s.relevance, cfg_.margin, cfg_.aux_weight, mode);
    const float lv = tape.value(loss).item();
    if (!std::isfinite(lv))
      throw NumericError("train_step: non-finite loss for query '" + s.query_id + "'");
    total += lv;
    tape.backward(loss);
  }
  opt.step(lr, cfg_.weight_decay);
  ++updates_;
  if (updates_ % cfg_.pool_refresh == 0) refresh_pool();
  return total;
}

double Trainer::train_step(const std::vector<TrainingSample>& batch) {
  return run_step(batch, *opt_, WeightMode::Similarity, cfg_.lr);
}

FitResult Trainer::fit(const VectorIndex& val_index, const EmbeddingMatrix& val_queries,
                       const std::vector<QueryAnnotation>& val_annotations, Protocol protocol,
                       std::ostream* log) {
  if (val_queries.n == 0 || val_annotations.empty())
    throw ConfigError("fit: empty validation split");
  FitResult result;
  std::vector<Tensor<float>> best;
  const auto t0 = std::chrono::steady_clock::now();

  QEMethodConfig val_cfg;
  val_cfg.method = QEMethod::Lattqe;
  val_cfg.nqe = std::min(cfg_.val_nqe, model_.cfg.kmax);
  val_cfg.weight_mode = WeightMode::Similarity;

  for (std::size_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    const float lr = cfg_.lr * std::pow(cfg_.lr_decay, float(epoch));
    std::vector<std::size_t> order = eligible_;
    std::shuffle(order.begin(), order.end(), rng_);
    if (cfg_.queries_per_epoch > 0 && order.size() > cfg_.queries_per_epoch)
      order.resize(cfg_.queries_per_epoch);

    double epoch_loss = 0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      std::vector<TrainingSample> batch;
      const std::size_t end = std::min(start + cfg_.batch_size, order.size());
      for (std::size_t i = start; i < end; ++i) batch.push_back(make_sample(order[i]));
      epoch_loss += run_step(batch, *opt_, WeightMode::Similarity, lr);
      ++n_batches;
    }

    LattqeRunner runner(model_);
    EvalReport rep = evaluate(val_index, val_queries, val_annotations, val_cfg, protocol,
                              &runner, cfg_.threads);
    result.val_map_curve.push_back(rep.map);
    if (rep.map > result.best_map || best.empty()) {
      result.best_map = rep.map;
      result.best_epoch = epoch;
      best.clear();
      for (Parameter<float>* p : model_.parameters()) best.push_back(p->value);
    }
    if (log) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      nlohmann::json j{{"epoch", epoch},        {"update", updates_},
                       {"loss", epoch_loss},    {"val_map", rep.map},
                       {"lr", lr},              {"wall_ms", ms}};
      (*log) << j.dump() << "\n";
    }
  }

  if (!best.empty()) {
    auto params = model_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  return result;
}

float Trainer::fit_dba_temperature(std::size_t epochs) {
  AdamOptimizer<float> opt({&model_.log_temp});
  // T moves slowly under the base lr; the curriculum phase uses a larger one.
  const float lr = 0.01f;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order = eligible_;
    std::shuffle(order.begin(), order.end(), rng_);
    if (cfg_.queries_per_epoch > 0 && order.size() > cfg_.queries_per_epoch)
      order.resize(cfg_.queries_per_epoch);
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      std::vector<TrainingSample> batch;
      const std::size_t end = std::min(start + cfg_.batch_size, order.size());
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(make_sample_with_mode(order[i], WeightMode::TemperedSoftmax));
      run_step(batch, opt, WeightMode::TemperedSoftmax, lr);
    }
  }
  return model_.temperature();
}

}  // namespace qexpand
