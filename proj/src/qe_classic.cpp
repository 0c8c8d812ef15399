#include "qexpand/qe_classic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qexpand/errors.hpp"
#include "qexpand/lattqe.hpp"

namespace qexpand {

QEMethod parse_method(const std::string& name) {
  if (name == "none") return QEMethod::None;
  if (name == "aqe") return QEMethod::Aqe;
  if (name == "aqewd") return QEMethod::Aqewd;
  if (name == "dqe") return QEMethod::Dqe;
  if (name == "alpha-qe") return QEMethod::AlphaQe;
  if (name == "lattqe") return QEMethod::Lattqe;
  throw ConfigError("unknown QE method '" + name + "'");
}

std::string method_name(QEMethod m) {
  switch (m) {
    case QEMethod::None: return "none";
    case QEMethod::Aqe: return "aqe";
    case QEMethod::Aqewd: return "aqewd";
    case QEMethod::Dqe: return "dqe";
    case QEMethod::AlphaQe: return "alpha-qe";
    case QEMethod::Lattqe: return "lattqe";
  }
  return "?";
}

void QEMethodConfig::validate() const {
  if (alpha < 0) throw ConfigError("qe: alpha must be >= 0");
  if (method == QEMethod::Dqe) {
    if (!(c_svm > 0)) throw ConfigError("qe: svm C must be positive");
    if (neg < 1) throw ConfigError("qe: dqe needs at least one negative");
  }
}

std::vector<float> aggregate(std::span<const float> query, const NeighborList& neighbors,
                             const EmbeddingMatrix& matrix, const WeightVector& weights) {
  if (weights.size() != neighbors.entries.size() + 1)
    throw ShapeError("aggregate: weight count must be neighbor count + 1");
  std::vector<double> acc(query.size(), 0.0);
  for (std::size_t j = 0; j < query.size(); ++j) acc[j] = double(weights[0]) * query[j];
  for (std::size_t i = 0; i < neighbors.entries.size(); ++i) {
    auto r = matrix.row(neighbors.entries[i].row);
    if (r.size() != query.size()) throw ShapeError("aggregate: dimension mismatch");
    for (std::size_t j = 0; j < query.size(); ++j) acc[j] += double(weights[i + 1]) * r[j];
  }
  double s = 0;
  for (double v : acc) s += v * v;
  if (s == 0) throw NumericError("aggregate: weighted sum is the zero vector");
  const double inv = 1.0 / std::sqrt(s);
  std::vector<float> out(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) out[j] = float(acc[j] * inv);
  return out;
}

WeightVector weights_aqe(std::size_t k) { return WeightVector(k + 1, 1.0f); }

WeightVector weights_aqewd(std::size_t k) {
  if (k == 0) return {1.0f};
  WeightVector w(k + 1);
  for (std::size_t i = 0; i <= k; ++i) w[i] = float(k - i) / float(k);
  return w;
}

WeightVector weights_alpha(const NeighborList& neighbors, float alpha) {
  if (alpha < 0) throw ConfigError("weights_alpha: alpha must be >= 0");
  WeightVector w;
  w.reserve(neighbors.entries.size() + 1);
  w.push_back(1.0f);  // sim(q, q) = 1
  for (const auto& n : neighbors.entries) {
    const float s = std::max(n.similarity, 0.0f);  // clamp before exponentiation
    w.push_back(std::pow(s, alpha));
  }
  return w;
}

SvmSolution svm_train(const std::vector<std::vector<float>>& positives,
                      const std::vector<std::vector<float>>& negatives, float c,
                      std::uint64_t seed, std::size_t max_sweeps, double tol) {
  if (positives.empty() || negatives.empty())
    throw ConfigError("svm_train: both classes must be non-empty");
  if (!(c > 0)) throw ConfigError("svm_train: C must be positive");
  const std::size_t d = positives[0].size();
  const std::size_t n = positives.size() + negatives.size();

  // Augmented feature (constant 1) carries the bias.
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(n);
  for (const auto& p : positives) {
    if (p.size() != d) throw ShapeError("svm_train: dimension mismatch");
    std::vector<double> v(p.begin(), p.end());
    v.push_back(1.0);
    x.push_back(std::move(v));
    y.push_back(1.0);
  }
  for (const auto& ng : negatives) {
    if (ng.size() != d) throw ShapeError("svm_train: dimension mismatch");
    std::vector<double> v(ng.begin(), ng.end());
    v.push_back(1.0);
    x.push_back(std::move(v));
    y.push_back(-1.0);
  }

  std::vector<double> qdiag(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double v : x[i]) s += v * v;
    qdiag[i] = s;
  }

  std::vector<double> alpha(n, 0.0), w(d + 1, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  double violation = 0;
  std::size_t sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    std::shuffle(order.begin(), order.end(), rng);
    violation = 0;
    for (std::size_t i : order) {
      double wx = 0;
      for (std::size_t j = 0; j <= d; ++j) wx += w[j] * x[i][j];
      const double g = y[i] * wx - 1.0;
      // projected gradient
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= double(c)) pg = std::max(g, 0.0);
      violation = std::max(violation, std::abs(pg));
      if (pg == 0.0) continue;
      const double a_old = alpha[i];
      const double a_new = std::clamp(a_old - g / qdiag[i], 0.0, double(c));
      if (a_new == a_old) continue;
      alpha[i] = a_new;
      const double delta = (a_new - a_old) * y[i];
      for (std::size_t j = 0; j <= d; ++j) w[j] += delta * x[i][j];
    }
    if (violation < tol) break;
  }
  if (violation >= tol)
    throw NumericError("svm_train: no convergence after " + std::to_string(max_sweeps) +
                       " sweeps, residual " + std::to_string(violation));

  SvmSolution sol;
  sol.w.assign(w.begin(), w.end() - 1);
  sol.b = float(w[d]);
  sol.duals.assign(alpha.begin(), alpha.end());
  sol.sweeps = sweep + 1;
  return sol;
}

std::vector<float> expand_query(std::span<const float> query, const VectorIndex& index,
                                const QEMethodConfig& config, const LattqeRunner* model,
                                const std::unordered_set<std::string>* exclude) {
  config.validate();
  if (config.method == QEMethod::None) return {query.begin(), query.end()};
  // Fewer database items than nQE: use all available.
  const NeighborList nn = index.knn(query, config.nqe, exclude);
  const std::size_t k = nn.entries.size();
  switch (config.method) {
    case QEMethod::Aqe:
      return aggregate(query, nn, index.matrix(), weights_aqe(k));
    case QEMethod::Aqewd:
      return aggregate(query, nn, index.matrix(), weights_aqewd(k));
    case QEMethod::AlphaQe:
      return aggregate(query, nn, index.matrix(), weights_alpha(nn, config.alpha));
    case QEMethod::Dqe: {
      std::vector<std::vector<float>> pos, neg;
      pos.emplace_back(query.begin(), query.end());
      for (const auto& e : nn.entries) {
        auto r = index.matrix().row(e.row);
        pos.emplace_back(r.begin(), r.end());
      }
      const NeighborList bottom = index.bottom_k(query, config.neg, exclude);
      for (const auto& e : bottom.entries) {
        auto r = index.matrix().row(e.row);
        neg.emplace_back(r.begin(), r.end());
      }
      SvmSolution sol = svm_train(pos, neg, config.c_svm);
      double s = 0;
      for (float v : sol.w) s += double(v) * v;
      if (s == 0) throw NumericError("dqe: degenerate SVM direction");
      const double inv = 1.0 / std::sqrt(s);
      std::vector<float> out(sol.w.size());
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = float(sol.w[j] * inv);
      return out;
    }
    case QEMethod::Lattqe: {
      if (!model) throw ConfigError("expand_query: lattqe needs a loaded model");
      return model->expand(query, nn, index.matrix(), config.weight_mode);
    }
    case QEMethod::None:
      break;
  }
  return {query.begin(), query.end()};
}

}  // namespace qexpand
