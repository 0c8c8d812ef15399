#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qexpand/adam.hpp"
#include "qexpand/autograd.hpp"
#include "qexpand/errors.hpp"
#include "qexpand/index.hpp"
#include "qexpand/qe_classic.hpp"

namespace qexpand {

struct LAttQEConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t kmax = 64;
  bool use_positional_encoding = true;
  bool position_only = false;
  bool use_self_attention = true;
  bool use_aux_head = true;
  WeightMode weight_mode = WeightMode::Similarity;

  void validate() const {
    if (dim == 0 || layers == 0 || heads == 0) throw ConfigError("lattqe: zero-sized config");
    if (dim % heads != 0) throw ConfigError("lattqe: dim must be divisible by heads");
  }
};

template <typename T>
struct EncoderLayerParams {
  Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;  // attention projections
  Parameter<T> w1, b1, w2, b2;                  // feed-forward (hidden width = dim)
  Parameter<T> g1, n1, g2, n2;                  // layer-norm gains/biases
};

// Encoder stack + learnable positional embeddings + auxiliary relevance head
// + temperature. The temperature is kept in log space so it stays positive.
template <typename T>
class LAttQEModel {
 public:
  using Var = typename Tape<T>::Var;

  LAttQEConfig cfg;
  std::vector<EncoderLayerParams<T>> layers;
  Parameter<T> pos;       // (kmax+1) x dim
  Parameter<T> aux_w;     // dim x 1
  Parameter<T> aux_b;     // 1
  Parameter<T> log_temp;  // scalar, T = exp(log_temp)

  LAttQEModel() = default;

  LAttQEModel(LAttQEConfig config, std::uint64_t seed) : cfg(config) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const std::size_t d = cfg.dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      EncoderLayerParams<T> p;
      const std::string pre = "enc" + std::to_string(l) + ".";
      p.wq = glorot(pre + "wq", d, d, rng);
      p.bq = Parameter<T>(pre + "bq", Tensor<T>::zeros({d}));
      p.wk = glorot(pre + "wk", d, d, rng);
      p.bk = Parameter<T>(pre + "bk", Tensor<T>::zeros({d}));
      p.wv = glorot(pre + "wv", d, d, rng);
      p.bv = Parameter<T>(pre + "bv", Tensor<T>::zeros({d}));
      p.wo = glorot(pre + "wo", d, d, rng);
      p.bo = Parameter<T>(pre + "bo", Tensor<T>::zeros({d}));
      p.w1 = glorot(pre + "w1", d, d, rng);
      p.b1 = Parameter<T>(pre + "b1", Tensor<T>::zeros({d}));
      p.w2 = glorot(pre + "w2", d, d, rng);
      p.b2 = Parameter<T>(pre + "b2", Tensor<T>::zeros({d}));
      p.g1 = Parameter<T>(pre + "g1", Tensor<T>::full({d}, T(1)));
      p.n1 = Parameter<T>(pre + "n1", Tensor<T>::zeros({d}));
      p.g2 = Parameter<T>(pre + "g2", Tensor<T>::full({d}, T(1)));
      p.n2 = Parameter<T>(pre + "n2", Tensor<T>::zeros({d}));
      layers.push_back(std::move(p));
    }
    std::normal_distribution<double> gauss(0.0, 0.02);
    Tensor<T> pe = Tensor<T>::zeros({cfg.kmax + 1, d});
    for (T& v : pe.data) v = T(gauss(rng));
    pos = Parameter<T>("pos", std::move(pe));
    aux_w = glorot("aux_w", d, 1, rng);
    aux_b = Parameter<T>("aux_b", Tensor<T>::zeros({1}));
    log_temp = Parameter<T>("log_temp", Tensor<T>::zeros({1}));
  }

  T temperature() const { return std::exp(log_temp.value.data[0]); }
  void set_temperature(T t) {
    if (!(t > T(0))) throw ConfigError("lattqe: temperature must be positive");
    log_temp.value.data[0] = std::log(t);
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers)
      for (auto* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.w1, &l.b1,
                      &l.w2, &l.b2, &l.g1, &l.n1, &l.g2, &l.n2})
        out.push_back(p);
    out.push_back(&pos);
    out.push_back(&aux_w);
    out.push_back(&aux_b);
    out.push_back(&log_temp);
    return out;
  }

  // Everything except the temperature; the main training phase never touches T.
  std::vector<Parameter<T>*> encoder_parameters() {
    auto all = parameters();
    all.pop_back();
    return all;
  }

  // Retrieval-rank positions: the query sits at 0, neighbor i at its
  // original rank. Dropped neighbors leave gaps, so positions can be sparse.
  std::vector<std::size_t> identity_positions(std::size_t k1) const {
    std::vector<std::size_t> p(k1);
    for (std::size_t i = 0; i < k1; ++i) p[i] = i;
    return p;
  }

  void check_positions(const std::vector<std::size_t>& positions, std::size_t k1) const {
    if (positions.size() != k1) throw ShapeError("lattqe: position count mismatch");
    for (std::size_t p : positions)
      if (p > cfg.kmax) throw ConfigError("lattqe: position exceeds kmax capacity");
  }

  // inputs: (k+1) x dim, row 0 the query. Adds p_{positions[i]} to row i.
  Var positional_encode(Tape<T>& tape, Var inputs, const std::vector<std::size_t>& positions) {
    const std::size_t k1 = tape.value(inputs).rows();
    check_positions(positions, k1);
    if (!cfg.use_positional_encoding) return inputs;
    Var p = tape.gather_rows(tape.leaf(pos), positions);
    return tape.add(inputs, p);
  }

  Var positional_encode(Tape<T>& tape, Var inputs) {
    return positional_encode(tape, inputs, identity_positions(tape.value(inputs).rows()));
  }

  // L encoder layers: attention -> add&norm -> feed-forward -> add&norm.
  Var encode(Tape<T>& tape, Var x, const std::vector<std::size_t>& positions) {
    const std::size_t k1 = tape.value(x).rows();
    const std::size_t d = cfg.dim;
    if (tape.value(x).cols() != d) throw ShapeError("lattqe: input dimension mismatch");
    check_positions(positions, k1);
    for (auto& l : layers) {
      Var o;
      if (cfg.use_self_attention) {
        Var src = x;
        if (cfg.position_only) src = tape.gather_rows(tape.leaf(pos), positions);
        Var q = tape.add_rowvec(tape.matmul(src, tape.leaf(l.wq)), tape.leaf(l.bq));
        Var k = tape.add_rowvec(tape.matmul(src, tape.leaf(l.wk)), tape.leaf(l.bk));
        Var v = tape.add_rowvec(tape.matmul(x, tape.leaf(l.wv)), tape.leaf(l.bv));
        const std::size_t dh = d / cfg.heads;
        const T scale = T(1) / std::sqrt(T(dh));
        std::vector<Var> heads;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
          Var qh = tape.slice_cols(q, h * dh, dh);
          Var kh = tape.slice_cols(k, h * dh, dh);
          Var vh = tape.slice_cols(v, h * dh, dh);
          Var attn = tape.row_softmax(tape.scale(tape.matmul_nt(qh, kh), scale));
          heads.push_back(tape.matmul(attn, vh));
        }
        o = tape.add_rowvec(tape.matmul(tape.concat_cols(heads), tape.leaf(l.wo)),
                            tape.leaf(l.bo));
      } else {
        // Table-2 ablation: per-position fully-connected map in place of attention.
        Var hid = tape.add_rowvec(tape.matmul(x, tape.leaf(l.wq)), tape.leaf(l.bq));
        o = tape.add_rowvec(tape.matmul(tape.relu(hid), tape.leaf(l.wo)), tape.leaf(l.bo));
      }
      x = tape.layer_norm_rows(tape.add(x, o), tape.leaf(l.g1), tape.leaf(l.n1));
      Var hid = tape.relu(tape.add_rowvec(tape.matmul(x, tape.leaf(l.w1)), tape.leaf(l.b1)));
      Var ff = tape.add_rowvec(tape.matmul(hid, tape.leaf(l.w2)), tape.leaf(l.b2));
      x = tape.layer_norm_rows(tape.add(x, ff), tape.leaf(l.g2), tape.leaf(l.n2));
    }
    return x;
  }

  Var encode(Tape<T>& tape, Var x) {
    return encode(tape, x, identity_positions(tape.value(x).rows()));
  }

  // Cosines between the transformed query (row 0) and every transformed row,
  // including itself.
  Var transformed_cosines(Tape<T>& tape, Var transformed) {
    const std::size_t k1 = tape.value(transformed).rows();
    Var q = tape.row(transformed, 0);
    Var qn = tape.l2norm(q);
    std::vector<Var> cos;
    cos.reserve(k1);
    for (std::size_t i = 0; i < k1; ++i) {
      Var di = tape.row(transformed, i);
      Var num = tape.dot(q, di);
      Var den = tape.mul(qn, tape.l2norm(di));
      cos.push_back(tape.div_scalar(num, den));
    }
    return tape.concat_scalars(cos);
  }

  // Eq. (3) similarity weights or Eq. (4) tempered-softmax weights.
  Var attention_weights(Tape<T>& tape, Var transformed, WeightMode mode) {
    Var cos = transformed_cosines(tape, transformed);
    if (mode == WeightMode::Similarity) return cos;
    Var t = tape.exp(tape.leaf(log_temp));
    return tape.row_softmax(tape.div_scalar(cos, t));
  }

  // Full expansion: PE -> encode -> weights, then the weighted sum uses the
  // ORIGINAL vectors, followed by l2 normalization.
  Var expanded_query(Tape<T>& tape, const Tensor<T>& inputs, WeightMode mode,
                     const std::vector<std::size_t>& positions) {
    Var x = tape.constant(inputs);
    Var transformed = encode(tape, positional_encode(tape, x, positions), positions);
    Var w = attention_weights(tape, transformed, mode);
    return tape.l2_normalize(tape.weighted_sum_rows(w, inputs));
  }

  Var expanded_query(Tape<T>& tape, const Tensor<T>& inputs, WeightMode mode) {
    return expanded_query(tape, inputs, mode, identity_positions(inputs.rows()));
  }

  // Train-time relevance logits, one per input row.
  Var aux_logits(Tape<T>& tape, Var transformed) {
    if (!cfg.use_aux_head) throw ConfigError("lattqe: auxiliary head disabled");
    return tape.add_rowvec(tape.matmul(transformed, tape.leaf(aux_w)), tape.leaf(aux_b));
  }

 private:
  static Parameter<T> glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                             std::mt19937_64& rng) {
    const double lim = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-lim, lim);
    Tensor<T> w = Tensor<T>::zeros({fan_in, fan_out});
    for (T& v : w.data) v = T(u(rng));
    return Parameter<T>(name, std::move(w));
  }
};

using LAttQEModelF = LAttQEModel<float>;
using LAttQEModelD = LAttQEModel<double>;

// Inference wrapper used by expand_query / dba / evaluation.
class LattqeRunner {
 public:
  explicit LattqeRunner(LAttQEModelF model) : model_(std::move(model)) {}

  const LAttQEModelF& model() const { return model_; }
  LAttQEModelF& model() { return model_; }

  // Builds the (k+1) x D input stack [q, d_1..d_k] and runs the model.
  std::vector<float> expand(std::span<const float> query, const NeighborList& neighbors,
                            const EmbeddingMatrix& matrix, WeightMode mode) const;

  WeightVector weights(std::span<const float> query, const NeighborList& neighbors,
                       const EmbeddingMatrix& matrix, WeightMode mode) const;

 private:
  Tensor<float> stack_inputs(std::span<const float> query, const NeighborList& neighbors,
                             const EmbeddingMatrix& matrix) const;
  mutable LAttQEModelF model_;
};

}  // namespace qexpand
