#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qexpand/errors.hpp"
#include "qexpand/tensor.hpp"

namespace qexpand {

// Trainable leaf. Gradients accumulate across backward() calls until
// zero_grad().
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.shape)) {}

  void zero_grad() { grad.fill(T(0)); }
};

// Dynamic reverse-mode tape over a closed op set. One tape records one
// forward computation; backward() walks it once in reverse.
template <typename T>
class Tape {
 public:
  using Var = std::size_t;

  Var constant(Tensor<T> v) { return push(std::move(v), {}, nullptr, nullptr); }

  Var leaf(Parameter<T>& p) {
    return push(p.value, {}, nullptr, &p);
  }

  const Tensor<T>& value(Var v) const { return nodes_[v].value; }
  const Tensor<T>& grad(Var v) const { return nodes_[v].grad; }

  // --- elementwise / shape ops ---

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += val(b).data[i];
    return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
      t.accum(n.parents[0], n.grad.data);
      t.accum(n.parents[1], n.grad.data);
    });
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tensor<T> out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= val(b).data[i];
    return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
      t.accum(n.parents[0], n.grad.data);
      auto& gb = t.nodes_[n.parents[1]].grad.data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad.data[i];
    });
  }

  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= val(b).data[i];
    return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      auto& gb = t.nodes_[n.parents[1]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      const auto& vb = t.val(n.parents[1]).data;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += n.grad.data[i] * vb[i];
        gb[i] += n.grad.data[i] * va[i];
      }
    });
  }

  Var scale(Var a, T c) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= c;
    return push(std::move(out), {a}, [c](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * n.grad.data[i];
    });
  }

  Var add_const(Var a, T c) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v += c;
    return push(std::move(out), {a}, [](Tape& t, Node& n) { t.accum(n.parents[0], n.grad.data); });
  }

  // a * s, s a scalar var.
  Var mul_scalar(Var a, Var s) {
    check_scalar(s, "mul_scalar");
    const T sv = val(s).data[0];
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= sv;
    return push(std::move(out), {a, s}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      auto& gs = t.nodes_[n.parents[1]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      const T sv2 = t.val(n.parents[1]).data[0];
      T acc = 0;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += sv2 * n.grad.data[i];
        acc += n.grad.data[i] * va[i];
      }
      gs[0] += acc;
    });
  }

  // a / s, s a scalar var.
  Var div_scalar(Var a, Var s) {
    check_scalar(s, "div_scalar");
    const T sv = val(s).data[0];
    if (sv == T(0)) throw NumericError("div_scalar: division by zero");
    Tensor<T> out = val(a);
    for (T& v : out.data) v /= sv;
    return push(std::move(out), {a, s}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      auto& gs = t.nodes_[n.parents[1]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      const T sv2 = t.val(n.parents[1]).data[0];
      T acc = 0;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += n.grad.data[i] / sv2;
        acc += n.grad.data[i] * va[i];
      }
      gs[0] -= acc / (sv2 * sv2);
    });
  }

  Var relu(Var a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return push(std::move(out), {a}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (va[i] > T(0)) ga[i] += n.grad.data[i];
    });
  }

  Var square(Var a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= v;
    return push(std::move(out), {a}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += T(2) * va[i] * n.grad.data[i];
    });
  }

  Var exp(Var a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = std::exp(v);
    return push(std::move(out), {a}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& vy = n.value.data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += vy[i] * n.grad.data[i];
    });
  }

  // --- linear algebra ---

  Var matmul(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimension mismatch");
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> out = Tensor<T>::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T av = A.data[i * k + p];
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += av * B.data[p * n + j];
      }
    return push(std::move(out), {a, b}, [m, k, n](Tape& t, Node& nd) {
      const auto& A2 = t.val(nd.parents[0]);
      const auto& B2 = t.val(nd.parents[1]);
      auto& gA = t.nodes_[nd.parents[0]].grad;
      auto& gB = t.nodes_[nd.parents[1]].grad;
      // gA += g * B^T ; gB += A^T * g
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T g = nd.grad.data[i * n + j];
          if (g == T(0)) continue;
          for (std::size_t p = 0; p < k; ++p) {
            gA.data[i * k + p] += g * B2.data[p * n + j];
            gB.data[p * n + j] += A2.data[i * k + p] * g;
          }
        }
    });
  }

  // A * B^T
  Var matmul_nt(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.cols() != B.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
    const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor<T> out = Tensor<T>::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T s = 0;
        for (std::size_t p = 0; p < k; ++p) s += A.data[i * k + p] * B.data[j * k + p];
        out.data[i * n + j] = s;
      }
    return push(std::move(out), {a, b}, [m, k, n](Tape& t, Node& nd) {
      const auto& A2 = t.val(nd.parents[0]);
      const auto& B2 = t.val(nd.parents[1]);
      auto& gA = t.nodes_[nd.parents[0]].grad;
      auto& gB = t.nodes_[nd.parents[1]].grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T g = nd.grad.data[i * n + j];
          if (g == T(0)) continue;
          for (std::size_t p = 0; p < k; ++p) {
            gA.data[i * k + p] += g * B2.data[j * k + p];
            gB.data[j * k + p] += g * A2.data[i * k + p];
          }
        }
    });
  }

  // X (r x c) + row vector b (length c), broadcast over rows.
  Var add_rowvec(Var a, Var b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (B.numel() != A.cols()) throw ShapeError("add_rowvec: bias length mismatch");
    Tensor<T> out = A;
    const std::size_t r = A.rows(), c = A.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += B.data[j];
    return push(std::move(out), {a, b}, [r, c](Tape& t, Node& n) {
      t.accum(n.parents[0], n.grad.data);
      auto& gb = t.nodes_[n.parents[1]].grad.data;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += n.grad.data[i * c + j];
    });
  }

  Var slice_rows(Var a, std::size_t start, std::size_t len) {
    const auto& A = val(a);
    if (start + len > A.rows()) throw ShapeError("slice_rows: out of range");
    const std::size_t c = A.cols();
    Tensor<T> out{{len, c}, std::vector<T>(A.data.begin() + start * c, A.data.begin() + (start + len) * c)};
    if (A.shape.size() == 1) out.shape = {len * c};
    return push(std::move(out), {a}, [start, c](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) ga[start * c + i] += n.grad.data[i];
    });
  }

  // Single row as a length-c vector.
  Var row(Var a, std::size_t i) {
    Var r = slice_rows(a, i, 1);
    nodes_[r].value.shape = {val(a).cols()};
    nodes_[r].grad.shape = {val(a).cols()};
    return r;
  }

  Var slice_cols(Var a, std::size_t start, std::size_t len) {
    const auto& A = val(a);
    if (start + len > A.cols()) throw ShapeError("slice_cols: out of range");
    const std::size_t r = A.rows(), c = A.cols();
    Tensor<T> out = Tensor<T>::zeros({r, len});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < len; ++j) out.data[i * len + j] = A.data[i * c + start + j];
    return push(std::move(out), {a}, [start, r, c, len](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < len; ++j) ga[i * c + start + j] += n.grad.data[i * len + j];
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty");
    const std::size_t r = val(parts[0]).rows();
    std::size_t ctot = 0;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
      if (val(p).rows() != r) throw ShapeError("concat_cols: row mismatch");
      widths.push_back(val(p).cols());
      ctot += val(p).cols();
    }
    Tensor<T> out = Tensor<T>::zeros({r, ctot});
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const auto& P = val(parts[pi]);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < widths[pi]; ++j) out.data[i * ctot + off + j] = P.data[i * widths[pi] + j];
      off += widths[pi];
    }
    return push(std::move(out), parts, [r, ctot, widths](Tape& t, Node& n) {
      std::size_t o = 0;
      for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
        auto& gp = t.nodes_[n.parents[pi]].grad.data;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[pi]; ++j) gp[i * widths[pi] + j] += n.grad.data[i * ctot + o + j];
        o += widths[pi];
      }
    });
  }

  Var concat_scalars(const std::vector<Var>& parts) {
    Tensor<T> out = Tensor<T>::zeros({parts.size()});
    for (std::size_t i = 0; i < parts.size(); ++i) {
      check_scalar(parts[i], "concat_scalars");
      out.data[i] = val(parts[i]).data[0];
    }
    return push(std::move(out), parts, [](Tape& t, Node& n) {
      for (std::size_t i = 0; i < n.parents.size(); ++i)
        t.nodes_[n.parents[i]].grad.data[0] += n.grad.data[i];
    });
  }

  // --- reductions & normalizations ---

  Var sum(Var a) {
    T s = 0;
    for (T v : val(a).data) s += v;
    return push(Tensor<T>::scalar(s), {a}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      for (T& g : ga) g += n.grad.data[0];
    });
  }

  Var dot(Var a, Var b) {
    check_same_shape(a, b, "dot");
    T s = 0;
    const auto& va = val(a).data;
    const auto& vb = val(b).data;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i] * vb[i];
    return push(Tensor<T>::scalar(s), {a, b}, [](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      auto& gb = t.nodes_[n.parents[1]].grad.data;
      const auto& va2 = t.val(n.parents[0]).data;
      const auto& vb2 = t.val(n.parents[1]).data;
      const T g = n.grad.data[0];
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += g * vb2[i];
        gb[i] += g * va2[i];
      }
    });
  }

  // l2 norm; the (sub)gradient at the zero vector is taken as zero.
  Var l2norm(Var a) {
    T s = 0;
    for (T v : val(a).data) s += v * v;
    const T r = std::sqrt(s);
    return push(Tensor<T>::scalar(r), {a}, [](Tape& t, Node& n) {
      if (n.value.data[0] == T(0)) return;
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& va = t.val(n.parents[0]).data;
      const T g = n.grad.data[0] / n.value.data[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * va[i];
    });
  }

  // Rows of `a` selected by index, scatter-add on the way back.
  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const auto& A = val(a);
    const std::size_t c = A.cols();
    Tensor<T> out = Tensor<T>::zeros({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= A.rows()) throw ShapeError("gather_rows: index out of range");
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = A.data[idx[i] * c + j];
    }
    auto ix = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    return push(std::move(out), {a}, [ix, c](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      for (std::size_t i = 0; i < ix->size(); ++i)
        for (std::size_t j = 0; j < c; ++j) ga[(*ix)[i] * c + j] += n.grad.data[i * c + j];
    });
  }

  Var l2_normalize(Var a) {
    T s = 0;
    for (T v : val(a).data) s += v * v;
    const T r = std::sqrt(s);
    if (r == T(0)) throw NumericError("l2_normalize: zero vector");
    Tensor<T> out = val(a);
    for (T& v : out.data) v /= r;
    return push(std::move(out), {a}, [r](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& y = n.value.data;
      T gy = 0;
      for (std::size_t i = 0; i < y.size(); ++i) gy += n.grad.data[i] * y[i];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += (n.grad.data[i] - y[i] * gy) / r;
    });
  }

  // Row-wise stable softmax. A rank-1 tensor is treated as a single row.
  Var row_softmax(Var a) {
    const auto& A = val(a);
    const std::size_t r = A.shape.size() == 1 ? 1 : A.rows();
    const std::size_t c = A.shape.size() == 1 ? A.numel() : A.cols();
    Tensor<T> out = A;
    for (std::size_t i = 0; i < r; ++i) {
      T mx = out.data[i * c];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.data[i * c + j]);
      T sum = 0;
      for (std::size_t j = 0; j < c; ++j) {
        out.data[i * c + j] = std::exp(out.data[i * c + j] - mx);
        sum += out.data[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] /= sum;
    }
    return push(std::move(out), {a}, [r, c](Tape& t, Node& n) {
      auto& ga = t.nodes_[n.parents[0]].grad.data;
      const auto& y = n.value.data;
      for (std::size_t i = 0; i < r; ++i) {
        T gy = 0;
        for (std::size_t j = 0; j < c; ++j) gy += n.grad.data[i * c + j] * y[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          ga[i * c + j] += y[i * c + j] * (n.grad.data[i * c + j] - gy);
      }
    });
  }

  // Row-wise layer norm with affine gain/bias (length = cols).
  Var layer_norm_rows(Var x, Var gain, Var bias, T eps = T(1e-5)) {
    const auto& X = val(x);
    const std::size_t r = X.rows(), c = X.cols();
    if (val(gain).numel() != c || val(bias).numel() != c)
      throw ShapeError("layer_norm_rows: gain/bias length mismatch");
    Tensor<T> out = Tensor<T>::zeros(X.shape);
    // keep normalized pre-affine values for backward
    auto norm = std::make_shared<std::vector<T>>(r * c);
    auto invstd = std::make_shared<std::vector<T>>(r);
    for (std::size_t i = 0; i < r; ++i) {
      T mean = 0;
      for (std::size_t j = 0; j < c; ++j) mean += X.data[i * c + j];
      mean /= T(c);
      T var = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const T d = X.data[i * c + j] - mean;
        var += d * d;
      }
      var /= T(c);
      const T inv = T(1) / std::sqrt(var + eps);
      (*invstd)[i] = inv;
      for (std::size_t j = 0; j < c; ++j) {
        const T yn = (X.data[i * c + j] - mean) * inv;
        (*norm)[i * c + j] = yn;
        out.data[i * c + j] = val(gain).data[j] * yn + val(bias).data[j];
      }
    }
    return push(std::move(out), {x, gain, bias}, [r, c, norm, invstd](Tape& t, Node& n) {
      auto& gx = t.nodes_[n.parents[0]].grad.data;
      auto& gg = t.nodes_[n.parents[1]].grad.data;
      auto& gb = t.nodes_[n.parents[2]].grad.data;
      const auto& gain2 = t.val(n.parents[1]).data;
      for (std::size_t i = 0; i < r; ++i) {
        T m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < c; ++j) {
          const T go = n.grad.data[i * c + j];
          const T yn = (*norm)[i * c + j];
          gg[j] += go * yn;
          gb[j] += go;
          const T gy = go * gain2[j];
          m1 += gy;
          m2 += gy * yn;
        }
        m1 /= T(c);
        m2 /= T(c);
        for (std::size_t j = 0; j < c; ++j) {
          const T gy = n.grad.data[i * c + j] * gain2[j];
          const T yn = (*norm)[i * c + j];
          gx[i * c + j] += (*invstd)[i] * (gy - m1 - yn * m2);
        }
      }
    });
  }

  // y = sum_i w_i * M_i with M a constant matrix (rows aligned with w).
  Var weighted_sum_rows(Var w, const Tensor<T>& M) {
    const auto& W = val(w);
    if (W.numel() != M.rows()) throw ShapeError("weighted_sum_rows: weight count mismatch");
    const std::size_t r = M.rows(), c = M.cols();
    Tensor<T> out = Tensor<T>::zeros({c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[j] += W.data[i] * M.data[i * c + j];
    auto Mc = std::make_shared<Tensor<T>>(M);
    return push(std::move(out), {w}, [Mc, r, c](Tape& t, Node& n) {
      auto& gw = t.nodes_[n.parents[0]].grad.data;
      for (std::size_t i = 0; i < r; ++i) {
        T s = 0;
        for (std::size_t j = 0; j < c; ++j) s += n.grad.data[j] * Mc->data[i * c + j];
        gw[i] += s;
      }
    });
  }

  // Sum of binary cross-entropy with logits against constant 0/1 labels.
  Var bce_with_logits_sum(Var logits, const std::vector<T>& labels) {
    const auto& L = val(logits);
    if (L.numel() != labels.size()) throw ShapeError("bce_with_logits_sum: label count mismatch");
    T loss = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const T l = L.data[i];
      loss += std::max(l, T(0)) - l * labels[i] + std::log1p(std::exp(-std::abs(l)));
    }
    auto lab = std::make_shared<std::vector<T>>(labels);
    return push(Tensor<T>::scalar(loss), {logits}, [lab](Tape& t, Node& n) {
      auto& gl = t.nodes_[n.parents[0]].grad.data;
      const auto& vl = t.val(n.parents[0]).data;
      const T g = n.grad.data[0];
      for (std::size_t i = 0; i < gl.size(); ++i) {
        const T sig = T(1) / (T(1) + std::exp(-vl[i]));
        gl[i] += g * (sig - (*lab)[i]);
      }
    });
  }

  // --- backward ---

  void backward(Var loss) {
    if (val(loss).numel() != 1) throw ConfigError("backward: loss must be a scalar");
    nodes_[loss].grad.data[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward) n.backward(*this, n);
      if (n.param) {
        for (std::size_t j = 0; j < n.grad.numel(); ++j) n.param->grad.data[j] += n.grad.data[j];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<Var> parents;
    std::function<void(Tape&, Node&)> backward;
    Parameter<T>* param = nullptr;
  };

  const Tensor<T>& val(Var v) const { return nodes_[v].value; }

  void accum(Var v, const std::vector<T>& g) {
    auto& gd = nodes_[v].grad.data;
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g[i];
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (!(val(a).shape == val(b).shape)) throw ShapeError(std::string(op) + ": shape mismatch");
  }
  void check_scalar(Var s, const char* op) const {
    if (val(s).numel() != 1) throw ShapeError(std::string(op) + ": expected scalar");
  }

  Var push(Tensor<T> value, std::vector<Var> parents, std::function<void(Tape&, Node&)> bw,
           Parameter<T>* param = nullptr) {
    Node n;
    n.grad = Tensor<T>::zeros(value.shape);
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(bw);
    n.param = param;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace qexpand
