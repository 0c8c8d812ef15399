#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qexpand/index.hpp"
#include "qexpand/qe_classic.hpp"
#include "testutil.hpp"

using namespace qexpand;

namespace {

EmbeddingMatrix matrix_of(std::vector<std::vector<float>> rows, const std::string& prefix = "d") {
  EmbeddingMatrix m;
  m.n = rows.size();
  m.d = rows.empty() ? 0 : rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.rows.insert(m.rows.end(), rows[i].begin(), rows[i].end());
    m.ids.push_back(prefix + std::to_string(i));
  }
  return m;
}

NeighborList neighbors_over(const EmbeddingMatrix& m, std::vector<std::size_t> rows,
                            std::vector<float> sims = {}) {
  NeighborList nn;
  for (std::size_t i = 0; i < rows.size(); ++i)
    nn.entries.push_back({m.ids[rows[i]], rows[i], sims.empty() ? 0.f : sims[i]});
  return nn;
}

// dual objective of the hinge-loss SVM: sum(a) - 0.5 * ||sum a_i y_i x_i||^2
// over the bias-augmented features
double dual_objective(const std::vector<std::vector<float>>& pos,
                      const std::vector<std::vector<float>>& neg,
                      const std::vector<float>& duals) {
  const std::size_t d = pos[0].size();
  std::vector<double> w(d + 1, 0.0);
  double sum = 0;
  std::size_t i = 0;
  auto fold = [&](const std::vector<float>& x, double y) {
    const double a = duals[i++];
    sum += a;
    for (std::size_t j = 0; j < d; ++j) w[j] += a * y * x[j];
    w[d] += a * y;
  };
  for (const auto& x : pos) fold(x, 1.0);
  for (const auto& x : neg) fold(x, -1.0);
  double nrm = 0;
  for (double v : w) nrm += v * v;
  return sum - 0.5 * nrm;
}

// independent slow solver: projected gradient ascent on the dual
std::vector<float> qp_oracle(const std::vector<std::vector<float>>& pos,
                             const std::vector<std::vector<float>>& neg, double c,
                             std::size_t iters = 200000) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& p : pos) {
    x.emplace_back(p.begin(), p.end());
    x.back().push_back(1.0);
    y.push_back(1.0);
  }
  for (const auto& ng : neg) {
    x.emplace_back(ng.begin(), ng.end());
    x.back().push_back(1.0);
    y.push_back(-1.0);
  }
  const std::size_t n = x.size(), d1 = x[0].size();
  std::vector<double> a(n, 0.0), w(d1, 0.0);
  double lr = 0.0;
  for (const auto& xi : x) {
    double s = 0;
    for (double v : xi) s += v * v;
    lr = std::max(lr, s);
  }
  lr = 0.5 / lr;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double wx = 0;
      for (std::size_t j = 0; j < d1; ++j) wx += w[j] * x[i][j];
      const double grad = 1.0 - y[i] * wx;
      const double a_new = std::clamp(a[i] + lr * grad, 0.0, c);
      const double delta = (a_new - a[i]) * y[i];
      if (delta != 0.0)
        for (std::size_t j = 0; j < d1; ++j) w[j] += delta * x[i][j];
      a[i] = a_new;
    }
  }
  return {a.begin(), a.end()};
}

}  // namespace

TEST_CASE("aggregate fixtures") {
  auto m = matrix_of({{0.f, 1.f}});
  std::vector<float> q{1.f, 0.f};

  SUBCASE("two orthogonal unit vectors, equal weights") {
    auto out = aggregate(q, neighbors_over(m, {0}), m, {1.f, 1.f});
    CHECK(out[0] == doctest::Approx(0.70711f).epsilon(1e-4));
    CHECK(out[1] == doctest::Approx(0.70711f).epsilon(1e-4));
  }

  SUBCASE("half-weighted neighbor") {
    auto m2 = matrix_of({{0.6f, 0.8f}});
    auto out = aggregate(q, neighbors_over(m2, {0}), m2, {1.f, 0.5f});
    CHECK(out[0] == doctest::Approx(0.95577f).epsilon(1e-4));
    CHECK(out[1] == doctest::Approx(0.29408f).epsilon(1e-4));
  }

  SUBCASE("no neighbors reduces to the normalized query") {
    auto out = aggregate(q, NeighborList{}, m, {3.f});
    CHECK(out[0] == doctest::Approx(1.0f));
    CHECK(out[1] == doctest::Approx(0.0f));
  }

  SUBCASE("unit output norm on random inputs") {
    std::mt19937_64 rng(21);
    EmbeddingMatrix rm;
    rm.n = 5;
    rm.d = 8;
    for (std::size_t i = 0; i < 5; ++i) {
      auto v = testutil::random_unit(8, rng);
      rm.rows.insert(rm.rows.end(), v.begin(), v.end());
      rm.ids.push_back("r" + std::to_string(i));
    }
    auto qq = testutil::random_unit(8, rng);
    auto out = aggregate(qq, neighbors_over(rm, {0, 1, 2, 3, 4}), rm,
                         {1.f, 0.9f, 0.5f, 0.2f, 0.1f, 0.05f});
    double s = 0;
    for (float v : out) s += double(v) * v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("degenerate cancellation throws") {
    auto m2 = matrix_of({{-1.f, 0.f}});
    CHECK_THROWS_AS(aggregate(q, neighbors_over(m2, {0}), m2, {1.f, 1.f}), NumericError);
  }

  SUBCASE("weight count mismatch throws") {
    CHECK_THROWS_AS(aggregate(q, neighbors_over(m, {0}), m, {1.f}), ShapeError);
  }
}

TEST_CASE("weight profiles") {
  SUBCASE("aqe is all ones") {
    auto w = weights_aqe(3);
    REQUIRE(w.size() == 4);
    for (float v : w) CHECK(v == 1.0f);
    CHECK(weights_aqe(0) == WeightVector{1.0f});
  }

  SUBCASE("aqewd descends linearly to zero") {
    auto w = weights_aqewd(4);
    REQUIRE(w.size() == 5);
    CHECK(w[0] == doctest::Approx(1.0f));
    CHECK(w[1] == doctest::Approx(0.75f));
    CHECK(w[2] == doctest::Approx(0.5f));
    CHECK(w[3] == doctest::Approx(0.25f));
    CHECK(w[4] == doctest::Approx(0.0f));
    CHECK(weights_aqewd(0) == WeightVector{1.0f});
  }

  SUBCASE("alpha weights power the similarities") {
    NeighborList nn;
    nn.entries = {{"a", 0, 0.9f}, {"b", 1, 0.4f}, {"c", 2, -0.2f}};
    auto w = weights_alpha(nn, 2.0f);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == doctest::Approx(1.0f));
    CHECK(w[1] == doctest::Approx(0.81f));
    CHECK(w[2] == doctest::Approx(0.16f));
    CHECK(w[3] == doctest::Approx(0.0f));  // negative similarity clamped

    // alpha = 0 degenerates to aqe (clamped sims become 0^0 = 1 after clamp)
    auto w0 = weights_alpha(nn, 0.0f);
    CHECK(w0[1] == doctest::Approx(1.0f));
    CHECK_THROWS_AS(weights_alpha(nn, -1.0f), ConfigError);
  }
}

TEST_CASE("svm analytic fixture") {
  // one point per class on the x axis; max margin plane is x = 0
  SvmSolution sol = svm_train({{1.f, 0.f}}, {{-1.f, 0.f}}, 10.f);
  const float nrm = std::sqrt(sol.w[0] * sol.w[0] + sol.w[1] * sol.w[1]);
  CHECK(sol.w[0] / nrm == doctest::Approx(1.0f).epsilon(1e-4));
  CHECK(std::abs(sol.w[1] / nrm) < 1e-4);
  CHECK(std::abs(sol.b) < 1e-4);
  // functional margin 1 at the support vectors
  CHECK(sol.w[0] * 1.f + sol.b == doctest::Approx(1.0f).epsilon(1e-3));

  // mirrored data flips the plane
  SvmSolution neg = svm_train({{-1.f, 0.f}}, {{1.f, 0.f}}, 10.f);
  CHECK(neg.w[0] == doctest::Approx(-sol.w[0]).epsilon(1e-3));
}

TEST_CASE("svm against a projected-gradient oracle") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 6;
    std::vector<std::vector<float>> pos, neg;
    for (int i = 0; i < 8; ++i) {
      std::vector<float> p(d), q(d);
      for (std::size_t j = 0; j < d; ++j) {
        p[j] = float(g(rng)) + (j == 0 ? 2.f : 0.f);
        q[j] = float(g(rng)) - (j == 0 ? 2.f : 0.f);
      }
      pos.push_back(p);
      neg.push_back(q);
    }
    const float c = trial % 2 ? 0.5f : 5.0f;
    SvmSolution sol = svm_train(pos, neg, c, 0);
    auto ref = qp_oracle(pos, neg, c);

    // same optimum of the concave dual
    const double obj = dual_objective(pos, neg, sol.duals);
    const double obj_ref = dual_objective(pos, neg, ref);
    CHECK(obj == doctest::Approx(obj_ref).epsilon(1e-4));

    // box constraints and KKT stationarity
    std::vector<double> w(d + 1, 0.0);
    std::size_t idx = 0;
    auto fold = [&](const std::vector<float>& x, double y) {
      const double a = sol.duals[idx++];
      for (std::size_t j = 0; j < d; ++j) w[j] += a * y * x[j];
      w[d] += a * y;
    };
    for (const auto& x : pos) fold(x, 1.0);
    for (const auto& x : neg) fold(x, -1.0);
    idx = 0;
    auto kkt = [&](const std::vector<float>& x, double y) {
      const double a = sol.duals[idx++];
      CHECK(a >= -1e-9);
      CHECK(a <= double(c) + 1e-9);
      double wx = w[d];
      for (std::size_t j = 0; j < d; ++j) wx += w[j] * x[j];
      const double gproj = y * wx - 1.0;
      if (a < 1e-7) CHECK(gproj > -1e-5);          // inactive: no ascent direction
      else if (a > double(c) - 1e-7) CHECK(gproj < 1e-5);  // at the box edge
      else CHECK(std::abs(gproj) < 1e-5);          // interior: stationary
    };
    for (const auto& x : pos) kkt(x, 1.0);
    for (const auto& x : neg) kkt(x, -1.0);
  }
}

TEST_CASE("svm input validation") {
  CHECK_THROWS_AS(svm_train({}, {{1.f}}, 1.f), ConfigError);
  CHECK_THROWS_AS(svm_train({{1.f}}, {}, 1.f), ConfigError);
  CHECK_THROWS_AS(svm_train({{1.f}}, {{-1.f}}, 0.f), ConfigError);
  CHECK_THROWS_AS(svm_train({{1.f, 0.f}}, {{1.f}}, 1.f), ShapeError);
}

TEST_CASE("expand_query dispatch") {
  std::mt19937_64 rng(17);
  EmbeddingMatrix m;
  m.n = 30;
  m.d = 8;
  for (std::size_t i = 0; i < m.n; ++i) {
    auto v = testutil::random_unit(8, rng);
    m.rows.insert(m.rows.end(), v.begin(), v.end());
    m.ids.push_back("db" + std::to_string(i));
  }
  VectorIndex idx(m);
  auto q = testutil::random_unit(8, rng);

  SUBCASE("none copies the query") {
    QEMethodConfig cfg;
    auto out = expand_query(q, idx, cfg);
    for (std::size_t j = 0; j < q.size(); ++j) CHECK(out[j] == q[j]);
  }

  SUBCASE("aqe with nqe=0 normalizes the query only") {
    QEMethodConfig cfg;
    cfg.method = QEMethod::Aqe;
    cfg.nqe = 0;
    auto out = expand_query(q, idx, cfg);
    for (std::size_t j = 0; j < q.size(); ++j) CHECK(out[j] == doctest::Approx(q[j]).epsilon(1e-6));
  }

  SUBCASE("alpha-qe with alpha=0 equals aqe") {
    QEMethodConfig a0;
    a0.method = QEMethod::AlphaQe;
    a0.alpha = 0.f;
    a0.nqe = 5;
    QEMethodConfig aqe;
    aqe.method = QEMethod::Aqe;
    aqe.nqe = 5;
    auto va = expand_query(q, idx, a0);
    auto vb = expand_query(q, idx, aqe);
    for (std::size_t j = 0; j < va.size(); ++j) CHECK(va[j] == doctest::Approx(vb[j]).epsilon(1e-6));
  }

  SUBCASE("aqe equals the manual composition") {
    QEMethodConfig cfg;
    cfg.method = QEMethod::Aqe;
    cfg.nqe = 4;
    auto nn = idx.knn(q, 4);
    auto manual = aggregate(q, nn, idx.matrix(), weights_aqe(4));
    auto out = expand_query(q, idx, cfg);
    for (std::size_t j = 0; j < out.size(); ++j) CHECK(out[j] == doctest::Approx(manual[j]));
  }

  SUBCASE("nqe beyond the index size uses everything") {
    QEMethodConfig cfg;
    cfg.method = QEMethod::Aqe;
    cfg.nqe = 1000;
    auto out = expand_query(q, idx, cfg);  // must not throw
    CHECK(out.size() == q.size());
  }

  SUBCASE("dqe scores positives above negatives") {
    QEMethodConfig cfg;
    cfg.method = QEMethod::Dqe;
    cfg.nqe = 5;
    cfg.neg = 5;
    cfg.c_svm = 0.1f;
    auto w = expand_query(q, idx, cfg);
    double nrm = 0;
    for (float v : w) nrm += double(v) * v;
    CHECK(nrm == doctest::Approx(1.0).epsilon(1e-5));  // normalized direction
    auto top = idx.knn(q, 5);
    auto bottom = idx.bottom_k(q, 5);
    double mean_top = 0, mean_bottom = 0;
    for (const auto& e : top.entries) mean_top += dot(std::vector<float>(w),
        std::vector<float>(idx.matrix().row(e.row).begin(), idx.matrix().row(e.row).end()));
    for (const auto& e : bottom.entries) mean_bottom += dot(std::vector<float>(w),
        std::vector<float>(idx.matrix().row(e.row).begin(), idx.matrix().row(e.row).end()));
    CHECK(mean_top / 5 > mean_bottom / 5);
  }

  SUBCASE("lattqe without a model throws") {
    QEMethodConfig cfg;
    cfg.method = QEMethod::Lattqe;
    cfg.nqe = 3;
    CHECK_THROWS_AS(expand_query(q, idx, cfg), ConfigError);
  }
}

TEST_CASE("method names round-trip") {
  for (auto m : {QEMethod::None, QEMethod::Aqe, QEMethod::Aqewd, QEMethod::Dqe, QEMethod::AlphaQe,
                 QEMethod::Lattqe})
    CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), ConfigError);
}
