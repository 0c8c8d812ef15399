#include "qexpand/dba.hpp"

#include <atomic>
#include <thread>

#include "qexpand/errors.hpp"
#include "qexpand/lattqe.hpp"

namespace qexpand {

EmbeddingMatrix augment_database(const VectorIndex& index, const QEMethodConfig& config,
                                 std::size_t ndba, const LattqeRunner* model,
                                 std::size_t threads, std::size_t* n_failed) {
  config.validate();
  EmbeddingMatrix out = index.matrix();
  if (ndba == 0 || config.method == QEMethod::None) {
    if (n_failed) *n_failed = 0;
    return out;  // bit-identical copy
  }
  QEMethodConfig row_cfg = config;
  row_cfg.nqe = ndba;

  std::atomic<std::size_t> failed{0};
  auto expand_row = [&](std::size_t i) {
    // The row itself is slot 0 of the aggregation, so it is excluded from
    // its own neighbor list.
    std::unordered_set<std::string> self{index.matrix().ids[i]};
    try {
      std::vector<float> expanded =
          expand_query(index.matrix().row(i), index, row_cfg, model, &self);
      std::copy(expanded.begin(), expanded.end(), out.row(i).begin());
    } catch (const std::exception&) {
      failed.fetch_add(1);  // keep the original vector
    }
  };

  const std::size_t n = index.size();
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, n));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i) expand_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) expand_row(i);
      });
    for (auto& th : pool) th.join();
  }
  if (n_failed) *n_failed = failed.load();
  return out;
}

}  // namespace qexpand
