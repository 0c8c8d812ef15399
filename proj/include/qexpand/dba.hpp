#pragma once

#include "qexpand/index.hpp"
#include "qexpand/qe_classic.hpp"

namespace qexpand {

// Offline expansion of every database row by the configured QE method.
// Returns a new matrix with identical ids; a failing row falls back to its
// original vector. `n_failed`, when given, receives the fallback count.
EmbeddingMatrix augment_database(const VectorIndex& index, const QEMethodConfig& config,
                                 std::size_t ndba, const LattqeRunner* model = nullptr,
                                 std::size_t threads = 1, std::size_t* n_failed = nullptr);

}  // namespace qexpand
