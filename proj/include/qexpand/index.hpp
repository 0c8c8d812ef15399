#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace qexpand {

// N x D row-major unit-norm embeddings plus per-row ids. The search universe.
struct EmbeddingMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> rows;       // n * d, row-major
  std::vector<std::string> ids;  // unique, one per row

  std::span<const float> row(std::size_t i) const { return {rows.data() + i * d, d}; }
  std::span<float> row(std::size_t i) { return {rows.data() + i * d, d}; }
};

struct Neighbor {
  std::string id;
  std::size_t row = 0;
  float similarity = 0.f;
};

// Ranked neighbors for one query, non-increasing similarity, ties by id.
struct NeighborList {
  std::optional<std::string> query_id;
  std::vector<Neighbor> entries;
};

// Normalizes every row to unit l2 norm in place. Throws DataError naming the
// offending id on an all-zero row.
void normalize_rows(EmbeddingMatrix& m);

// Immutable exact cosine search.
class VectorIndex {
 public:
  explicit VectorIndex(EmbeddingMatrix matrix);

  const EmbeddingMatrix& matrix() const { return matrix_; }
  std::size_t size() const { return matrix_.n; }
  std::size_t dim() const { return matrix_.d; }

  std::size_t row_of(const std::string& id) const;
  bool contains(const std::string& id) const { return by_id_.count(id) > 0; }

  NeighborList knn(std::span<const float> query, std::size_t k,
                   const std::unordered_set<std::string>* exclude = nullptr) const;
  NeighborList bottom_k(std::span<const float> query, std::size_t k,
                        const std::unordered_set<std::string>* exclude = nullptr) const;

 private:
  NeighborList ranked(std::span<const float> query, std::size_t k, bool largest,
                      const std::unordered_set<std::string>* exclude) const;

  EmbeddingMatrix matrix_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace qexpand
