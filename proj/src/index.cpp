#include "qexpand/index.hpp"

#include <algorithm>
#include <cmath>

#include "qexpand/errors.hpp"

namespace qexpand {

void normalize_rows(EmbeddingMatrix& m) {
  for (std::size_t i = 0; i < m.n; ++i) {
    auto r = m.row(i);
    double s = 0;
    for (float v : r) s += double(v) * v;
    if (s == 0) throw DataError("normalize_rows: zero row for id '" + m.ids[i] + "'");
    const float inv = float(1.0 / std::sqrt(s));
    for (float& v : r) v *= inv;
  }
}

VectorIndex::VectorIndex(EmbeddingMatrix matrix) : matrix_(std::move(matrix)) {
  by_id_.reserve(matrix_.n);
  for (std::size_t i = 0; i < matrix_.n; ++i) {
    auto [it, inserted] = by_id_.emplace(matrix_.ids[i], i);
    if (!inserted) throw DataError("index: duplicate id '" + matrix_.ids[i] + "'");
  }
}

std::size_t VectorIndex::row_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError("index: unknown id '" + id + "'");
  return it->second;
}

NeighborList VectorIndex::ranked(std::span<const float> query, std::size_t k, bool largest,
                                 const std::unordered_set<std::string>* exclude) const {
  if (query.size() != matrix_.d) throw ShapeError("index: query dimension mismatch");
  std::vector<Neighbor> cand;
  cand.reserve(matrix_.n);
  for (std::size_t i = 0; i < matrix_.n; ++i) {
    if (exclude && exclude->count(matrix_.ids[i])) continue;
    auto r = matrix_.row(i);
    float s = 0;
    for (std::size_t j = 0; j < matrix_.d; ++j) s += query[j] * r[j];
    cand.push_back({matrix_.ids[i], i, s});
  }
  const auto cmp = [largest](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity)
      return largest ? a.similarity > b.similarity : a.similarity < b.similarity;
    return a.id < b.id;
  };
  k = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), cmp);
  cand.resize(k);
  return NeighborList{std::nullopt, std::move(cand)};
}

NeighborList VectorIndex::knn(std::span<const float> query, std::size_t k,
                              const std::unordered_set<std::string>* exclude) const {
  return ranked(query, k, true, exclude);
}

NeighborList VectorIndex::bottom_k(std::span<const float> query, std::size_t k,
                                   const std::unordered_set<std::string>* exclude) const {
  return ranked(query, k, false, exclude);
}

}  // namespace qexpand
