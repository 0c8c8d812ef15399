#include "qexpand/lattqe.hpp"

namespace qexpand {

Tensor<float> LattqeRunner::stack_inputs(std::span<const float> query,
                                         const NeighborList& neighbors,
                                         const EmbeddingMatrix& matrix) const {
  const std::size_t d = query.size();
  const std::size_t k1 = neighbors.entries.size() + 1;
  Tensor<float> inputs = Tensor<float>::zeros({k1, d});
  std::copy(query.begin(), query.end(), inputs.data.begin());
  for (std::size_t i = 0; i < neighbors.entries.size(); ++i) {
    auto r = matrix.row(neighbors.entries[i].row);
    if (r.size() != d) throw ShapeError("lattqe: dimension mismatch");
    std::copy(r.begin(), r.end(), inputs.data.begin() + (i + 1) * d);
  }
  return inputs;
}

std::vector<float> LattqeRunner::expand(std::span<const float> query,
                                        const NeighborList& neighbors,
                                        const EmbeddingMatrix& matrix, WeightMode mode) const {
  Tape<float> tape;
  auto q = model_.expanded_query(tape, stack_inputs(query, neighbors, matrix), mode);
  return tape.value(q).data;
}

WeightVector LattqeRunner::weights(std::span<const float> query, const NeighborList& neighbors,
                                   const EmbeddingMatrix& matrix, WeightMode mode) const {
  Tape<float> tape;
  Tensor<float> inputs = stack_inputs(query, neighbors, matrix);
  auto x = tape.constant(inputs);
  auto transformed = model_.encode(tape, model_.positional_encode(tape, x));
  auto w = model_.attention_weights(tape, transformed, mode);
  return tape.value(w).data;
}

}  // namespace qexpand
