#pragma once

#include <cstdint>
#include <random>

#include "qexpand/index.hpp"
#include "qexpand/io.hpp"

namespace qexpand {

// Synthetic clustered unit-vector corpus standing in for a landmark dataset:
// class centers on the sphere, members perturbed by gaussian noise, plus
// unlabeled distractors. Train/val split is by class.
struct SynthConfig {
  std::size_t n_classes = 200;
  std::size_t items_per_class_lo = 5;
  std::size_t items_per_class_hi = 50;
  std::size_t dim = 64;
  double sigma = 0.25;            // within-class noise (lower bound when sigma_hi is set)
  double sigma_hi = 0;            // per-class noise drawn from [sigma, sigma_hi]; 0 = constant
  double center_correlation = 0;  // cosine between sibling centers (classes 2i and 2i+1)
  double sibling_fraction = 1.0;  // fraction of class pairs that are actually correlated
  std::size_t sibling_items_hi = 0;  // items-per-class cap for sibling classes; 0 = no cap
  std::size_t subspace_dim = 0;   // anisotropic classes: spread directions per class
  double subspace_sigma = 0;      // noise scale along those directions
  double arc_extent = 0;          // radians; >0 spreads members along a per-class geodesic arc
  std::size_t n_distractors = 2000;
  double query_fraction = 0.2;    // per class
  double train_fraction = 0.6;    // of classes
  std::uint64_t seed = 0;

  void validate() const;
};

struct Corpus {
  EmbeddingMatrix embeddings;  // all rows: members, queries, distractors
  std::vector<ItemMeta> meta;  // aligned with embeddings rows
  std::vector<QueryAnnotation> annotations;  // queries of the val/db side
};

Corpus generate_corpus(const SynthConfig& cfg);

// Views of a corpus restricted to a split subset (rows copied).
EmbeddingMatrix select_rows(const Corpus& corpus, const std::vector<Split>& splits);
std::vector<ItemMeta> select_meta(const Corpus& corpus, const std::vector<Split>& splits);

// Random unit vector, uniform on the sphere.
std::vector<float> random_unit_vector(std::size_t dim, std::mt19937_64& rng);

}  // namespace qexpand
