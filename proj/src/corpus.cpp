#include "qexpand/corpus.hpp"

#include <cmath>

#include "qexpand/errors.hpp"

namespace qexpand {

void SynthConfig::validate() const {
  if (n_classes == 0) throw ConfigError("synth: n_classes must be positive");
  if (items_per_class_lo < 1 || items_per_class_hi < items_per_class_lo)
    throw ConfigError("synth: bad items-per-class range");
  if (dim == 0) throw ConfigError("synth: dim must be positive");
  if (sigma < 0) throw ConfigError("synth: sigma must be >= 0");
  if (center_correlation < 0 || center_correlation >= 1)
    throw ConfigError("synth: center_correlation must be in [0,1)");
  if (sibling_fraction < 0 || sibling_fraction > 1)
    throw ConfigError("synth: sibling_fraction must be in [0,1]");
  if (sibling_items_hi != 0 &&
      (sibling_items_hi < items_per_class_lo || sibling_items_hi > items_per_class_hi))
    throw ConfigError("synth: sibling_items_hi must lie within the items-per-class range");
  if (sigma_hi != 0 && sigma_hi < sigma)
    throw ConfigError("synth: sigma_hi must be >= sigma");
  if (subspace_dim >= dim) throw ConfigError("synth: subspace_dim must be < dim");
  if (subspace_sigma < 0) throw ConfigError("synth: subspace_sigma must be >= 0");
  if ((subspace_dim == 0) != (subspace_sigma == 0))
    throw ConfigError("synth: subspace_dim and subspace_sigma must be set together");
  if (arc_extent < 0 || arc_extent > 3.141592653589793)
    throw ConfigError("synth: arc_extent must be in [0, pi]");
  if (arc_extent > 0 && dim < 2) throw ConfigError("synth: arc_extent requires dim >= 2");
  if (query_fraction < 0 || query_fraction > 1)
    throw ConfigError("synth: query_fraction must be in [0,1]");
  if (train_fraction < 0 || train_fraction > 1)
    throw ConfigError("synth: train_fraction must be in [0,1]");
}

std::vector<float> random_unit_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> v(dim);
  double s = 0;
  do {
    s = 0;
    for (auto& x : v) {
      x = float(gauss(rng));
      s += double(x) * x;
    }
  } while (s == 0);
  const float inv = float(1.0 / std::sqrt(s));
  for (auto& x : v) x *= inv;
  return v;
}

Corpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Corpus corpus;
  auto& m = corpus.embeddings;
  m.d = cfg.dim;

  auto push_row = [&](const std::vector<float>& v, std::string id,
                      std::optional<std::string> cls, Split split) {
    m.rows.insert(m.rows.end(), v.begin(), v.end());
    m.ids.push_back(id);
    corpus.meta.push_back({m.n, std::move(id), std::move(cls), split});
    ++m.n;
  };

  // Anisotropic classes: members spread along a class-specific subspace on
  // top of the isotropic noise. Two members can then sit far apart while a
  // cross-class pair sits closer, so relevance is not a function of the pair
  // similarity alone — the retrieved set is needed to locate the subspace.
  // With arc_extent > 0, classes are one-dimensional manifolds: members sit at
  // a uniform angle along a per-class geodesic arc, so two members of the same
  // class can be far apart in cosine yet connected through intermediate
  // members — the structure query expansion is meant to exploit.
  auto member = [&](const std::vector<float>& center, const std::vector<float>& tangent,
                    const std::vector<std::vector<float>>& basis, double sigma) {
    std::vector<float> v(cfg.dim);
    double s = 0;
    do {
      s = 0;
      std::vector<double> along(basis.size());
      for (auto& a : along) a = cfg.subspace_sigma * gauss(rng);
      double ct = 1, st = 0;
      if (cfg.arc_extent > 0) {
        const double theta =
            std::uniform_real_distribution<double>(0.0, cfg.arc_extent)(rng);
        ct = std::cos(theta);
        st = std::sin(theta);
      }
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        double x = ct * center[j] + sigma * gauss(rng);
        if (cfg.arc_extent > 0) x += st * tangent[j];
        for (std::size_t b = 0; b < basis.size(); ++b) x += along[b] * basis[b][j];
        v[j] = float(x);
        s += double(v[j]) * v[j];
      }
    } while (s == 0);
    const float inv = float(1.0 / std::sqrt(s));
    for (auto& x : v) x *= inv;
    return v;
  };

  const std::size_t n_train_classes =
      std::size_t(std::llround(cfg.train_fraction * double(cfg.n_classes)));
  std::uniform_int_distribution<std::size_t> count_dist(cfg.items_per_class_lo,
                                                        cfg.items_per_class_hi);

  // class-level maps filled as we go; queries get annotated afterwards
  std::vector<std::pair<std::string, std::string>> pending_queries;  // (query id, class)

  // With center_correlation > 0, classes come in confusable sibling pairs:
  // center_{2i+1} is a unit mix of center_{2i} and a fresh direction, so the
  // sibling centers have cosine ~= center_correlation. Siblings share the
  // train/eval side whenever the train class count is even.
  std::vector<float> prev_center;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const bool is_train = c < n_train_classes;
    const std::string cls = "class" + std::to_string(c);
    // Pair i covers classes 2i and 2i+1; a pair is a correlated sibling pair
    // when the running fraction of sibling pairs stays below sibling_fraction
    // (evenly spread across class indices, hence across the train/val split).
    const std::size_t pair = c / 2;
    const bool in_sibling_pair =
        cfg.center_correlation > 0 &&
        std::floor(double(pair + 1) * cfg.sibling_fraction) >
            std::floor(double(pair) * cfg.sibling_fraction);
    std::vector<float> center = random_unit_vector(cfg.dim, rng);
    if (in_sibling_pair && c % 2 == 1) {
      const double rho = cfg.center_correlation;
      const double mix = std::sqrt(1.0 - rho * rho);
      double s = 0;
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        center[j] = float(rho * prev_center[j] + mix * center[j]);
        s += double(center[j]) * center[j];
      }
      const float inv = float(1.0 / std::sqrt(s));
      for (auto& x : center) x *= inv;
    }
    prev_center = center;
    // Heteroscedastic classes: a mid-range cosine to the query is relevant for
    // a diffuse class yet a sibling-class impostor for a tight one, so the
    // retrieval-set spread carries signal the raw pair similarity does not.
    const double sigma = cfg.sigma_hi == 0
                             ? cfg.sigma
                             : std::uniform_real_distribution<double>(cfg.sigma,
                                                                      cfg.sigma_hi)(rng);
    std::vector<std::vector<float>> basis(cfg.subspace_dim);
    for (auto& b : basis) b = random_unit_vector(cfg.dim, rng);
    std::vector<float> tangent;
    if (cfg.arc_extent > 0) {
      tangent = random_unit_vector(cfg.dim, rng);
      double proj = 0;
      for (std::size_t j = 0; j < cfg.dim; ++j) proj += double(tangent[j]) * center[j];
      double s = 0;
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        tangent[j] = float(tangent[j] - proj * center[j]);
        s += double(tangent[j]) * tangent[j];
      }
      const float inv = float(1.0 / std::sqrt(s));
      for (auto& x : tangent) x *= inv;
    }
    const std::size_t count =
        in_sibling_pair && cfg.sibling_items_hi != 0
            ? std::uniform_int_distribution<std::size_t>(cfg.items_per_class_lo,
                                                         cfg.sibling_items_hi)(rng)
            : count_dist(rng);
    std::size_t n_queries = 0;
    if (!is_train && count >= 2) {
      n_queries = std::max<std::size_t>(
          1, std::size_t(std::llround(cfg.query_fraction * double(count))));
      n_queries = std::min(n_queries, count - 1);  // keep at least one db positive
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::string id = cls + "_" + std::to_string(i);
      const Split split = is_train ? Split::Train : (i < n_queries ? Split::Query : Split::Db);
      push_row(member(center, tangent, basis, sigma), id, cls, split);
      if (split == Split::Query) pending_queries.emplace_back(id, cls);
    }
  }
  for (std::size_t j = 0; j < cfg.n_distractors; ++j)
    push_row(random_unit_vector(cfg.dim, rng), "distractor_" + std::to_string(j), std::nullopt,
             Split::Distractor);

  // Annotations: all same-class database items are hard positives.
  std::unordered_map<std::string, std::vector<std::string>> db_by_class;
  for (const auto& it : corpus.meta)
    if (it.split == Split::Db && it.cls) db_by_class[*it.cls].push_back(it.id);
  for (auto& [qid, cls] : pending_queries) {
    QueryAnnotation a;
    a.id = qid;
    a.hard = db_by_class[cls];
    corpus.annotations.push_back(std::move(a));
  }
  return corpus;
}

EmbeddingMatrix select_rows(const Corpus& corpus, const std::vector<Split>& splits) {
  EmbeddingMatrix out;
  out.d = corpus.embeddings.d;
  for (const auto& it : corpus.meta) {
    bool keep = false;
    for (Split s : splits) keep = keep || it.split == s;
    if (!keep) continue;
    auto r = corpus.embeddings.row(it.row);
    out.rows.insert(out.rows.end(), r.begin(), r.end());
    out.ids.push_back(it.id);
    ++out.n;
  }
  return out;
}

std::vector<ItemMeta> select_meta(const Corpus& corpus, const std::vector<Split>& splits) {
  std::vector<ItemMeta> out;
  for (const auto& it : corpus.meta) {
    for (Split s : splits)
      if (it.split == s) {
        ItemMeta m = it;
        m.row = out.size();
        out.push_back(std::move(m));
        break;
      }
  }
  return out;
}

}  // namespace qexpand
