#include "qexpand/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <unordered_map>

#include "qexpand/errors.hpp"
#include "qexpand/lattqe.hpp"

namespace qexpand {

Protocol parse_protocol(const std::string& s) {
  if (s == "easy") return Protocol::Easy;
  if (s == "medium") return Protocol::Medium;
  if (s == "hard") return Protocol::Hard;
  throw ConfigError("unknown protocol '" + s + "'");
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Easy: return "easy";
    case Protocol::Medium: return "medium";
    case Protocol::Hard: return "hard";
  }
  return "?";
}

ResolvedSets resolve_protocol(const QueryAnnotation& a, Protocol p) {
  ResolvedSets r;
  r.junk.insert(a.junk.begin(), a.junk.end());
  switch (p) {
    case Protocol::Easy:
      r.positives.insert(a.easy.begin(), a.easy.end());
      r.junk.insert(a.hard.begin(), a.hard.end());
      break;
    case Protocol::Medium:
      r.positives.insert(a.easy.begin(), a.easy.end());
      r.positives.insert(a.hard.begin(), a.hard.end());
      break;
    case Protocol::Hard:
      r.positives.insert(a.hard.begin(), a.hard.end());
      r.junk.insert(a.easy.begin(), a.easy.end());
      break;
  }
  return r;
}

std::optional<double> average_precision(const std::vector<std::string>& ranked,
                                        const std::unordered_set<std::string>& positives,
                                        const std::unordered_set<std::string>& junk) {
  const std::size_t R = positives.size();
  if (R == 0) return std::nullopt;
  double ap = 0;
  std::size_t rank = 0;  // filtered 0-based rank
  std::size_t found = 0;
  for (const auto& id : ranked) {
    if (junk.count(id)) continue;
    if (positives.count(id)) {
      const double prec_before = rank == 0 ? 1.0 : double(found) / double(rank);
      const double prec_at = double(found + 1) / double(rank + 1);
      ap += (prec_before + prec_at) / 2.0;
      ++found;
    }
    ++rank;
  }
  return ap / double(R);
}

namespace {

QueryResult evaluate_one(const VectorIndex& index, std::span<const float> qvec,
                         const QueryAnnotation& ann, const ResolvedSets& sets,
                         const QEMethodConfig& config, const LattqeRunner* model) {
  std::unordered_set<std::string> exclude{ann.id};
  std::vector<float> expanded = expand_query(qvec, index, config, model, &exclude);
  NeighborList nn = index.knn(expanded, index.size(), &exclude);
  std::vector<std::string> ranked;
  ranked.reserve(nn.entries.size());
  for (const auto& e : nn.entries) ranked.push_back(e.id);
  QueryResult r;
  r.id = ann.id;
  r.n_relevant = sets.positives.size();
  r.ap = average_precision(ranked, sets.positives, sets.junk).value();
  return r;
}

}  // namespace

EvalReport evaluate(const VectorIndex& index, const EmbeddingMatrix& queries,
                    const std::vector<QueryAnnotation>& annotations,
                    const QEMethodConfig& config, Protocol protocol, const LattqeRunner* model,
                    std::size_t threads) {
  config.validate();
  std::unordered_map<std::string, std::size_t> qrow;
  for (std::size_t i = 0; i < queries.n; ++i) qrow.emplace(queries.ids[i], i);

  struct Job {
    const QueryAnnotation* ann;
    std::size_t row;
    ResolvedSets sets;
  };
  std::vector<Job> jobs;
  for (const auto& ann : annotations) {
    auto it = qrow.find(ann.id);
    if (it == qrow.end()) throw DataError("evaluate: no query vector for id '" + ann.id + "'");
    ResolvedSets sets = resolve_protocol(ann, protocol);
    if (sets.positives.empty()) continue;  // undefined AP, excluded from the mean
    jobs.push_back({&ann, it->second, std::move(sets)});
  }

  std::vector<QueryResult> results(jobs.size());
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      results[i] = evaluate_one(index, queries.row(jobs[i].row), *jobs[i].ann, jobs[i].sets,
                                config, model);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
            results[i] = evaluate_one(index, queries.row(jobs[i].row), *jobs[i].ann,
                                      jobs[i].sets, config, model);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.per_query = std::move(results);
  report.config = config;
  report.protocol = protocol;
  if (report.per_query.empty()) throw DataError("evaluate: no query has positives");
  double sum = 0;
  for (const auto& r : report.per_query) sum += r.ap;
  report.map = sum / double(report.per_query.size());
  return report;
}

std::vector<SweepCell> sweep_nqe(const VectorIndex& index, const EmbeddingMatrix& queries,
                                 const std::vector<QueryAnnotation>& annotations,
                                 const std::vector<QEMethodConfig>& methods,
                                 const std::vector<std::size_t>& nqe_list, Protocol protocol,
                                 const LattqeRunner* model, std::size_t threads) {
  std::vector<SweepCell> cells;
  for (const auto& base : methods)
    for (std::size_t nqe : nqe_list) {
      QEMethodConfig cfg = base;
      cfg.nqe = nqe;
      EvalReport rep = evaluate(index, queries, annotations, cfg, protocol, model, threads);
      cells.push_back({method_name(cfg.method), nqe, rep.map});
    }
  return cells;
}

std::vector<GroupStat> group_analysis(const std::vector<QueryResult>& before,
                                      const std::vector<QueryResult>& after,
                                      Grouping grouping) {
  if (before.size() != after.size())
    throw ShapeError("group_analysis: before/after size mismatch");
  if (before.size() < 3) throw ConfigError("group_analysis: need at least 3 queries");
  std::unordered_map<std::string, double> after_ap;
  for (const auto& r : after) after_ap.emplace(r.id, r.ap);

  struct Entry {
    double stat;
    std::string id;
    double ap_before;
    double ap_after;
  };
  std::vector<Entry> entries;
  for (const auto& r : before) {
    auto it = after_ap.find(r.id);
    if (it == after_ap.end())
      throw DataError("group_analysis: id '" + r.id + "' missing in after set");
    const double stat =
        grouping == Grouping::ByRelevantCount ? double(r.n_relevant) : r.ap;
    entries.push_back({stat, r.id, r.ap, it->second});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.stat != b.stat ? a.stat < b.stat : a.id < b.id;
  });

  // 33rd/66th percentile cut-offs, rank based.
  const std::size_t n = entries.size();
  const std::size_t c1 = n / 3, c2 = 2 * n / 3;
  std::vector<GroupStat> groups(3);
  for (std::size_t i = 0; i < n; ++i) {
    GroupStat& g = groups[i < c1 ? 0 : (i < c2 ? 1 : 2)];
    g.mean_statistic += entries[i].stat;
    g.map_before += entries[i].ap_before;
    g.map_after += entries[i].ap_after;
    ++g.count;
  }
  for (auto& g : groups) {
    if (g.count == 0) continue;
    g.mean_statistic /= double(g.count);
    g.map_before /= double(g.count);
    g.map_after /= double(g.count);
    g.relative_improvement_pct =
        g.map_before == 0 ? 0 : 100.0 * (g.map_after - g.map_before) / g.map_before;
  }
  return groups;
}

}  // namespace qexpand
