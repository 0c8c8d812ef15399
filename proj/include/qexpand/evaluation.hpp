#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "qexpand/index.hpp"
#include "qexpand/io.hpp"
#include "qexpand/qe_classic.hpp"

namespace qexpand {

enum class Protocol { Easy, Medium, Hard };

Protocol parse_protocol(const std::string& s);
std::string protocol_name(Protocol p);

// Positive / junk sets after applying a protocol to an annotation.
// Medium: easy+hard positive, junk ignored. Hard: hard positive, easy junk.
struct ResolvedSets {
  std::unordered_set<std::string> positives;
  std::unordered_set<std::string> junk;
};

ResolvedSets resolve_protocol(const QueryAnnotation& a, Protocol p);

// Trapezoidal average precision over a duplicate-free ranking. Junk ids are
// removed from the ranking first. Returns nullopt when there are no
// positives (query skipped upstream).
std::optional<double> average_precision(const std::vector<std::string>& ranked,
                                        const std::unordered_set<std::string>& positives,
                                        const std::unordered_set<std::string>& junk);

struct QueryResult {
  std::string id;
  double ap = 0;
  std::size_t n_relevant = 0;
};

struct EvalReport {
  std::vector<QueryResult> per_query;
  double map = 0;
  QEMethodConfig config;
  Protocol protocol = Protocol::Hard;
};

// Per-query expansion -> search -> AP -> mAP. Query rows are excluded from
// the search results.
EvalReport evaluate(const VectorIndex& index, const EmbeddingMatrix& queries,
                    const std::vector<QueryAnnotation>& annotations,
                    const QEMethodConfig& config, Protocol protocol,
                    const LattqeRunner* model = nullptr, std::size_t threads = 1);

struct SweepCell {
  std::string method;
  std::size_t nqe = 0;
  double map = 0;
};

std::vector<SweepCell> sweep_nqe(const VectorIndex& index, const EmbeddingMatrix& queries,
                                 const std::vector<QueryAnnotation>& annotations,
                                 const std::vector<QEMethodConfig>& methods,
                                 const std::vector<std::size_t>& nqe_list, Protocol protocol,
                                 const LattqeRunner* model = nullptr, std::size_t threads = 1);

enum class Grouping { ByRelevantCount, ByPreQeAp };

struct GroupStat {
  double mean_statistic = 0;
  double map_before = 0;
  double map_after = 0;
  double relative_improvement_pct = 0;
  std::size_t count = 0;
};

// Splits queries into 3 groups at the 33rd/66th percentile of the grouping
// statistic and reports the relative mAP improvement per group.
std::vector<GroupStat> group_analysis(const std::vector<QueryResult>& before,
                                      const std::vector<QueryResult>& after,
                                      Grouping grouping);

}  // namespace qexpand
