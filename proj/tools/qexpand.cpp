// qexpand: command-line workbench for query-expansion experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qexpand/corpus.hpp"
#include "qexpand/dba.hpp"
#include "qexpand/errors.hpp"
#include "qexpand/evaluation.hpp"
#include "qexpand/io.hpp"
#include "qexpand/qe_classic.hpp"
#include "qexpand/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qexpand;

namespace {

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot hash missing file: " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= std::uint8_t(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

struct CommonOpts {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "random seed");
  const char* env_threads = std::getenv("QEXPAND_THREADS");
  if (env_threads) c.threads = std::strtoull(env_threads, nullptr, 10);
  cmd->add_option("--threads", c.threads, "worker thread count (1 = deterministic)");
  cmd->add_option("--out", c.out, "output path (or prefix)");
}

struct MethodOpts {
  std::string method = "none";
  std::size_t nqe = 0;
  float alpha = 3.0f;
  float c_svm = 0.1f;
  std::size_t neg = 5;
  std::string checkpoint;
  std::string weight_mode = "similarity";

  QEMethodConfig config() const {
    QEMethodConfig cfg;
    cfg.method = parse_method(method);
    cfg.nqe = nqe;
    cfg.alpha = alpha;
    cfg.c_svm = c_svm;
    cfg.neg = neg;
    cfg.checkpoint = checkpoint;
    if (weight_mode == "similarity") cfg.weight_mode = WeightMode::Similarity;
    else if (weight_mode == "tempered-softmax") cfg.weight_mode = WeightMode::TemperedSoftmax;
    else throw ConfigError("unknown weight mode '" + weight_mode + "'");
    cfg.validate();
    return cfg;
  }

  json to_json() const {
    return {{"method", method},   {"nqe", nqe},           {"alpha", alpha},
            {"c_svm", c_svm},     {"neg", neg},           {"checkpoint", checkpoint},
            {"weight_mode", weight_mode}};
  }
};

void add_method(CLI::App* cmd, MethodOpts& m, const char* prefix = "") {
  const std::string p(prefix);
  cmd->add_option("--" + p + "method", m.method,
                  "none|aqe|aqewd|dqe|alpha-qe|lattqe");
  cmd->add_option("--" + p + "nqe", m.nqe, "neighbors aggregated");
  cmd->add_option("--" + p + "alpha", m.alpha, "alpha-qe exponent");
  cmd->add_option("--" + p + "c-svm", m.c_svm, "dqe SVM regularization");
  cmd->add_option("--" + p + "neg", m.neg, "dqe negative count");
  cmd->add_option("--" + p + "checkpoint", m.checkpoint, "lattqe checkpoint");
  cmd->add_option("--" + p + "weight-mode", m.weight_mode, "similarity|tempered-softmax");
}

struct DatasetOpts {
  std::string embeddings;
  std::string meta;
  std::string annotations;
};

void add_dataset(CLI::App* cmd, DatasetOpts& d, bool need_annotations) {
  cmd->add_option("--embeddings", d.embeddings, "QEXP embedding file")->required();
  cmd->add_option("--meta", d.meta, "JSONL sidecar metadata")->required();
  auto* a = cmd->add_option("--annotations", d.annotations, "query annotation JSON");
  if (need_annotations) a->required();
}

struct Dataset {
  EmbeddingMatrix all;
  std::vector<ItemMeta> meta;
  std::vector<QueryAnnotation> annotations;

  EmbeddingMatrix rows_of(const std::vector<Split>& splits) const {
    EmbeddingMatrix out;
    out.d = all.d;
    for (const auto& it : meta) {
      bool keep = false;
      for (Split s : splits) keep = keep || it.split == s;
      if (!keep) continue;
      auto r = all.row(it.row);
      out.rows.insert(out.rows.end(), r.begin(), r.end());
      out.ids.push_back(it.id);
      ++out.n;
    }
    return out;
  }

  std::vector<ItemMeta> meta_of(const std::vector<Split>& splits) const {
    std::vector<ItemMeta> out;
    for (const auto& it : meta)
      for (Split s : splits)
        if (it.split == s) {
          ItemMeta m = it;
          m.row = out.size();
          out.push_back(std::move(m));
          break;
        }
    return out;
  }
};

Dataset load_dataset(const DatasetOpts& opts) {
  Dataset d;
  d.all = load_embeddings(opts.embeddings);
  d.meta = load_metadata(opts.meta);
  if (d.meta.size() != d.all.n)
    throw DataError("metadata rows (" + std::to_string(d.meta.size()) +
                    ") do not match embedding rows (" + std::to_string(d.all.n) + ")");
  for (const auto& it : d.meta) {
    if (it.row >= d.all.n) throw DataError("metadata row out of range: " + it.id);
    d.all.ids[it.row] = it.id;
  }
  if (!opts.annotations.empty()) d.annotations = load_annotations(opts.annotations);
  return d;
}

void write_manifest(const std::string& out, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs) {
  if (out.empty()) return;
  json inputs_j = json::object();
  for (const auto& p : inputs)
    if (!p.empty() && fs::exists(p)) inputs_j[p] = hex64(fnv1a64_file(p));
  json manifest{{"tool", "qexpand"},
                {"format_version", 1},
                {"command", command},
                {"config", config},
                {"inputs", inputs_j}};
  std::ofstream f(out + ".manifest.json");
  f << manifest.dump(2) << "\n";
}

std::optional<LattqeRunner> maybe_runner(const QEMethodConfig& cfg) {
  std::optional<LattqeRunner> runner;
  if (cfg.method == QEMethod::Lattqe) {
    if (cfg.checkpoint.empty()) throw ConfigError("lattqe requires --checkpoint");
    runner.emplace(load_model(cfg.checkpoint));
  }
  return runner;
}

std::vector<Split> db_splits{Split::Db, Split::Distractor};

// --- subcommand bodies ---

int cmd_synth(const CommonOpts& common, const SynthConfig& synth_in) {
  SynthConfig cfg = synth_in;
  cfg.seed = common.seed;
  if (common.out.empty()) throw ConfigError("synth requires --out prefix");
  Corpus corpus = generate_corpus(cfg);
  save_embeddings(common.out + ".qexp", corpus.embeddings);
  save_metadata(common.out + ".meta.jsonl", corpus.meta);
  save_annotations(common.out + ".annotations.json", corpus.annotations);
  json cfg_j{{"classes", cfg.n_classes},     {"dim", cfg.dim},
             {"sigma", cfg.sigma},           {"sigma_hi", cfg.sigma_hi},
             {"center_correlation", cfg.center_correlation},
             {"subspace_dim", cfg.subspace_dim}, {"subspace_sigma", cfg.subspace_sigma},
             {"arc_extent", cfg.arc_extent},
             {"sibling_fraction", cfg.sibling_fraction},
             {"sibling_items_hi", cfg.sibling_items_hi},
             {"distractors", cfg.n_distractors},
             {"items_lo", cfg.items_per_class_lo}, {"items_hi", cfg.items_per_class_hi},
             {"query_fraction", cfg.query_fraction}, {"train_fraction", cfg.train_fraction},
             {"seed", cfg.seed}};
  write_manifest(common.out, "synth", cfg_j, {});
  std::size_t n_queries = corpus.annotations.size();
  std::cout << "generated " << corpus.embeddings.n << " vectors (dim " << cfg.dim << "), "
            << n_queries << " queries -> " << common.out << ".{qexp,meta.jsonl,annotations.json}"
            << std::endl;
  return 0;
}

int cmd_index(const CommonOpts&, const DatasetOpts& data) {
  Dataset d = load_dataset(data);
  std::size_t per_split[5] = {0, 0, 0, 0, 0};
  for (const auto& it : d.meta) ++per_split[int(it.split)];
  std::cout << "embeddings: " << d.all.n << " x " << d.all.d << "\n";
  for (Split s : {Split::Train, Split::Val, Split::Db, Split::Query, Split::Distractor})
    std::cout << "  " << split_name(s) << ": " << per_split[int(s)] << "\n";
  VectorIndex idx(d.rows_of(db_splits));
  std::cout << "database side: " << idx.size() << " rows, all unit norm" << std::endl;
  return 0;
}

int cmd_search(const CommonOpts& common, const DatasetOpts& data, const std::string& query_id,
               std::size_t k) {
  Dataset d = load_dataset(data);
  VectorIndex idx(d.rows_of(db_splits));
  std::size_t qrow = SIZE_MAX;
  for (const auto& it : d.meta)
    if (it.id == query_id) qrow = it.row;
  if (qrow == SIZE_MAX) throw DataError("unknown query id '" + query_id + "'");
  std::unordered_set<std::string> exclude{query_id};
  NeighborList nn = idx.knn(d.all.row(qrow), k, &exclude);
  json rows = json::array();
  for (std::size_t i = 0; i < nn.entries.size(); ++i) {
    std::cout << (i + 1) << "\t" << nn.entries[i].id << "\t" << nn.entries[i].similarity << "\n";
    rows.push_back({{"rank", i + 1}, {"id", nn.entries[i].id},
                    {"similarity", nn.entries[i].similarity}});
  }
  if (!common.out.empty()) {
    std::ofstream f(common.out);
    f << json{{"query", query_id}, {"results", rows}}.dump(2) << "\n";
    write_manifest(common.out, "search", {{"query", query_id}, {"k", k}},
                   {data.embeddings, data.meta});
  }
  return 0;
}

int cmd_expand(const CommonOpts& common, const DatasetOpts& data, const MethodOpts& method,
               const std::string& query_id, std::size_t k) {
  Dataset d = load_dataset(data);
  VectorIndex idx(d.rows_of(db_splits));
  std::size_t qrow = SIZE_MAX;
  for (const auto& it : d.meta)
    if (it.id == query_id) qrow = it.row;
  if (qrow == SIZE_MAX) throw DataError("unknown query id '" + query_id + "'");
  QEMethodConfig cfg = method.config();
  auto runner = maybe_runner(cfg);
  std::unordered_set<std::string> exclude{query_id};
  std::vector<float> expanded =
      expand_query(d.all.row(qrow), idx, cfg, runner ? &*runner : nullptr, &exclude);
  if (!common.out.empty()) {
    EmbeddingMatrix one;
    one.n = 1;
    one.d = expanded.size();
    one.rows = expanded;
    one.ids = {query_id};
    save_embeddings(common.out, one);
    write_manifest(common.out, "expand", method.to_json(), {data.embeddings, data.meta});
  }
  NeighborList nn = idx.knn(expanded, k, &exclude);
  for (std::size_t i = 0; i < nn.entries.size(); ++i)
    std::cout << (i + 1) << "\t" << nn.entries[i].id << "\t" << nn.entries[i].similarity << "\n";
  return 0;
}

struct TrainOpts {
  std::size_t enc_layers = 2, heads = 8, kmax = 64;
  bool no_pe = false, position_only = false, no_attention = false, no_aux = false;
  TrainConfig tc;
  std::string protocol = "hard";
  std::string log;
};

int cmd_train(const CommonOpts& common, const DatasetOpts& data, const TrainOpts& opts) {
  if (common.out.empty()) throw ConfigError("train requires --out checkpoint path");
  Dataset d = load_dataset(data);
  EmbeddingMatrix train = d.rows_of({Split::Train});
  std::vector<ItemMeta> train_meta = d.meta_of({Split::Train});
  EmbeddingMatrix val_queries = d.rows_of({Split::Query});
  VectorIndex val_index(d.rows_of(db_splits));
  if (train.n == 0) throw ConfigError("train: no rows in the train split");

  LAttQEConfig mc;
  mc.dim = d.all.d;
  mc.layers = opts.enc_layers;
  mc.heads = opts.heads;
  mc.kmax = opts.kmax;
  mc.use_positional_encoding = !opts.no_pe;
  mc.position_only = opts.position_only;
  mc.use_self_attention = !opts.no_attention;
  mc.use_aux_head = !opts.no_aux;
  LAttQEModelF model(mc, common.seed);

  TrainConfig tc = opts.tc;
  tc.seed = common.seed;
  tc.threads = common.threads;
  Trainer trainer(model, std::move(train), std::move(train_meta), tc);

  std::ofstream log;
  if (!opts.log.empty()) log.open(opts.log);
  FitResult fit = trainer.fit(val_index, val_queries, d.annotations,
                              parse_protocol(opts.protocol), opts.log.empty() ? nullptr : &log);
  save_model(common.out, model);
  json cfg_j{{"layers", mc.layers}, {"heads", mc.heads},       {"kmax", mc.kmax},
             {"no_pe", opts.no_pe}, {"position_only", opts.position_only},
             {"no_attention", opts.no_attention},              {"no_aux", opts.no_aux},
             {"epochs", tc.max_epochs}, {"lr", tc.lr},         {"margin", tc.margin},
             {"seed", common.seed}};
  write_manifest(common.out, "train", cfg_j,
                 {data.embeddings, data.meta, data.annotations});
  std::cout << "best epoch " << fit.best_epoch << " val mAP " << fit.best_map << " -> "
            << common.out << std::endl;
  return 0;
}

int cmd_fit_temperature(const CommonOpts& common, const DatasetOpts& data,
                        const std::string& checkpoint, std::size_t epochs,
                        std::size_t queries_per_epoch) {
  if (common.out.empty()) throw ConfigError("fit-temperature requires --out checkpoint path");
  Dataset d = load_dataset(data);
  LAttQEModelF model = load_model(checkpoint);
  TrainConfig tc;
  tc.seed = common.seed;
  tc.queries_per_epoch = queries_per_epoch;
  tc.neighbors_lo = std::min<std::size_t>(tc.neighbors_lo, model.cfg.kmax);
  tc.neighbors_hi = std::min<std::size_t>(tc.neighbors_hi, model.cfg.kmax);
  Trainer trainer(model, d.rows_of({Split::Train}), d.meta_of({Split::Train}), tc);
  const float t = trainer.fit_dba_temperature(epochs);
  model.cfg.weight_mode = WeightMode::TemperedSoftmax;
  save_model(common.out, model);
  write_manifest(common.out, "fit-temperature",
                 {{"checkpoint", checkpoint}, {"epochs", epochs}, {"seed", common.seed}},
                 {data.embeddings, data.meta, checkpoint});
  std::cout << "fitted temperature T=" << t << " -> " << common.out << std::endl;
  return 0;
}

int cmd_dba(const CommonOpts& common, const DatasetOpts& data, const MethodOpts& method,
            std::size_t ndba) {
  if (common.out.empty()) throw ConfigError("dba requires --out embedding path");
  Dataset d = load_dataset(data);
  VectorIndex idx(d.rows_of(db_splits));
  QEMethodConfig cfg = method.config();
  auto runner = maybe_runner(cfg);
  std::size_t failed = 0;
  EmbeddingMatrix augmented =
      augment_database(idx, cfg, ndba, runner ? &*runner : nullptr, common.threads, &failed);
  save_embeddings(common.out, augmented);
  json prov{{"method", method.method},
            {"nDBA", ndba},
            {"checkpoint_hash",
             cfg.checkpoint.empty() ? "" : hex64(fnv1a64_file(cfg.checkpoint))},
            {"T", runner ? runner->model().temperature() : 0.f},
            {"failed_rows", failed}};
  std::ofstream f(common.out + ".provenance.json");
  f << prov.dump(2) << "\n";
  write_manifest(common.out, "dba", method.to_json(), {data.embeddings, data.meta});
  std::cout << "augmented " << augmented.n << " rows (nDBA=" << ndba << ", " << failed
            << " fallbacks) -> " << common.out << std::endl;
  return 0;
}

void write_eval_outputs(const std::string& out, const std::string& dataset_name,
                        const EvalReport& rep, std::size_t ndba) {
  if (out.empty()) return;
  std::ofstream csv(out + ".csv");
  csv << "method,dataset,protocol,nQE,nDBA,mAP\n";
  csv << method_name(rep.config.method) << "," << dataset_name << ","
      << protocol_name(rep.protocol) << "," << rep.config.nqe << "," << ndba << "," << rep.map
      << "\n";
  json per_query = json::array();
  for (const auto& r : rep.per_query)
    per_query.push_back({{"id", r.id}, {"ap", r.ap}, {"n_relevant", r.n_relevant}});
  std::ofstream js(out + ".json");
  js << json{{"method", method_name(rep.config.method)},
             {"dataset", dataset_name},
             {"protocol", protocol_name(rep.protocol)},
             {"nQE", rep.config.nqe},
             {"nDBA", ndba},
             {"mAP", rep.map},
             {"per_query", per_query}}
            .dump(2)
     << "\n";
}

int cmd_eval(const CommonOpts& common, const DatasetOpts& data, const MethodOpts& method,
             const std::string& protocol) {
  Dataset d = load_dataset(data);
  VectorIndex idx(d.rows_of(db_splits));
  EmbeddingMatrix queries = d.rows_of({Split::Query});
  QEMethodConfig cfg = method.config();
  auto runner = maybe_runner(cfg);
  EvalReport rep = evaluate(idx, queries, d.annotations, cfg, parse_protocol(protocol),
                            runner ? &*runner : nullptr, common.threads);
  write_eval_outputs(common.out, fs::path(data.embeddings).stem().string(), rep, 0);
  if (!common.out.empty())
    write_manifest(common.out, "eval", method.to_json(),
                   {data.embeddings, data.meta, data.annotations});
  std::cout << "mAP(" << method_name(cfg.method) << ", nQE=" << cfg.nqe << ", " << protocol
            << ") = " << rep.map << std::endl;
  return 0;
}

int cmd_sweep(const CommonOpts& common, const DatasetOpts& data, const MethodOpts& method,
              const std::string& methods_csv, const std::string& nqe_csv,
              const std::string& protocol) {
  Dataset d = load_dataset(data);
  VectorIndex idx(d.rows_of(db_splits));
  EmbeddingMatrix queries = d.rows_of({Split::Query});

  std::vector<QEMethodConfig> methods;
  std::optional<LattqeRunner> runner;
  for (auto part : CLI::detail::split(methods_csv, ',')) {
    MethodOpts m = method;
    m.method = part;
    QEMethodConfig cfg = m.config();
    if (cfg.method == QEMethod::Lattqe && !runner) runner = maybe_runner(cfg);
    methods.push_back(cfg);
  }
  std::vector<std::size_t> nqes;
  for (auto part : CLI::detail::split(nqe_csv, ','))
    nqes.push_back(std::stoull(part));

  auto cells = sweep_nqe(idx, queries, d.annotations, methods, nqes,
                         parse_protocol(protocol), runner ? &*runner : nullptr, common.threads);
  std::ostringstream csv;
  csv << "method,nQE,mAP\n";
  for (const auto& c : cells) csv << c.method << "," << c.nqe << "," << c.map << "\n";
  std::cout << csv.str();
  if (!common.out.empty()) {
    std::ofstream f(common.out);
    f << csv.str();
    write_manifest(common.out, "sweep", {{"methods", methods_csv}, {"nqe", nqe_csv}},
                   {data.embeddings, data.meta, data.annotations});
  }
  return 0;
}

int cmd_groups(const CommonOpts& common, const std::string& before_path,
               const std::string& after_path, const std::string& grouping) {
  auto load_per_query = [](const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j;
    f >> j;
    std::vector<QueryResult> out;
    for (const auto& r : j.at("per_query"))
      out.push_back({r.at("id").get<std::string>(), r.at("ap").get<double>(),
                     r.at("n_relevant").get<std::size_t>()});
    return out;
  };
  Grouping g;
  if (grouping == "by-n-relevants") g = Grouping::ByRelevantCount;
  else if (grouping == "by-preqe-ap") g = Grouping::ByPreQeAp;
  else throw ConfigError("unknown grouping '" + grouping + "'");
  auto groups = group_analysis(load_per_query(before_path), load_per_query(after_path), g);
  std::ostringstream csv;
  csv << "group,mean_statistic,mAP_before,mAP_after,relative_improvement_pct,count\n";
  for (std::size_t i = 0; i < groups.size(); ++i)
    csv << i << "," << groups[i].mean_statistic << "," << groups[i].map_before << ","
        << groups[i].map_after << "," << groups[i].relative_improvement_pct << ","
        << groups[i].count << "\n";
  std::cout << csv.str();
  if (!common.out.empty()) {
    std::ofstream f(common.out);
    f << csv.str();
    write_manifest(common.out, "groups", {{"grouping", grouping}}, {before_path, after_path});
  }
  return 0;
}

int cmd_inspect_checkpoint(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  json tensors = json::array();
  std::size_t total = 0;
  for (const auto& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", t.dtype},
                       {"bytes", t.bytes.size()}});
    total += t.bytes.size();
  }
  std::cout << json{{"meta", ckpt.meta}, {"tensors", tensors}, {"total_bytes", total}}.dump(2)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-expansion workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file supplying defaults");

  CommonOpts common;
  SynthConfig synth;
  DatasetOpts data;
  MethodOpts method;
  TrainOpts train;
  std::string query_id, protocol = "hard", checkpoint, before_path, after_path;
  std::string methods_csv = "aqe", nqe_csv = "0", grouping = "by-n-relevants";
  std::size_t k = 10, ndba = 0, temp_epochs = 1, temp_queries = 0;

  auto* c_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(c_synth, common);
  c_synth->add_option("--classes", synth.n_classes);
  c_synth->add_option("--dim", synth.dim);
  c_synth->add_option("--sigma", synth.sigma);
  c_synth->add_option("--sigma-hi", synth.sigma_hi);
  c_synth->add_option("--center-correlation", synth.center_correlation);
  c_synth->add_option("--subspace-dim", synth.subspace_dim);
  c_synth->add_option("--subspace-sigma", synth.subspace_sigma);
  c_synth->add_option("--arc-extent", synth.arc_extent);
  c_synth->add_option("--sibling-fraction", synth.sibling_fraction);
  c_synth->add_option("--sibling-items-hi", synth.sibling_items_hi);
  c_synth->add_option("--distractors", synth.n_distractors);
  c_synth->add_option("--items-lo", synth.items_per_class_lo);
  c_synth->add_option("--items-hi", synth.items_per_class_hi);
  c_synth->add_option("--query-fraction", synth.query_fraction);
  c_synth->add_option("--train-fraction", synth.train_fraction);

  auto* c_index = app.add_subcommand("index", "validate and summarize a corpus");
  add_common(c_index, common);
  add_dataset(c_index, data, false);

  auto* c_search = app.add_subcommand("search", "plain cosine search for one query");
  add_common(c_search, common);
  add_dataset(c_search, data, false);
  c_search->add_option("--query-id", query_id)->required();
  c_search->add_option("-k,--topk", k);

  auto* c_expand = app.add_subcommand("expand", "expand one query and search");
  add_common(c_expand, common);
  add_dataset(c_expand, data, false);
  add_method(c_expand, method);
  c_expand->add_option("--query-id", query_id)->required();
  c_expand->add_option("-k,--topk", k);

  auto* c_train = app.add_subcommand("train", "train the attention aggregator");
  add_common(c_train, common);
  add_dataset(c_train, data, true);
  c_train->add_option("--enc-layers", train.enc_layers);
  c_train->add_option("--heads", train.heads);
  c_train->add_option("--kmax", train.kmax);
  c_train->add_flag("--no-pe", train.no_pe, "disable positional encoding");
  c_train->add_flag("--position-only", train.position_only,
                    "attention scores from positions only");
  c_train->add_flag("--no-attention", train.no_attention,
                    "replace attention with fully-connected layers");
  c_train->add_flag("--no-aux", train.no_aux, "disable the auxiliary relevance head");
  c_train->add_option("--margin", train.tc.margin);
  c_train->add_option("--lr", train.tc.lr);
  c_train->add_option("--lr-decay", train.tc.lr_decay);
  c_train->add_option("--weight-decay", train.tc.weight_decay);
  c_train->add_option("--batch-size", train.tc.batch_size);
  c_train->add_option("--negatives", train.tc.negatives);
  c_train->add_option("--pool-size", train.tc.pool_size);
  c_train->add_option("--pool-refresh", train.tc.pool_refresh);
  c_train->add_option("--neighbors-lo", train.tc.neighbors_lo);
  c_train->add_option("--neighbors-hi", train.tc.neighbors_hi);
  c_train->add_option("--drop-max", train.tc.drop_prob_max);
  c_train->add_option("--aux-weight", train.tc.aux_weight);
  c_train->add_option("--epochs", train.tc.max_epochs);
  c_train->add_option("--queries-per-epoch", train.tc.queries_per_epoch);
  c_train->add_option("--val-nqe", train.tc.val_nqe);
  c_train->add_option("--protocol", train.protocol);
  c_train->add_option("--log", train.log, "JSONL training log path");

  auto* c_temp = app.add_subcommand("fit-temperature",
                                    "temperature curriculum for database-side augmentation");
  add_common(c_temp, common);
  add_dataset(c_temp, data, false);
  c_temp->add_option("--checkpoint", checkpoint)->required();
  c_temp->add_option("--epochs", temp_epochs);
  c_temp->add_option("--queries-per-epoch", temp_queries);

  auto* c_dba = app.add_subcommand("dba", "augment the database side offline");
  add_common(c_dba, common);
  add_dataset(c_dba, data, false);
  add_method(c_dba, method);
  c_dba->add_option("--ndba", ndba)->required();

  auto* c_eval = app.add_subcommand("eval", "mAP evaluation of one method");
  add_common(c_eval, common);
  add_dataset(c_eval, data, true);
  add_method(c_eval, method);
  c_eval->add_option("--protocol", protocol, "easy|medium|hard");

  auto* c_sweep = app.add_subcommand("sweep", "mAP as a function of nQE");
  add_common(c_sweep, common);
  add_dataset(c_sweep, data, true);
  add_method(c_sweep, method);
  c_sweep->add_option("--methods", methods_csv, "comma-separated method list");
  c_sweep->add_option("--nqe-list", nqe_csv, "comma-separated nQE values");
  c_sweep->add_option("--protocol", protocol);

  auto* c_groups = app.add_subcommand("groups", "per-regime relative improvement");
  add_common(c_groups, common);
  c_groups->add_option("--before", before_path, "eval JSON before QE")->required();
  c_groups->add_option("--after", after_path, "eval JSON after QE")->required();
  c_groups->add_option("--grouping", grouping, "by-n-relevants|by-preqe-ap");

  auto* c_inspect = app.add_subcommand("inspect-checkpoint", "dump an LQEM header");
  c_inspect->add_option("--checkpoint", checkpoint)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_synth) return cmd_synth(common, synth);
    if (*c_index) return cmd_index(common, data);
    if (*c_search) return cmd_search(common, data, query_id, k);
    if (*c_expand) return cmd_expand(common, data, method, query_id, k);
    if (*c_train) return cmd_train(common, data, train);
    if (*c_temp) return cmd_fit_temperature(common, data, checkpoint, temp_epochs, temp_queries);
    if (*c_dba) return cmd_dba(common, data, method, ndba);
    if (*c_eval) return cmd_eval(common, data, method, protocol);
    if (*c_sweep) return cmd_sweep(common, data, method, methods_csv, nqe_csv, protocol);
    if (*c_groups) return cmd_groups(common, before_path, after_path, grouping);
    if (*c_inspect) return cmd_inspect_checkpoint(checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "error kind=config msg=" << e.what() << std::endl;
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error kind=numeric msg=" << e.what() << std::endl;
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error kind=data msg=" << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal msg=" << e.what() << std::endl;
    return 4;
  }
  return 0;
}
