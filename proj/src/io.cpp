#include "qexpand/io.hpp"

#include <cstring>
#include <fstream>

#include "qexpand/errors.hpp"

namespace qexpand {

namespace {

using json = nlohmann::json;

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
  f.write(reinterpret_cast<const char*>(p), std::streamsize(n));
}

void read_bytes(std::ifstream& f, void* p, std::size_t n, const char* what) {
  f.read(reinterpret_cast<char*>(p), std::streamsize(n));
  if (std::size_t(f.gcount()) != n)
    throw DataError(std::string("truncated file while reading ") + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path.string());
  return f;
}

}  // namespace

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "db") return Split::Db;
  if (s == "query") return Split::Query;
  if (s == "distractor") return Split::Distractor;
  throw DataError("unknown split '" + s + "'");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Db: return "db";
    case Split::Query: return "query";
    case Split::Distractor: return "distractor";
  }
  return "?";
}

void save_metadata(const std::filesystem::path& path, const std::vector<ItemMeta>& meta) {
  auto f = open_out(path);
  for (const auto& m : meta) {
    json j{{"row", m.row}, {"id", m.id}, {"split", split_name(m.split)}};
    j["class"] = m.cls ? json(*m.cls) : json(nullptr);
    f << j.dump() << "\n";
  }
}

std::vector<ItemMeta> load_metadata(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::vector<ItemMeta> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (const char* key : {"row", "id", "class", "split"})
      if (!j.contains(key))
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing field '" +
                        key + "'");
    ItemMeta m;
    m.row = j["row"].get<std::size_t>();
    m.id = j["id"].get<std::string>();
    if (!j["class"].is_null()) m.cls = j["class"].get<std::string>();
    m.split = parse_split(j["split"].get<std::string>());
    out.push_back(std::move(m));
  }
  return out;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  auto f = open_out(path);
  write_bytes(f, "QEXP", 4);
  const std::uint32_t version = 1, n = std::uint32_t(m.n), d = std::uint32_t(m.d);
  write_bytes(f, &version, 4);
  write_bytes(f, &n, 4);
  write_bytes(f, &d, 4);
  write_bytes(f, m.rows.data(), m.rows.size() * sizeof(float));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, bool normalize) {
  auto f = open_in(path);
  char magic[4];
  read_bytes(f, magic, 4, "magic");
  if (std::memcmp(magic, "QEXP", 4) != 0)
    throw DataError(path.string() + ": bad magic, expected QEXP");
  std::uint32_t version = 0, n = 0, d = 0;
  read_bytes(f, &version, 4, "version");
  if (version != 1)
    throw DataError(path.string() + ": unsupported QEXP version " + std::to_string(version));
  read_bytes(f, &n, 4, "N");
  read_bytes(f, &d, 4, "D");
  EmbeddingMatrix m;
  m.n = n;
  m.d = d;
  m.rows.resize(std::size_t(n) * d);
  read_bytes(f, m.rows.data(), m.rows.size() * sizeof(float), "payload");
  if (f.peek() != EOF) throw DataError(path.string() + ": trailing bytes after payload");
  m.ids.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) m.ids[i] = std::to_string(i);
  if (normalize && n > 0) normalize_rows(m);
  return m;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<QueryAnnotation>& annotations) {
  json arr = json::array();
  for (const auto& a : annotations)
    arr.push_back({{"id", a.id}, {"easy", a.easy}, {"hard", a.hard}, {"junk", a.junk}});
  auto f = open_out(path);
  f << json{{"queries", arr}}.dump(2) << "\n";
}

std::vector<QueryAnnotation> load_annotations(const std::filesystem::path& path) {
  auto f = open_in(path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.contains("queries") || !j["queries"].is_array())
    throw DataError(path.string() + ": missing 'queries' array");
  std::vector<QueryAnnotation> out;
  for (const auto& q : j["queries"]) {
    for (const char* key : {"id", "easy", "hard", "junk"})
      if (!q.contains(key)) throw DataError(path.string() + ": query missing field '" + key + "'");
    QueryAnnotation a;
    a.id = q["id"].get<std::string>();
    a.easy = q["easy"].get<std::vector<std::string>>();
    a.hard = q["hard"].get<std::vector<std::string>>();
    a.junk = q["junk"].get<std::vector<std::string>>();
    out.push_back(std::move(a));
  }
  return out;
}

const CheckpointTensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw DataError("checkpoint: missing tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["meta"] = ckpt.meta;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"dtype", t.dtype},
                       {"offset", offset},
                       {"length", t.bytes.size()}});
    offset += t.bytes.size();
  }
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  auto f = open_out(path);
  write_bytes(f, "LQEM", 4);
  const std::uint32_t version = 1;
  const std::uint64_t hlen = hs.size();
  write_bytes(f, &version, 4);
  write_bytes(f, &hlen, 8);
  write_bytes(f, hs.data(), hs.size());
  for (const auto& t : ckpt.tensors) write_bytes(f, t.bytes.data(), t.bytes.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto f = open_in(path);
  char magic[4];
  read_bytes(f, magic, 4, "magic");
  if (std::memcmp(magic, "LQEM", 4) != 0)
    throw DataError(path.string() + ": bad magic, expected LQEM");
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  read_bytes(f, &version, 4, "version");
  if (version != 1)
    throw DataError(path.string() + ": unsupported LQEM version " + std::to_string(version));
  read_bytes(f, &hlen, 8, "header length");
  std::string hs(hlen, '\0');
  read_bytes(f, hs.data(), hlen, "header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": header: " + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", json::object());
  std::size_t expected_offset = 0;
  for (const auto& tj : header["tensors"]) {
    CheckpointTensor t;
    t.name = tj["name"].get<std::string>();
    t.shape = tj["shape"].get<std::vector<std::size_t>>();
    t.dtype = tj["dtype"].get<std::string>();
    if (t.dtype != "f32" && t.dtype != "f64")
      throw DataError(path.string() + ": unknown dtype '" + t.dtype + "'");
    const std::size_t offset = tj["offset"].get<std::size_t>();
    const std::size_t length = tj["length"].get<std::size_t>();
    if (offset != expected_offset)
      throw DataError(path.string() + ": non-contiguous tensor data");
    const std::size_t elem = t.dtype == "f32" ? 4 : 8;
    if (length != Tensor<float>::numel_of(t.shape) * elem)
      throw DataError(path.string() + ": tensor '" + t.name + "' length/shape mismatch");
    t.bytes.resize(length);
    read_bytes(f, t.bytes.data(), length, t.name.c_str());
    expected_offset += length;
    ckpt.tensors.push_back(std::move(t));
  }
  if (f.peek() != EOF) throw DataError(path.string() + ": trailing bytes after tensor data");
  return ckpt;
}

void save_model(const std::filesystem::path& path, LAttQEModelF& model) {
  Checkpoint ckpt;
  const auto& c = model.cfg;
  ckpt.meta = {{"dim", c.dim},
               {"layers", c.layers},
               {"heads", c.heads},
               {"kmax", c.kmax},
               {"use_positional_encoding", c.use_positional_encoding},
               {"position_only", c.position_only},
               {"use_self_attention", c.use_self_attention},
               {"use_aux_head", c.use_aux_head},
               {"weight_mode",
                c.weight_mode == WeightMode::Similarity ? "similarity" : "tempered-softmax"},
               {"temperature", model.temperature()}};
  for (Parameter<float>* p : model.parameters()) {
    CheckpointTensor t;
    t.name = p->name;
    t.shape = p->value.shape;
    t.dtype = "f32";
    t.bytes.resize(p->value.numel() * sizeof(float));
    std::memcpy(t.bytes.data(), p->value.data.data(), t.bytes.size());
    ckpt.tensors.push_back(std::move(t));
  }
  save_checkpoint(path, ckpt);
}

LAttQEModelF load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto& m = ckpt.meta;
  LAttQEConfig cfg;
  cfg.dim = m.at("dim").get<std::size_t>();
  cfg.layers = m.at("layers").get<std::size_t>();
  cfg.heads = m.at("heads").get<std::size_t>();
  cfg.kmax = m.at("kmax").get<std::size_t>();
  cfg.use_positional_encoding = m.at("use_positional_encoding").get<bool>();
  cfg.position_only = m.at("position_only").get<bool>();
  cfg.use_self_attention = m.at("use_self_attention").get<bool>();
  cfg.use_aux_head = m.at("use_aux_head").get<bool>();
  cfg.weight_mode = m.at("weight_mode").get<std::string>() == "tempered-softmax"
                        ? WeightMode::TemperedSoftmax
                        : WeightMode::Similarity;
  LAttQEModelF model(cfg, 0);
  for (Parameter<float>* p : model.parameters()) {
    const CheckpointTensor& t = ckpt.find(p->name);
    if (t.shape != p->value.shape)
      throw DataError(path.string() + ": tensor '" + p->name + "' shape mismatch");
    if (t.dtype != "f32") throw DataError(path.string() + ": model tensors must be f32");
    std::memcpy(p->value.data.data(), t.bytes.data(), t.bytes.size());
  }
  return model;
}

}  // namespace qexpand
