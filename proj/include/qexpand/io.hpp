#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexpand/index.hpp"
#include "qexpand/lattqe.hpp"

namespace qexpand {

// --- sidecar metadata (JSON lines) ---

enum class Split { Train, Val, Db, Query, Distractor };

Split parse_split(const std::string& s);
std::string split_name(Split s);

struct ItemMeta {
  std::size_t row = 0;
  std::string id;
  std::optional<std::string> cls;  // null for distractors
  Split split = Split::Db;
};

void save_metadata(const std::filesystem::path& path, const std::vector<ItemMeta>& meta);
std::vector<ItemMeta> load_metadata(const std::filesystem::path& path);

// --- QEXP embedding file ---
// magic "QEXP", u32 version=1, u32 N, u32 D, then N*D little-endian f32.

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, bool normalize = true);

// --- query annotations (JSON) ---

struct QueryAnnotation {
  std::string id;
  std::vector<std::string> easy;
  std::vector<std::string> hard;
  std::vector<std::string> junk;
};

void save_annotations(const std::filesystem::path& path,
                      const std::vector<QueryAnnotation>& annotations);
std::vector<QueryAnnotation> load_annotations(const std::filesystem::path& path);

// --- LQEM checkpoint ---
// magic "LQEM", u32 version=1, u64 header length, UTF-8 JSON header listing
// (name, shape, dtype, offset, length) per tensor plus free-form model meta,
// then the concatenated little-endian raw values. Bit-exact round-trip.

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::string dtype;  // "f32" or "f64"
  std::vector<std::uint8_t> bytes;
};

struct Checkpoint {
  std::vector<CheckpointTensor> tensors;
  nlohmann::json meta;

  const CheckpointTensor& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model <-> checkpoint. The header records the architecture, ablation flags,
// temperature and weight mode.
void save_model(const std::filesystem::path& path, LAttQEModelF& model);
LAttQEModelF load_model(const std::filesystem::path& path);

}  // namespace qexpand
