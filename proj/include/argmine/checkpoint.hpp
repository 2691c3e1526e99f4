#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include "argmine/model.hpp"

namespace argmine {

/// Provenance recorded next to the weights.
struct CheckpointMeta {
  std::string manifest_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  std::string lexicon_hash;
  std::string tokenizer_fingerprint;
  std::string task;
  int epoch = 0;
  bool default_for_downstream = false;
};

/// A backbone with optional task heads.
struct ModelBundle {
  std::unique_ptr<ToyTransformer> backbone;
  std::unique_ptr<AciHead> aci;
  std::unique_ptr<RtpHead> rtp;
  std::string schema;  // schema the heads were built for
  CheckpointMeta meta;
};

/// Non-owning view of the parts to save.
struct ModelView {
  ToyTransformer* backbone = nullptr;
  AciHead* aci = nullptr;
  RtpHead* rtp = nullptr;
  std::string schema;
  CheckpointMeta meta;
};

inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'G', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic, u32 format version, u64 header length, a JSON
/// header (config, vocabulary, provenance, tensor directory), then every
/// tensor as row-major little-endian float64.
void save_checkpoint(std::ostream& out, const ModelView& model);
void save_checkpoint(const std::string& path, const ModelView& model);
void save_checkpoint(const std::string& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(std::istream& in);
ModelBundle load_checkpoint(const std::string& path);

std::string code_version();

}  // namespace argmine
