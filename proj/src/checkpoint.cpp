#include "argmine/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "argmine/errors.hpp"
#include <nlohmann/json.hpp>

#ifndef ARGMINE_VERSION
#define ARGMINE_VERSION "dev"
#endif

namespace argmine {

using nlohmann::json;

std::string code_version() { return ARGMINE_VERSION; }

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw SchemaError("checkpoint is truncated");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void put_tensor(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits;
      const double v = m(r, c);
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
}

Eigen::MatrixXd get_tensor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::uint64_t bits = get_uint(in, 8);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      m(r, c) = v;
    }
  return m;
}

std::string_view mode_name(AttentionMode m) {
  return m == AttentionMode::Dense ? "dense" : "windowed_global";
}

AttentionMode parse_mode(std::string_view s) {
  if (s == "dense") return AttentionMode::Dense;
  if (s == "windowed_global") return AttentionMode::WindowedGlobal;
  throw SchemaError("unknown attention mode '" + std::string(s) + "'");
}

struct TensorRef {
  std::string name;
  Eigen::MatrixXd* value;
};

std::vector<TensorRef> collect(ToyTransformer* backbone, AciHead* aci, RtpHead* rtp) {
  std::vector<TensorRef> out;
  auto add = [&](const std::string& prefix, std::map<std::string, ad::Parameter>& params) {
    for (auto& [name, p] : params) out.push_back({prefix + name, &p.value});
  };
  add("backbone/", backbone->named_parameters());
  if (aci) add("aci/", aci->named_parameters());
  if (rtp) add("rtp/", rtp->named_parameters());
  return out;
}

ModelView view_of(const ModelBundle& b) {
  return {b.backbone.get(), b.aci.get(), b.rtp.get(), b.schema, b.meta};
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelView& bundle) {
  if (!bundle.backbone) throw ContractError("checkpoint needs a backbone");
  const BackboneConfig& c = bundle.backbone->config();
  json header;
  header["config"] = {{"hidden_size", c.hidden_size},  {"layers", c.layers},
                      {"heads", c.heads},              {"ffn_size", c.ffn_size},
                      {"max_positions", c.max_positions},
                      {"attention_mode", mode_name(c.attention_mode)},
                      {"window_size", c.window_size},  {"init_seed", c.init_seed}};
  header["vocab"] = c.vocab.tokens();
  const auto& m = bundle.meta;
  header["meta"] = {{"manifest_hash", m.manifest_hash},
                    {"code_version", m.code_version},
                    {"seed", m.seed},
                    {"lexicon_hash", m.lexicon_hash},
                    {"tokenizer_fingerprint", m.tokenizer_fingerprint},
                    {"task", m.task},
                    {"epoch", m.epoch},
                    {"default_for_downstream", m.default_for_downstream}};
  header["schema"] = bundle.schema;
  if (bundle.aci) header["aci"] = json::object();
  if (bundle.rtp) {
    header["rtp"] = {{"mode", bundle.rtp->mode() == RtpMode::Prompt ? "prompt" : "mean_pool"},
                     {"classes", bundle.rtp->num_classes()},
                     {"mask_count", bundle.rtp->mask_count()}};
  }
  json dir = json::array();
  for (const auto& t : collect(bundle.backbone, bundle.aci, bundle.rtp))
    dir.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
  header["tensors"] = dir;

  const std::string text = header.dump();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : collect(bundle.backbone, bundle.aci, bundle.rtp)) put_tensor(out, *t.value);
  if (!out) throw Error("failed to write checkpoint");
}

void save_checkpoint(const std::string& path, const ModelView& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_checkpoint(out, model);
}

void save_checkpoint(const std::string& path, const ModelBundle& bundle) {
  save_checkpoint(path, view_of(bundle));
}

ModelBundle load_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw SchemaError("not a checkpoint file");
  const auto version = static_cast<std::uint32_t>(get_uint(in, 4));
  if (version != kCheckpointVersion)
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t len = get_uint(in, 8);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw SchemaError("checkpoint header is truncated");

  ModelBundle b;
  try {
    const json header = json::parse(text);
    const json& jc = header.at("config");
    BackboneConfig c;
    c.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
    c.hidden_size = jc.at("hidden_size");
    c.layers = jc.at("layers");
    c.heads = jc.at("heads");
    c.ffn_size = jc.at("ffn_size");
    c.max_positions = jc.at("max_positions");
    c.attention_mode = parse_mode(jc.at("attention_mode").get<std::string>());
    c.window_size = jc.at("window_size");
    c.init_seed = jc.at("init_seed");
    b.backbone = std::make_unique<ToyTransformer>(std::move(c));

    const json& jm = header.at("meta");
    b.meta.manifest_hash = jm.at("manifest_hash");
    b.meta.code_version = jm.at("code_version");
    b.meta.seed = jm.at("seed");
    b.meta.lexicon_hash = jm.at("lexicon_hash");
    b.meta.tokenizer_fingerprint = jm.at("tokenizer_fingerprint");
    b.meta.task = jm.at("task");
    b.meta.epoch = jm.at("epoch");
    b.meta.default_for_downstream = jm.at("default_for_downstream");
    b.schema = header.at("schema");

    const int hidden = b.backbone->config().hidden_size;
    if (header.contains("aci")) b.aci = std::make_unique<AciHead>(hidden, LabelSchema::by_name(b.schema), 0);
    if (header.contains("rtp")) {
      const json& jr = header.at("rtp");
      const RtpMode mode = jr.at("mode") == "prompt" ? RtpMode::Prompt : RtpMode::MeanPool;
      b.rtp = std::make_unique<RtpHead>(mode, hidden, jr.at("classes").get<int>(),
                                        jr.at("mask_count").get<int>(), 0);
    }
    const auto refs = collect(b.backbone.get(), b.aci.get(), b.rtp.get());
    const json& dir = header.at("tensors");
    if (dir.size() != refs.size()) throw SchemaError("checkpoint tensor directory does not match");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const json& d = dir[i];
      const Eigen::Index rows = d.at("rows"), cols = d.at("cols");
      if (d.at("name") != refs[i].name || rows != refs[i].value->rows() ||
          cols != refs[i].value->cols())
        throw SchemaError("checkpoint tensor '" + d.at("name").get<std::string>() +
                          "' does not match the model layout");
      *refs[i].value = get_tensor(in, rows, cols);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint header: ") + e.what());
  }
  return b;
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace argmine
