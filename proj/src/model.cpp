#include "argmine/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// --- Vocab -------------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw ConfigError("duplicate vocabulary entry '" + tokens_[i] + "'");
  if (tokens_.size() < 3 || tokens_[0] != special::kPad || tokens_[1] != special::kUnk ||
      tokens_[2] != special::kMask)
    throw ConfigError("vocabulary must start with [PAD] [UNK] [MASK]");
}

std::string Vocab::key(std::string_view token) {
  const std::size_t ws = leading_space(token);
  if (ws == 0 || ws == token.size()) return std::string(ws == token.size() && ws > 0 ? " " : token);
  return " " + std::string(token.substr(ws));
}

Vocab Vocab::build(std::span<const std::vector<std::string>> sequences, int user_tokens,
                   std::size_t min_count) {
  std::vector<std::string> tokens = {std::string(special::kPad), std::string(special::kUnk),
                                     std::string(special::kMask), std::string(special::kStartQuote),
                                     std::string(special::kEndQuote), std::string(special::kUrl)};
  for (int u = 0; u < user_tokens; ++u) tokens.push_back(special::user(u));
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : sequences)
    for (const auto& t : seq)
      if (!special::is_special(t)) ++counts[key(t)];
  for (const auto& [k, c] : counts)
    if (c >= min_count && std::find(tokens.begin(), tokens.end(), k) == tokens.end())
      tokens.push_back(k);
  return Vocab(std::move(tokens));
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(key(token));
  return it == index_.end() ? unk_id() : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.contains(key(token)); }

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

// --- configuration -----------------------------------------------------------

BackboneConfig BackboneConfig::thread_level(Vocab vocab) {
  BackboneConfig c;
  c.vocab = std::move(vocab);
  c.max_positions = 4096;
  c.attention_mode = AttentionMode::WindowedGlobal;
  c.window_size = 512;
  return c;
}

BackboneConfig BackboneConfig::comment_level(Vocab vocab) {
  BackboneConfig c;
  c.vocab = std::move(vocab);
  c.max_positions = 512;
  c.attention_mode = AttentionMode::Dense;
  return c;
}

void BackboneConfig::validate() const {
  if (hidden_size <= 0 || layers < 0 || heads <= 0 || ffn_size <= 0 || max_positions <= 0 ||
      window_size <= 0)
    throw ConfigError("backbone sizes must be positive");
  if (hidden_size % heads != 0) throw ConfigError("hidden_size must be divisible by heads");
  if (vocab.size() < 3) throw ConfigError("backbone vocabulary is empty");
  for (auto t : {special::kStartQuote, special::kEndQuote, special::kUrl})
    if (!vocab.contains(t)) throw ConfigError("vocabulary lacks special token " + std::string(t));
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> attention_pattern(
    const BackboneConfig& config, const std::vector<bool>& global) {
  const auto n = static_cast<Eigen::Index>(global.size());
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed(n, n);
  if (config.attention_mode == AttentionMode::Dense) {
    allowed.setConstant(true);
    return allowed;
  }
  const Eigen::Index half = config.window_size / 2;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      allowed(i, j) = std::abs(i - j) <= half || global[static_cast<std::size_t>(i)] ||
                      global[static_cast<std::size_t>(j)];
  return allowed;
}

// --- toy transformer ---------------------------------------------------------

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double stddev) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
  return m;
}

std::vector<Parameter*> pointers(std::map<std::string, Parameter>& params) {
  std::vector<Parameter*> out;
  for (auto& [_, p] : params) out.push_back(&p);
  return out;
}

}  // namespace

ToyTransformer::ToyTransformer(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.init_seed, "init/backbone");
  const int h = config_.hidden_size, f = config_.ffn_size;
  constexpr double sd = 0.02;
  auto add = [&](const std::string& name, Matrix m) { params_.emplace(name, Parameter(name, std::move(m))); };
  add("tok_emb", random_matrix(rng, config_.vocab.size(), h, sd));
  add("pos_emb", random_matrix(rng, config_.max_positions, h, sd));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(pre + w, random_matrix(rng, h, h, sd));
    for (const char* b : {"bq", "bk", "bv", "bo"}) add(pre + b, Matrix::Zero(1, h));
    add(pre + "ln1_g", Matrix::Ones(1, h));
    add(pre + "ln1_b", Matrix::Zero(1, h));
    add(pre + "ln2_g", Matrix::Ones(1, h));
    add(pre + "ln2_b", Matrix::Zero(1, h));
    add(pre + "w1", random_matrix(rng, h, f, sd));
    add(pre + "b1", Matrix::Zero(1, f));
    add(pre + "w2", random_matrix(rng, f, h, sd));
    add(pre + "b2", Matrix::Zero(1, h));
  }
  add("lnf_g", Matrix::Ones(1, h));
  add("lnf_b", Matrix::Zero(1, h));
  add("mlm_bias", Matrix::Zero(1, config_.vocab.size()));
}

Var ToyTransformer::encode(Tape& tape, std::span<const int> ids,
                           const std::vector<bool>& global_attention) {
  const std::size_t n = ids.size();
  if (n == 0) throw ContractError("cannot encode an empty sequence");
  if (n > static_cast<std::size_t>(config_.max_positions))
    throw ContractError("input of " + std::to_string(n) + " tokens exceeds max_positions " +
                        std::to_string(config_.max_positions));
  if (global_attention.size() != n) throw ContractError("global attention flags length mismatch");
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);
  const auto allowed = attention_pattern(config_, global_attention);

  auto param = [&](const std::string& name) { return tape.parameter(p(name)); };
  Var x = ad::add(ad::embedding(param("tok_emb"), ids), ad::embedding(param("pos_emb"), positions));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    Var h = ad::layer_norm(x, param(pre + "ln1_g"), param(pre + "ln1_b"));
    Var q = ad::add_row(ad::matmul(h, param(pre + "wq")), param(pre + "bq"));
    Var k = ad::add_row(ad::matmul(h, param(pre + "wk")), param(pre + "bk"));
    Var v = ad::add_row(ad::matmul(h, param(pre + "wv")), param(pre + "bv"));
    Var a = ad::attention(q, k, v, config_.heads, allowed);
    x = ad::add(x, ad::add_row(ad::matmul(a, param(pre + "wo")), param(pre + "bo")));
    Var h2 = ad::layer_norm(x, param(pre + "ln2_g"), param(pre + "ln2_b"));
    Var ff = ad::gelu(ad::add_row(ad::matmul(h2, param(pre + "w1")), param(pre + "b1")));
    x = ad::add(x, ad::add_row(ad::matmul(ff, param(pre + "w2")), param(pre + "b2")));
  }
  return ad::layer_norm(x, param("lnf_g"), param("lnf_b"));
}

Var ToyTransformer::mlm_logits(Tape& tape, Var hidden) {
  return ad::add_row(ad::matmul_bt(hidden, tape.parameter(p("tok_emb"))),
                     tape.parameter(p("mlm_bias")));
}

std::vector<Parameter*> ToyTransformer::parameters() { return pointers(params_); }

Eigen::MatrixXd encode_values(Backbone& backbone, std::span<const std::string> tokens,
                              const std::vector<bool>& global_attention) {
  Tape tape;
  const auto ids = backbone.vocab().encode(tokens);
  return backbone.encode(tape, ids, global_attention).value();
}

SerializedThread set_global_attention(const SerializedThread& st, GlobalPolicy policy) {
  SerializedThread out = st;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.global_attention[i] = policy == GlobalPolicy::UserTokens && st.flags[i] == SpecialFlag::User;
  return out;
}

// --- ACI ---------------------------------------------------------------------

AciHead::AciHead(int hidden_size, const LabelSchema& schema, std::uint64_t seed)
    : schema_(&schema), mask_(crf::TransitionTable::bio(schema.num_types())) {
  Rng rng(seed, "init/aci");
  const int k = schema.num_labels();
  params_.emplace("proj_w", Parameter("proj_w", random_matrix(rng, hidden_size, k, 0.02)));
  params_.emplace("proj_b", Parameter("proj_b", Matrix::Zero(1, k)));
  params_.emplace("crf_trans", Parameter("crf_trans", Matrix::Zero(k, k)));
  params_.emplace("crf_start", Parameter("crf_start", Matrix::Zero(1, k)));
  params_.emplace("crf_end", Parameter("crf_end", Matrix::Zero(1, k)));
}

Var AciHead::emissions(Tape& tape, Var hidden) {
  return ad::add_row(ad::matmul(hidden, tape.parameter(params_.at("proj_w"))),
                     tape.parameter(params_.at("proj_b")));
}

Var AciHead::loss(Tape& tape, Var hidden, const BioSequence& gold) {
  Var e = emissions(tape, hidden);
  return ad::crf_nll(e, tape.parameter(params_.at("crf_trans")),
                     tape.parameter(params_.at("crf_start")), tape.parameter(params_.at("crf_end")),
                     mask_, gold);
}

crf::TransitionTable AciHead::table() const {
  crf::TransitionTable t = mask_;
  t.trans = params_.at("crf_trans").value;
  t.start = params_.at("crf_start").value.row(0).transpose();
  t.end = params_.at("crf_end").value.row(0).transpose();
  return t;
}

std::vector<Parameter*> AciHead::parameters() { return pointers(params_); }

crf::EmissionMatrix aci_forward(Backbone& backbone, AciHead& head, const SerializedThread& st) {
  if (st.size() > static_cast<std::size_t>(backbone.config().max_positions))
    throw ContractError("serialized thread longer than max_positions");
  Tape tape;
  const auto ids = backbone.vocab().encode(st.tokens);
  Var hidden = backbone.encode(tape, ids, st.global_attention);
  return head.emissions(tape, hidden).value();
}

BioSequence aci_decode(Backbone& backbone, AciHead& head, const SerializedThread& st) {
  return crf::viterbi(aci_forward(backbone, head, st), head.table());
}

// --- RTP ---------------------------------------------------------------------

std::vector<std::string> PromptInstance::tokens() const {
  std::vector<std::string> out = context_tokens;
  out.insert(out.end(), prompt_tokens.begin(), prompt_tokens.end());
  return out;
}

PromptInstance build_prompt(const SerializedThread& st, const ComponentSpan& source,
                            const ComponentSpan& target, const PromptOptions& opts, int label) {
  if (opts.mask_count < 1) throw ConfigError("prompt needs at least one mask token");
  for (const auto* c : {&target, &source}) {
    if (c->token_start >= c->token_end || c->token_end > st.size())
      throw PromptError("component " + c->component_id + " has no tokens in thread " + st.thread_id);
  }
  const int user_target = st.post_users.at(st.post_of(target.token_start));
  const int user_source = st.post_users.at(st.post_of(source.token_start));

  PromptInstance inst;
  inst.label = label;
  std::vector<std::size_t> mask_offsets;
  auto& pt = inst.prompt_tokens;
  pt.push_back(special::user(user_target));
  pt.push_back(" said");
  pt.insert(pt.end(), st.tokens.begin() + static_cast<std::ptrdiff_t>(target.token_start),
            st.tokens.begin() + static_cast<std::ptrdiff_t>(target.token_end));
  for (int m = 0; m < opts.mask_count; ++m) {
    mask_offsets.push_back(pt.size());
    pt.push_back(std::string(special::kMask));
  }
  pt.push_back(special::user(user_source));
  pt.push_back(" said");
  pt.insert(pt.end(), st.tokens.begin() + static_cast<std::ptrdiff_t>(source.token_start),
            st.tokens.begin() + static_cast<std::ptrdiff_t>(source.token_end));
  if (pt.size() > opts.max_positions)
    throw PromptError("prompt of " + std::to_string(pt.size()) + " tokens does not fit in " +
                      std::to_string(opts.max_positions) + " positions");

  const std::size_t room = opts.max_positions - pt.size();
  inst.context_dropped = st.size() > room ? st.size() - room : 0;
  inst.context_tokens.assign(st.tokens.begin() + static_cast<std::ptrdiff_t>(inst.context_dropped),
                             st.tokens.end());
  const bool user_global = opts.global == GlobalPolicy::UserTokens;
  for (std::size_t i = inst.context_dropped; i < st.size(); ++i)
    inst.global_attention.push_back(user_global && st.flags[i] == SpecialFlag::User);
  for (const auto& t : pt) inst.global_attention.push_back(user_global && special::parse_user(t) >= 0);
  for (std::size_t off : mask_offsets) inst.mask_positions.push_back(inst.context_tokens.size() + off);
  return inst;
}

RtpHead::RtpHead(RtpMode mode, int hidden_size, int num_classes, int mask_count,
                 std::uint64_t seed)
    : mode_(mode),
      input_dim_(mode == RtpMode::Prompt ? mask_count * hidden_size : 2 * hidden_size),
      num_classes_(num_classes),
      mask_count_(mask_count) {
  if (num_classes < 1 || hidden_size < 1 || (mode == RtpMode::Prompt && mask_count < 1))
    throw ConfigError("invalid relation head shape");
  Rng rng(seed, "init/rtp");
  params_.emplace("w", Parameter("w", random_matrix(rng, input_dim_, num_classes, 0.02)));
  params_.emplace("b", Parameter("b", Matrix::Zero(1, num_classes)));
}

Eigen::Index RtpHead::parameter_count() const {
  return params_.at("w").size() + params_.at("b").size();
}

Var RtpHead::scores(Tape& tape, Var features) {
  if (features.cols() != input_dim_)
    throw ContractError("relation head expects " + std::to_string(input_dim_) + " inputs, got " +
                        std::to_string(features.cols()));
  return ad::add_row(ad::matmul(features, tape.parameter(params_.at("w"))),
                     tape.parameter(params_.at("b")));
}

std::vector<Parameter*> RtpHead::parameters() { return pointers(params_); }

Var rtp_forward(Tape& tape, Backbone& backbone, const PromptInstance& inst, RtpHead& head) {
  if (head.mode() != RtpMode::Prompt) throw ContractError("prompt instance needs a prompt head");
  if (static_cast<int>(inst.mask_positions.size()) != head.mask_count())
    throw ContractError("mask count does not match the relation head");
  const auto tokens = inst.tokens();
  for (std::size_t pos : inst.mask_positions)
    if (pos >= tokens.size() || tokens[pos] != special::kMask)
      throw ContractError("mask position " + std::to_string(pos) + " does not hold a mask token");
  const auto ids = backbone.vocab().encode(tokens);
  Var hidden = backbone.encode(tape, ids, inst.global_attention);
  return head.scores(tape, ad::gather_concat(hidden, inst.mask_positions));
}

Var rtp_forward(Tape& tape, Backbone& backbone, const PairInstance& inst, RtpHead& head) {
  if (head.mode() != RtpMode::MeanPool) throw ContractError("pair instance needs a mean-pool head");
  const auto& st = *inst.st;
  const auto ids = backbone.vocab().encode(st.tokens);
  Var hidden = backbone.encode(tape, ids, st.global_attention);
  Var a = ad::mean_rows(hidden, inst.target.token_start, inst.target.token_end);
  Var b = ad::mean_rows(hidden, inst.source.token_start, inst.source.token_end);
  return head.scores(tape, ad::concat_cols(a, b));
}

Eigen::RowVectorXd rtp_scores(Backbone& backbone, const PromptInstance& inst, RtpHead& head) {
  Tape tape;
  return rtp_forward(tape, backbone, inst, head).value().row(0);
}

Eigen::RowVectorXd rtp_scores(Backbone& backbone, const PairInstance& inst, RtpHead& head) {
  Tape tape;
  return rtp_forward(tape, backbone, inst, head).value().row(0);
}

}  // namespace argmine
