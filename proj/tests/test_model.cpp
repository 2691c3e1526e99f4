#include <sstream>

#include "doctest.h"

#include "argmine/checkpoint.hpp"
#include "argmine/errors.hpp"
#include "argmine/model.hpp"
#include "argmine/synth.hpp"

using namespace argmine;

namespace {

struct Fixture {
  std::vector<LabeledThread> threads;
  Vocab vocab;

  Fixture() {
    SynthOptions o;
    o.submissions = 4;
    o.seed = 9;
    const auto corpus = generate_synthetic(o);
    for (const auto& t : extract_threads(corpus.posts))
      threads.push_back(label_thread(t, corpus.annotations, LabelSchema::cmv(), {}));
    std::vector<std::vector<std::string>> seqs;
    for (const auto& lt : threads) seqs.push_back(lt.st.tokens);
    seqs.push_back({" said"});
    vocab = Vocab::build(seqs, 12);
  }

  BackboneConfig config(int hidden = 16) const {
    BackboneConfig c;
    c.vocab = vocab;
    c.hidden_size = hidden;
    c.layers = 2;
    c.heads = 2;
    c.ffn_size = 32;
    c.max_positions = 512;
    c.init_seed = 3;
    return c;
  }
};

}  // namespace

TEST_CASE("vocabulary layout and whitespace keys") {
  const std::vector<std::vector<std::string>> seqs{{"so", " so", "\nso", "[USER-0]", "b"}};
  const auto v = Vocab::build(seqs, 2);
  CHECK(v.token(0) == "[PAD]");
  CHECK(v.token(6) == "[USER-0]");
  CHECK(v.id("\n\nso") == v.id(" so"));
  CHECK(v.id("so") != v.id(" so"));
  CHECK(v.id("zebra") == v.unk_id());
  CHECK_THROWS_AS(Vocab({"[UNK]", "[PAD]", "[MASK]"}), ConfigError);
  CHECK_THROWS_AS(Vocab({"[PAD]", "[UNK]", "[MASK]", "a", "a"}), ConfigError);
}

TEST_CASE("attention pattern") {
  Fixture f;
  auto c = BackboneConfig::thread_level(f.vocab);
  CHECK(c.max_positions == 4096);
  CHECK(c.window_size == 512);
  c.window_size = 4;
  std::vector<bool> g(8, false);
  g[5] = true;
  const auto a = attention_pattern(c, g);
  CHECK(a(0, 2));
  CHECK(!a(0, 3));
  CHECK(a(0, 5));
  CHECK(a(5, 0));
  CHECK(BackboneConfig::comment_level(f.vocab).attention_mode == AttentionMode::Dense);
}

TEST_CASE("dense and windowed encoders agree when every pair is within the window") {
  Fixture f;
  auto dense = f.config();
  auto windowed = dense;
  windowed.attention_mode = AttentionMode::WindowedGlobal;
  windowed.window_size = 16;
  ToyTransformer a(dense), b(windowed);
  const auto& st = f.threads[0].st;
  const std::vector<std::string> toks(st.tokens.begin(), st.tokens.begin() + 9);
  const std::vector<bool> g(9, false);
  const auto ea = encode_values(a, toks, g), eb = encode_values(b, toks, g);
  CHECK((ea - eb).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ea.rows() == 9);
  CHECK(ea.cols() == 16);
}

TEST_CASE("encoder contracts") {
  Fixture f;
  auto c = f.config();
  c.max_positions = 4;
  ToyTransformer m(c);
  ad::Tape tape;
  const std::vector<int> ids{3, 4, 5, 6, 7};
  CHECK_THROWS_AS(m.encode(tape, ids, std::vector<bool>(5, false)), ContractError);
  CHECK_THROWS_AS(m.encode(tape, std::span<const int>(ids.data(), 2), std::vector<bool>(3, false)), ContractError);
  CHECK_THROWS_AS(m.encode(tape, std::span<const int>(), {}), ContractError);
  BackboneConfig empty;
  empty.vocab = Vocab({"[PAD]", "[UNK]", "[MASK]"});
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("global attention policy") {
  Fixture f;
  const auto& st = f.threads[0].st;
  const auto users = set_global_attention(st, GlobalPolicy::UserTokens);
  CHECK(static_cast<std::size_t>(std::count(users.global_attention.begin(), users.global_attention.end(), true)) ==
        st.post_starts.size());
  const auto none = set_global_attention(st, GlobalPolicy::None);
  CHECK(std::count(none.global_attention.begin(), none.global_attention.end(), true) == 0);
}

TEST_CASE("ACI emissions have one row per token and are deterministic") {
  Fixture f;
  ToyTransformer m(f.config());
  AciHead head(16, LabelSchema::cmv(), 1);
  const auto& st = f.threads[0].st;
  const auto e1 = aci_forward(m, head, st);
  const auto e2 = aci_forward(m, head, st);
  CHECK(e1.rows() == static_cast<Eigen::Index>(st.size()));
  CHECK(e1.cols() == 5);
  CHECK(e1 == e2);
  CHECK(is_valid_bio(aci_decode(m, head, st), LabelSchema::cmv()));
}

TEST_CASE("prompt template and truncation") {
  Fixture f;
  const LabeledThread* lt = nullptr;
  for (const auto& t : f.threads)
    if (!t.relations.empty()) lt = &t;
  REQUIRE(lt);
  const auto& rel = lt->relations[0];
  const auto& src = *lt->component(rel.source_id);
  const auto& tgt = *lt->component(rel.target_id);
  PromptOptions o;
  o.mask_count = 2;
  const auto p = build_prompt(lt->st, src, tgt, o);
  CHECK(p.context_tokens == lt->st.tokens);
  CHECK(p.prompt_tokens[1] == " said");
  CHECK(std::count(p.prompt_tokens.begin(), p.prompt_tokens.end(), "[MASK]") == 2);
  const auto all = p.tokens();
  for (auto pos : p.mask_positions) CHECK(all[pos] == "[MASK]");
  CHECK(build_prompt(lt->st, src, tgt, o).tokens() == all);

  o.max_positions = p.prompt_tokens.size() + 3;
  const auto cut = build_prompt(lt->st, src, tgt, o);
  CHECK(cut.context_tokens.size() == 3);
  CHECK(cut.context_dropped == lt->st.size() - 3);
  CHECK(cut.prompt_tokens == p.prompt_tokens);
  o.max_positions = p.prompt_tokens.size() - 1;
  CHECK_THROWS_AS(build_prompt(lt->st, src, tgt, o), PromptError);
  ComponentSpan bad = src;
  bad.token_end = bad.token_start;
  CHECK_THROWS_AS(build_prompt(lt->st, bad, tgt, {}), PromptError);
  // A component paired with itself still yields a well-formed prompt.
  CHECK(build_prompt(lt->st, src, src, {}).prompt_tokens.size() == 2 * (src.token_end - src.token_start) + 7);
}

TEST_CASE("relation heads") {
  RtpHead prompt(RtpMode::Prompt, 4, 5, 3, 0);
  CHECK(prompt.input_dim() == 12);
  CHECK(prompt.parameter_count() == (3 * 4 + 1) * 5);
  RtpHead pool(RtpMode::MeanPool, 4, 5, 3, 0);
  CHECK(pool.parameter_count() == (2 * 4 + 1) * 5);

  Fixture f;
  ToyTransformer m(f.config());
  const auto& lt = f.threads[0];
  RtpHead head(RtpMode::MeanPool, 16, 5, 3, 2);
  ComponentSpan one = lt.components[0];
  one.token_end = one.token_start + 1;
  PairInstance inst{&lt.st, one, one, 0};
  const auto hidden = encode_values(m, lt.st.tokens, lt.st.global_attention);
  Eigen::RowVectorXd feats(32);
  feats << hidden.row(static_cast<Eigen::Index>(one.token_start)), hidden.row(static_cast<Eigen::Index>(one.token_start));
  const auto& w = head.named_parameters().at("w").value;
  const auto& b = head.named_parameters().at("b").value;
  const Eigen::RowVectorXd expect = feats * w + b;
  CHECK((rtp_scores(m, inst, head) - expect).cwiseAbs().maxCoeff() < 1e-12);

  RtpHead wrong(RtpMode::Prompt, 16, 5, 3, 2);
  ad::Tape tape;
  CHECK_THROWS_AS(rtp_forward(tape, m, inst, wrong), ContractError);
}

TEST_CASE("checkpoint round trip") {
  Fixture f;
  ToyTransformer m(f.config());
  AciHead aci(16, LabelSchema::cmv(), 4);
  RtpHead rtp(RtpMode::Prompt, 16, 5, 3, 5);
  ModelView view{&m, &aci, &rtp, "cmv", {}};
  view.meta.task = "aci";
  view.meta.seed = 17;
  view.meta.code_version = code_version();
  std::stringstream buf;
  save_checkpoint(buf, view);
  const auto bundle = load_checkpoint(buf);
  CHECK(bundle.meta.seed == 17);
  CHECK(bundle.meta.code_version == code_version());
  REQUIRE(bundle.aci);
  REQUIRE(bundle.rtp);
  CHECK(bundle.rtp->mask_count() == 3);
  const auto& st = f.threads[0].st;
  CHECK(aci_forward(*bundle.backbone, *bundle.aci, st) == aci_forward(m, aci, st));
  std::istringstream junk("not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(junk), SchemaError);
}
