#include <sstream>

#include "doctest.h"

#include "argmine/errors.hpp"
#include "argmine/markers.hpp"

using namespace argmine;

namespace {

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  for (auto& t : Tokenizer().tokenize(text)) out.push_back(t.text);
  return out;
}

SerializedThread single(const std::string& body) {
  Post p;
  p.post_id = "p";
  p.author_id = "a";
  p.body = body;
  p.is_submission = true;
  return serialize_thread(make_thread("t", {p}), {});
}

}  // namespace

TEST_CASE("opinion marker at the start") {
  const auto m = find_markers(words("I think that most people agree"), MarkerLexicon::default_lexicon());
  REQUIRE(!m.empty());
  CHECK(m[0].phrase == "i think");
  CHECK(m[0].category == "Opinion");
  CHECK(m[0].token_start == 0);
  CHECK(m[0].token_end == 2);
}

TEST_CASE("causation markers between spans") {
  const auto m = find_markers(words("rates went up. So prices rise if demand holds"), MarkerLexicon::default_lexicon());
  REQUIRE(m.size() == 2);
  CHECK(m[0].phrase == "so");
  CHECK(m[1].phrase == "if");
  CHECK(m[0].category == "Causation");
  CHECK(find_markers(words("hello world"), MarkerLexicon::default_lexicon()).empty());
}

TEST_CASE("longest match wins and words are not split") {
  const auto lex = MarkerLexicon::default_lexicon();
  const auto m = find_markers(words("so long as the class holds"), lex);
  REQUIRE(m.size() == 1);
  CHECK(m[0].phrase == "so long as");
  const auto pieces = find_markers(words("whereas alsoo"), lex);
  CHECK(pieces.empty());
}

TEST_CASE("matches never cross special tokens") {
  const std::vector<std::string> toks{"[USER-0]", "I", "[STARTQ]", " think", "[ENDQ]"};
  CHECK(find_markers(toks, MarkerLexicon::default_lexicon()).empty());
}

TEST_CASE("lexicon file round trip and validation") {
  const auto lex = MarkerLexicon::default_lexicon();
  std::ostringstream out;
  lex.write(out);
  std::istringstream in(out.str());
  const auto back = MarkerLexicon::parse(in);
  CHECK(back.hash() == lex.hash());
  CHECK(back.phrase_count() == lex.phrase_count());
  CHECK(lex.max_phrase_words() == 4);
  MarkerLexicon bad;
  bad.add("Opinion", "i think");
  CHECK_THROWS_AS(bad.add("Causation", "I  Think"), ConfigError);
  CHECK_THROWS_AS(bad.add("Nonsense", "x"), ConfigError);
}

TEST_CASE("disabled categories are not matched") {
  auto lex = MarkerLexicon::default_lexicon();
  lex.set_enabled("Misc", false);
  CHECK(find_markers(words("why not"), lex).empty());
}

TEST_CASE("selective masking masks every marker piece and nothing else") {
  const auto st = single("Nevertheless I think so. Consequently, yes.");
  const auto b = build_masked_batch(st, MarkerLexicon::default_lexicon(), MaskPolicy::Selective, 0);
  std::set<std::size_t> expect;
  for (const auto& m : b.matches)
    for (std::size_t i = m.token_start; i < m.token_end; ++i) expect.insert(i);
  std::set<std::size_t> got;
  for (const auto& [i, _] : b.targets) got.insert(i);
  CHECK(got == expect);
  // "Consequently" is longer than a word piece, so it spans two tokens.
  CHECK(got.size() == 5);
  CHECK(unmask(b) == st.tokens);
}

TEST_CASE("random masking rate, determinism and shield") {
  std::string body;
  for (int i = 0; i < 1000; ++i) body += "w ";
  const auto st = single(body);
  const auto a = build_masked_batch(st, MarkerLexicon::default_lexicon(), MaskPolicy::Random15, 42);
  const auto b = build_masked_batch(st, MarkerLexicon::default_lexicon(), MaskPolicy::Random15, 42);
  CHECK(a.targets == b.targets);
  CHECK(!a.targets.contains(0));
  // 99% interval of Binomial(1000, 0.15): 150 +- 2.576 * 11.29
  CHECK(a.targets.size() >= 121);
  CHECK(a.targets.size() <= 179);
  CHECK(unmask(a) == st.tokens);
}

TEST_CASE("masking an empty stream is an input error") {
  SerializedThread st;
  CHECK_THROWS_AS(build_masked_batch(st, MarkerLexicon::default_lexicon(), MaskPolicy::Selective, 0), InputError);
  CHECK(parse_policy("random15") == MaskPolicy::Random15);
}
