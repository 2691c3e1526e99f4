#include <sstream>

#include "doctest.h"

#include "argmine/errors.hpp"
#include "argmine/evaluation.hpp"
#include "oracles.hpp"

using namespace argmine;

TEST_CASE("worked exact-span examples") {
  const auto& s = LabelSchema::cmv();
  const BioSequence gold{0, 1, 2, 2, 2, 0};
  auto r = exact_span_scores(gold, gold, s);
  CHECK(r.classes[0].tp == 1);
  r = exact_span_scores(gold, {0, 2, 2, 2, 2, 0}, s);
  CHECK(r.classes[0].tp == 1);
  CHECK(r.token_accuracy() == 1.0);
  r = exact_span_scores(gold, {0, 1, 2, 2, 0, 0}, s);
  CHECK(r.classes[0].fp == 1);
  CHECK(r.classes[0].fn == 1);
  CHECK(r.micro_f1() == 0.0);
  CHECK_THROWS_AS(exact_span_scores(gold, {0, 1}, s), InputError);
  CHECK_THROWS_AS(exact_span_scores(gold, {0, 1, 2, 2, 2, 9}, s), InputError);
}

namespace {

std::size_t count(const std::map<int, std::size_t>& m, int c) {
  auto it = m.find(c);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("span scores agree with the brute-force scorer") {
  const auto& s = LabelSchema::cmv();
  Rng rng(21, "test/metric");
  for (int trial = 0; trial < 300; ++trial) {
    const auto gold = repair_bio(oracle::random_bio(rng, 15, 2));
    const auto pred = oracle::perturb(rng, gold, 2, 0.15);
    const auto r = exact_span_scores(gold, pred, s);
    const auto o = oracle::brute_span_scores(gold, pred);
    for (int c = 0; c < 2; ++c) {
      CHECK(r.classes[c].tp == count(o.tp, c));
      CHECK(r.classes[c].fp == count(o.fp, c));
      CHECK(r.classes[c].fn == count(o.fn, c));
    }
    CHECK(r.tokens_correct == o.tokens_correct);
    CHECK(r.micro_f1() == doctest::Approx(o.micro_f1()));
    const auto swapped = exact_span_scores(repair_bio(pred), gold, s);
    CHECK(swapped.classes[0].precision() == doctest::Approx(exact_span_scores(gold, repair_bio(pred), s).classes[0].recall()));
  }
}

TEST_CASE("relation scores") {
  const auto& s = LabelSchema::cmv();
  auto r = relation_scores(std::vector<std::string>{"support", "direct attack"},
                           std::vector<std::string>{"support", "support"}, s);
  CHECK(r.classes[0].precision() == 0.5);
  CHECK(r.classes[0].recall() == 1.0);
  CHECK(r.classes[2].recall() == 0.0);
  CHECK(r.micro_f1() == 0.5);
  r = relation_scores(std::vector<int>{1, 1, 1}, std::vector<int>{1, 0, 1}, s);
  CHECK(r.micro_f1() == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(relation_scores(std::vector<std::string>{"rant"}, std::vector<std::string>{"support"}, s), SchemaError);
  CHECK_THROWS_AS(relation_scores(std::vector<int>{7}, std::vector<int>{0}, s), SchemaError);
}

namespace {

LabeledThread spaced_components(const std::vector<std::size_t>& starts) {
  LabeledThread lt;
  lt.schema = "cmv";
  std::size_t n = starts.back() + 2;
  lt.st.tokens.assign(n, " w");
  lt.st.tokens[0] = "[USER-0]";
  lt.st.flags.assign(n, SpecialFlag::None);
  lt.st.flags[0] = SpecialFlag::User;
  lt.st.global_attention.assign(n, false);
  lt.st.alignment.assign(n, std::nullopt);
  lt.st.post_starts = {0};
  lt.st.post_users = {0};
  for (std::size_t i = 0; i < starts.size(); ++i)
    lt.components.push_back({"c" + std::to_string(i), "t", starts[i], starts[i] + 1, 0});
  lt.bio.assign(n, 0);
  for (auto s : starts) lt.bio[s] = 1;
  return lt;
}

}  // namespace

TEST_CASE("distance profile recovers planted errors") {
  const auto lt = spaced_components({1, 2, 20, 150, 600});
  std::vector<EdgePrediction> edges;
  // gap 0 right, gap 17 wrong, gap 147 wrong, gap 597 wrong; errors only beyond 10 tokens
  edges.push_back({&lt, "c1", "c0", 0, 0});
  edges.push_back({&lt, "c2", "c1", 0, 1});
  edges.push_back({&lt, "c3", "c0", 0, 1});
  edges.push_back({&lt, "c4", "c0", 0, 2});
  edges.push_back({&lt, "c4", "missing", 0, 0});
  const auto p = distance_error_profile(edges, default_distance_bins());
  CHECK(p.unresolved == 1);
  CHECK(p.bins[0].total == 1);
  CHECK(p.bins[0].error_rate() == 0.0);
  CHECK(p.bins[1].error_rate() == 1.0);
  CHECK(p.bins[2].error_rate() == 1.0);
  CHECK(p.bins[3].error_rate() == 1.0);
  CHECK(component_distance(lt, lt.components[0], lt.components[3], DistanceUnit::Components) == 2);
  CHECK(component_distance(lt, lt.components[0], lt.components[3], DistanceUnit::Posts) == 0);
  std::ostringstream out;
  write_distance_table(out, p);
  CHECK(out.str().find("[10,50)") != std::string::npos);
}

TEST_CASE("marker vicinity partition") {
  LabeledThread lt;
  lt.schema = "cmv";
  lt.st.tokens = {"[USER-0]", "Because", " cars", " pollute", ".", " Trees", " grow", " tall", " in", " the",
                  " big", " forest", " every", " year", " again", "."};
  const std::size_t n = lt.st.tokens.size();
  lt.st.flags.assign(n, SpecialFlag::None);
  lt.st.flags[0] = SpecialFlag::User;
  lt.st.global_attention.assign(n, false);
  lt.st.alignment.assign(n, std::nullopt);
  lt.st.post_starts = {0};
  lt.st.post_users = {0};
  lt.components = {{"a", "t", 2, 4, 1}, {"b", "t", 13, 15, 0}};
  lt.bio = spans_to_bio({{2, 4, 1}, {13, 15, 0}}, n);
  const auto lex = MarkerLexicon::default_lexicon();
  const auto split = marker_vicinity_split(lt, find_markers(lt.st, lex));
  CHECK(split.near == std::vector<std::size_t>{0});
  CHECK(split.far == std::vector<std::size_t>{1});
  CHECK(marker_vicinity_split(lt, {}).far.size() == 2);
  const auto rep = marker_vicinity_report({lt}, {lt.bio}, lex);
  CHECK(rep.near_count + rep.far_count == 2);
  CHECK(rep.near.micro_f1() == 1.0);
  CHECK(rep.far.micro_f1() == 1.0);
}

TEST_CASE("tables and plot render") {
  SpanMatchReport r(LabelSchema::cmv());
  r.add({0, 1, 2}, {0, 1, 2});
  std::ostringstream t, svg;
  write_span_table(t, r, "ACI");
  CHECK(t.str().find("claim") != std::string::npos);
  write_epoch_plot_svg(svg, {{"aci", {0.1, 0.5, 0.7}, {0.0, 0.1, 0.05}}}, "F1");
  CHECK(svg.str().find("<svg") != std::string::npos);
  CHECK(svg.str().find("</svg>") != std::string::npos);
}
