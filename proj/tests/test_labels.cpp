#include <sstream>

#include "doctest.h"

#include "argmine/errors.hpp"
#include "argmine/labels.hpp"
#include "oracles.hpp"

using namespace argmine;

namespace {

Post post(std::string id, std::string author, std::string body, std::optional<std::string> parent = {}) {
  Post p;
  p.post_id = std::move(id);
  p.author_id = std::move(author);
  p.body = std::move(body);
  p.parent_id = std::move(parent);
  p.is_submission = !p.parent_id;
  return p;
}

}  // namespace

TEST_CASE("relation grouping follows the CMV and Dr. Inventor tables") {
  const auto& cmv = LabelSchema::cmv();
  CHECK(cmv.relation_classes()[group_relation("rebuttal attack", cmv)] == "direct attack");
  CHECK(cmv.relation_classes()[group_relation("support", cmv)] == "support");
  CHECK(cmv.relation_classes()[group_relation("understand", cmv)] == "agreement");
  CHECK(cmv.relation_classes()[group_relation("continue", cmv)] == "support");
  CHECK(cmv.relation_classes()[group_relation("Partial_Attack", cmv)] == "partial");
  const auto& dr = LabelSchema::dr_inventor();
  CHECK(dr.relation_classes()[group_relation("parts-of-same", dr)] == "semantically same");
  CHECK(dr.relation_classes()[group_relation("contradicts", dr)] == "contradicts");
  CHECK_THROWS_AS(group_relation("sarcasm", cmv), MappingError);
  try {
    group_relation("sarcasm", cmv);
  } catch (const MappingError& e) {
    CHECK(std::string(e.what()).find("undercutter") != std::string::npos);
  }
}

TEST_CASE("label ids and names") {
  const auto& s = LabelSchema::cmv();
  CHECK(s.num_labels() == 5);
  CHECK(LabelSchema::dr_inventor().num_labels() == 7);
  CHECK(s.label_name(1) == "B-claim");
  CHECK(s.label_name(4) == "I-premise");
  CHECK(s.short_label_name(3) == "B-P");
  CHECK(s.parse_label("I-claim") == 2);
  CHECK_THROWS_AS(s.parse_label("B-thesis"), SchemaError);
}

TEST_CASE("BIO repair and span bijection") {
  const auto& s = LabelSchema::cmv();
  Rng rng(2, "test/bio");
  for (int trial = 0; trial < 300; ++trial) {
    const auto y = oracle::random_bio(rng, 12, 2);
    const auto fixed = repair_bio(y);
    CHECK(is_valid_bio(fixed, s));
    CHECK(repair_bio(fixed) == fixed);
    CHECK(spans_to_bio(bio_to_spans(fixed), fixed.size()) == fixed);
    if (is_valid_bio(y, s)) CHECK(fixed == y);
  }
  CHECK(repair_bio({0, 2, 2, 0, 4}) == BioSequence{0, 1, 2, 0, 3});
  CHECK(repair_bio({1, 4}) == BioSequence{1, 3});
}

TEST_CASE("alignment of a claim over tokens 1..4") {
  const Thread t = make_thread("t", {post("p", "a", "so we should ban cars .")});
  const auto st = serialize_thread(t, {});
  // tokens: [USER-0] so _we _should _ban _cars _.
  REQUIRE(st.size() == 7);
  const auto r = align_annotations(st, {{"c1", 0, 3, 20, 0}}, LabelSchema::cmv());
  CHECK(r.bio == BioSequence{0, 0, 1, 2, 2, 2, 0});
  REQUIRE(r.spans.size() == 1);
  CHECK(r.spans[0].token_start == 2);
  CHECK(r.spans[0].token_end == 6);
}

TEST_CASE("alignment expands to covering tokens and keeps adjacent spans apart") {
  const Thread t = make_thread("t", {post("p", "a", "alpha beta gamma delta")});
  const auto st = serialize_thread(t, {});
  const auto& s = LabelSchema::cmv();
  const auto r = align_annotations(st, {{"c1", 0, 2, 7, 0}, {"c2", 0, 11, 16, 0}}, s);
  CHECK(r.bio == BioSequence{0, 1, 2, 1, 0});
  CHECK(align_annotations(st, {}, s).bio == BioSequence(5, 0));
  CHECK_THROWS_AS(align_annotations(st, {{"c1", 0, 0, 10, 0}, {"c2", 0, 6, 16, 1}}, s), AnnotationError);
}

TEST_CASE("spans cut by truncation are dropped") {
  const Thread t = make_thread("t", {post("p", "a", "one two three four five")});
  SerializeOptions o;
  o.max_len = 4;
  const auto st = serialize_thread(t, o);
  const auto r = align_annotations(st, {{"c1", 0, 0, 7, 0}, {"c2", 0, 8, 18, 1}}, LabelSchema::cmv());
  CHECK(r.spans.size() == 1);
  CHECK(r.dropped == std::vector<std::string>{"c2"});
}

TEST_CASE("discontiguous components are split with a linking edge") {
  RawComponent c{"x", {{0, 0, 4}}, 0};
  auto one = split_discontiguous(c, LabelSchema::cmv());
  CHECK(one.pieces.size() == 1);
  CHECK(one.links.empty());
  c.ranges.push_back({0, 10, 14});
  auto two = split_discontiguous(c, LabelSchema::cmv());
  REQUIRE(two.pieces.size() == 2);
  REQUIRE(two.links.size() == 1);
  CHECK(two.links[0].fine_type == "continue");
  CHECK(LabelSchema::cmv().relation_classes()[two.links[0].coarse_class] == "support");
  auto dr = split_discontiguous(c, LabelSchema::dr_inventor());
  CHECK(dr.links[0].fine_type == "parts-of-same");
  CHECK(LabelSchema::dr_inventor().relation_classes()[dr.links[0].coarse_class] == "semantically same");
}

TEST_CASE("CMV-Modes markup reader") {
  std::istringstream in(
      "<thread id=\"t1\"><title>T</title><OP author=\"u1\"><claim id=\"1\">We should act</claim>. "
      "</OP><reply id=\"r1\" author=\"u2\"><quote>We should act</quote> no. <premise id=\"2\" "
      "ref=\"1\" rel=\"rebuttal\">It costs a lot</premise></reply></thread>");
  const auto pc = read_cmv_modes(in);
  REQUIRE(pc.posts.size() == 2);
  CHECK(pc.posts[0].body == "We should act. ");
  CHECK(pc.posts[1].parent_id == pc.posts[0].post_id);
  REQUIRE(pc.posts[1].quote_ranges.size() == 1);
  CHECK(pc.annotations.ranges.size() == 2);
  REQUIRE(pc.annotations.relations.size() == 1);
  CHECK(pc.annotations.relations[0].fine_type == "rebuttal");
  CHECK(pc.annotations.relations[0].target_id == "t1/1");
}

TEST_CASE("label_thread keeps relations whose endpoints survive and stats count them") {
  const Thread t = make_thread("t", {post("p", "a", "I think cars are bad because they pollute."),
                                     post("q", "b", "I disagree that is wrong.", "p")});
  Annotations ann;
  ann.ranges = {{"c1", "p", 8, 20, "claim"}, {"c2", "p", 29, 41, "premise"}, {"c3", "q", 11, 24, "claim"}};
  ann.relations = {{"c2", "c1", "support"}, {"c3", "c1", "disagreement"}};
  const auto lt = label_thread(t, ann, LabelSchema::cmv(), {});
  CHECK(lt.components.size() == 3);
  CHECK(lt.relations.size() == 2);
  const auto stats = dataset_stats({lt}, LabelSchema::cmv());
  std::size_t b_total = 0;
  for (auto& [name, n] : stats.label_tokens)
    if (name.starts_with("B-")) b_total += n;
  CHECK(b_total == 3);
  std::ostringstream out;
  write_labeled_jsonl(out, lt);
  std::istringstream back(out.str());
  const auto again = read_labeled_jsonl(back);
  REQUIRE(again.size() == 1);
  CHECK(again[0].bio == lt.bio);
  CHECK(again[0].st.tokens == lt.st.tokens);
  CHECK(again[0].relations.size() == 2);
}

TEST_CASE("section merging is greedy within budget") {
  const auto g = merge_sections({3, 4, 2, 9, 1}, 9);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(g[1] == std::pair<std::size_t, std::size_t>{3, 4});
  CHECK(g[2] == std::pair<std::size_t, std::size_t>{4, 5});
}

TEST_CASE("Dr. Inventor brat reader") {
  const std::string text = "We propose a model.\n\nIt is fast because of caching.\n";
  std::istringstream ann("T1\town_claim 0 18\tWe propose a model\nT2\tdata 29 50\tbecause of caching\n"
                         "R1\tsupports Arg1:T2 Arg2:T1\n");
  const auto pc = read_dr_inventor(text, ann, "doc", 4096);
  CHECK(pc.posts.size() == 1);
  CHECK(pc.annotations.ranges.size() == 2);
  REQUIRE(pc.annotations.relations.size() == 1);
  CHECK(group_relation(pc.annotations.relations[0].fine_type, LabelSchema::dr_inventor()) == 0);
}
