#include <algorithm>
#include <sstream>
#include <set>

#include "doctest.h"

#include "argmine/corpus.hpp"
#include "argmine/errors.hpp"
#include "argmine/synth.hpp"

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

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& t : v) s += t;
  return s;
}

}  // namespace

TEST_CASE("tokenizer keeps every byte") {
  const Tokenizer tok;
  const std::string text = "Hello, world!  It's   a loooooooooong test\n";
  const auto toks = tok.tokenize(text);
  std::string back;
  for (const auto& t : toks) back += t.text;
  CHECK(back == text);
  for (const auto& t : toks) CHECK(text.substr(t.start, t.end - t.start) == t.text);
  CHECK(std::any_of(toks.begin(), toks.end(), [](const RawToken& t) { return t.text == "ooong"; }));
}

TEST_CASE("URL detection trims closing punctuation") {
  const std::string body = "see (https://a.org/x?y=1). and ftp://f.net, ok";
  const auto urls = find_urls(body);
  REQUIRE(urls.size() == 2);
  CHECK(body.substr(urls[0].start, urls[0].size()) == "https://a.org/x?y=1");
  CHECK(body.substr(urls[1].start, urls[1].size()) == "ftp://f.net");
  CHECK(find_urls("no links here").empty());
}

TEST_CASE("a root with two leaf replies gives two threads") {
  const auto threads = extract_threads({post("r", "a", "root"), post("x", "b", "x", "r"), post("y", "a", "y", "r")});
  REQUIRE(threads.size() == 2);
  CHECK(threads[0].posts.size() == 2);
  CHECK(threads[1].posts[1].post_id == "y");
  CHECK(threads[1].user_of(1) == 0);
}

TEST_CASE("chain plus sibling") {
  const auto threads = extract_threads({post("r", "a", "r"), post("c1", "b", "1", "r"), post("c2", "c", "2", "c1"),
                                        post("c1b", "d", "1b", "r")});
  REQUIRE(threads.size() == 2);
  CHECK(threads[0].posts.size() == 3);
  CHECK(threads[1].posts.size() == 2);
  CHECK(threads[0].user_index.at("c") == 2);
}

TEST_CASE("ingestion errors") {
  CHECK_THROWS_AS(extract_threads({post("r", "a", "r"), post("x", "b", "x", "missing")}), IngestionError);
  auto a = post("a", "u", "a", "b");
  auto b = post("b", "u", "b", "a");
  CHECK_THROWS_AS(extract_threads({post("r", "u", "r"), a, b}), StructuralError);
  CHECK_THROWS_AS(extract_threads({post("r", "a", "r"), post("r", "b", "r2")}), IngestionError);
}

TEST_CASE("every post appears once per leaf below it") {
  SynthOptions o;
  o.submissions = 5;
  const auto corpus = generate_synthetic(o);
  const auto threads = extract_threads(corpus.posts);
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& p : corpus.posts)
    if (p.parent_id) children[*p.parent_id].push_back(p.post_id);
  std::function<std::size_t(const std::string&)> leaves = [&](const std::string& id) -> std::size_t {
    auto it = children.find(id);
    if (it == children.end()) return 1;
    std::size_t n = 0;
    for (const auto& c : it->second) n += leaves(c);
    return n;
  };
  std::map<std::string, std::size_t> seen;
  for (const auto& t : threads)
    for (const auto& p : t.posts) ++seen[p.post_id];
  for (const auto& p : corpus.posts) CHECK(seen[p.post_id] == leaves(p.post_id));
}

TEST_CASE("serialization wraps quotes and replaces URLs") {
  auto p2 = post("q", "b", "I quoted X here, see https://x.org/a now", "p");
  p2.quote_ranges = {{9, 10}};
  p2.url_ranges = find_urls(p2.body);
  const Thread t = make_thread("t", {post("p", "a", "about X"), p2});
  const auto st = serialize_thread(t, {});
  const std::vector<std::string> expect{"[USER-0]", "about", " X", "[USER-1]", "I", " quoted", " ",
                                        "[STARTQ]", "X", "[ENDQ]", " here", ",", " see", " ", "[URL]", " now"};
  CHECK(st.tokens == expect);
  CHECK(st.global_attention[0]);
  CHECK(st.global_attention[3]);
  CHECK(std::count(st.global_attention.begin(), st.global_attention.end(), true) == 2);
  CHECK(detokenize_post(st, 1) == "I quoted X here, see [URL] now");
}

TEST_CASE("user capacity") {
  const Thread t = make_thread("t", {post("p", "a", "x"), post("q", "b", "y", "p"), post("r", "c", "z", "q")});
  SerializeOptions o;
  o.user_vocab = 2;
  CHECK_THROWS_AS(serialize_thread(t, o), CapacityError);
}

TEST_CASE("truncation gives a prefix") {
  SynthOptions so;
  so.submissions = 3;
  const auto threads = extract_threads(generate_synthetic(so).posts);
  for (const auto& t : threads) {
    SerializeOptions big;
    const auto full = serialize_thread(t, big);
    for (std::size_t m : {1, 5, 17, 40}) {
      SerializeOptions o;
      o.max_len = m;
      const auto st = serialize_thread(t, o);
      CHECK(st.size() == std::min(m, full.size()));
      CHECK(std::equal(st.tokens.begin(), st.tokens.end(), full.tokens.begin()));
    }
  }
}

TEST_CASE("splits keep submissions together and are deterministic") {
  std::vector<SplitItem> items;
  for (int s = 0; s < 10; ++s)
    for (int k = 0; k <= s % 3; ++k) items.push_back({"t" + std::to_string(s) + "_" + std::to_string(k), "s" + std::to_string(s)});
  const auto plans = make_splits(items, {0.8, 0.2}, 5, 7);
  REQUIRE(plans.size() == 5);
  for (const auto& plan : plans) {
    std::map<std::string, std::set<SplitPart>> by_sub;
    for (const auto& it : items) by_sub[it.submission_id].insert(plan.assignment.at(it.thread_id));
    std::size_t train_groups = 0;
    for (const auto& [_, parts] : by_sub) {
      CHECK(parts.size() == 1);
      train_groups += *parts.begin() == SplitPart::Train ? 1 : 0;
    }
    CHECK(train_groups == 8);
  }
  const auto again = make_splits(items, {0.8, 0.2}, 5, 7);
  std::ostringstream a, b;
  for (const auto& p : plans) write_split_jsonl(a, p);
  for (const auto& p : again) write_split_jsonl(b, p);
  CHECK(a.str() == b.str());
  CHECK_THROWS_AS(make_splits(std::vector<SplitItem>{{"a", "s"}, {"b", "s"}}, {0.5, 0.5}, 1), SplitError);
  CHECK(parse_ratio("50:50") == std::pair<double, double>{0.5, 0.5});
}

TEST_CASE("record IO round trip") {
  SynthOptions so;
  so.submissions = 2;
  const auto posts = generate_synthetic(so).posts;
  std::ostringstream out;
  write_posts_jsonl(out, posts);
  std::istringstream in(out.str());
  const auto back = read_posts_jsonl(in);
  REQUIRE(back.size() == posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    CHECK(back[i].body == posts[i].body);
    CHECK(back[i].quote_ranges == posts[i].quote_ranges);
    CHECK(back[i].parent_id == posts[i].parent_id);
  }
  const auto st = serialize_thread(extract_threads(posts)[0], {});
  std::ostringstream s;
  write_serialized_jsonl(s, st);
  std::istringstream si(s.str());
  const auto st2 = read_serialized_jsonl(si);
  REQUIRE(st2.size() == 1);
  CHECK(st2[0].tokens == st.tokens);
  CHECK(st2[0].flags == st.flags);
  CHECK(st2[0].alignment == st.alignment);
}

TEST_CASE("ConvoKit reader") {
  std::istringstream in(
      "{\"id\":\"s1\",\"speaker\":\"a\",\"reply_to\":null,\"text\":\"root\"}\n"
      "{\"id\":\"c1\",\"speaker\":\"b\",\"reply_to\":\"s1\",\"text\":\"reply\"}\n");
  const auto posts = read_convokit_jsonl(in);
  REQUIRE(posts.size() == 2);
  CHECK(posts[0].is_submission);
  CHECK(posts[1].parent_id == std::optional<std::string>("s1"));
  CHECK(extract_threads(posts).size() == 1);
}

TEST_CASE("quote detection snaps to words") {
  const std::string parent = "The quick brown fox jumps over the lazy dog every day.";
  const std::string body = "You said the lazy dog every day. Wrong.";
  const auto q = detect_quotes(body, parent, 10);
  REQUIRE(q.size() == 1);
  CHECK(body.substr(q[0].start, q[0].size()).find("lazy dog every day") != std::string::npos);
}
