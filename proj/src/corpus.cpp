#include "argmine/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "argmine/errors.hpp"
#include "json_io.hpp"
#include "argmine/rng.hpp"

namespace argmine {

using nlohmann::json;

namespace {

void check_ranges(const Post& post, const std::vector<CharRange>& ranges,
                  const char* what) {
  std::vector<CharRange> sorted = ranges;
  std::sort(sorted.begin(), sorted.end(),
            [](const CharRange& a, const CharRange& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].start > sorted[i].end || sorted[i].end > post.body.size())
      throw IngestionError("post " + post.post_id + ": " + what + " range out of body");
    if (i > 0 && sorted[i].start < sorted[i - 1].end)
      throw IngestionError("post " + post.post_id + ": overlapping " + what + " ranges");
  }
}

}  // namespace

void validate_post(const Post& post) {
  if (post.post_id.empty()) throw IngestionError("post with empty post_id");
  if (post.is_submission == post.parent_id.has_value())
    throw IngestionError("post " + post.post_id +
                         ": is_submission must hold exactly when parent_id is absent");
  check_ranges(post, post.quote_ranges, "quote");
  check_ranges(post, post.url_ranges, "url");
}

int Thread::user_of(std::size_t post_index) const {
  return user_index.at(posts.at(post_index).author_id);
}

Thread make_thread(std::string thread_id, std::vector<Post> path) {
  Thread t;
  t.thread_id = std::move(thread_id);
  t.submission_id = path.empty() ? std::string() : path.front().post_id;
  for (const auto& p : path) {
    if (!t.user_index.contains(p.author_id)) {
      const int next = static_cast<int>(t.user_index.size());
      t.user_index.emplace(p.author_id, next);
    }
  }
  t.posts = std::move(path);
  return t;
}

std::size_t visit_threads(const std::vector<Post>& forest,
                          const std::function<void(const Thread&)>& visit) {
  std::unordered_map<std::string, std::size_t> by_id;
  by_id.reserve(forest.size());
  for (std::size_t i = 0; i < forest.size(); ++i) {
    validate_post(forest[i]);
    if (!by_id.emplace(forest[i].post_id, i).second)
      throw IngestionError("duplicate post_id " + forest[i].post_id);
  }
  std::vector<std::vector<std::size_t>> children(forest.size());
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < forest.size(); ++i) {
    const auto& p = forest[i];
    if (!p.parent_id) {
      roots.push_back(i);
      continue;
    }
    auto it = by_id.find(*p.parent_id);
    if (it == by_id.end())
      throw IngestionError("orphan post " + p.post_id + ": parent " + *p.parent_id +
                           " not found");
    children[it->second].push_back(i);
  }

  std::vector<bool> reached(forest.size(), false);
  std::size_t count = 0;
  // Explicit stack of (node, next child cursor) so deep chains do not recurse.
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  std::vector<std::size_t> path;
  for (std::size_t root : roots) {
    stack.push_back({root, 0});
    path.push_back(root);
    reached[root] = true;
    while (!stack.empty()) {
      auto& [node, cursor] = stack.back();
      if (children[node].empty()) {
        std::vector<Post> posts;
        posts.reserve(path.size());
        for (std::size_t k : path) posts.push_back(forest[k]);
        const std::string id = forest[root].post_id + ":" + forest[node].post_id;
        visit(make_thread(id, std::move(posts)));
        ++count;
      }
      if (cursor < children[node].size()) {
        const std::size_t child = children[node][cursor++];
        reached[child] = true;
        stack.push_back({child, 0});
        path.push_back(child);
      } else {
        stack.pop_back();
        path.pop_back();
      }
    }
  }
  for (std::size_t i = 0; i < forest.size(); ++i)
    if (!reached[i])
      throw StructuralError("cycle detected in reply structure at post " +
                            forest[i].post_id);
  return count;
}

std::vector<Thread> extract_threads(const std::vector<Post>& forest) {
  std::vector<Thread> out;
  visit_threads(forest, [&](const Thread& t) { out.push_back(t); });
  return out;
}

std::vector<CharRange> detect_quotes(std::string_view body, std::string_view parent,
                                     std::size_t min_chars) {
  std::vector<CharRange> found;
  if (body.empty() || parent.empty()) return found;
  std::vector<bool> used(body.size(), false);
  auto at_word_start = [&](std::size_t i) {
    return i == 0 || !is_word_byte(static_cast<unsigned char>(body[i - 1])) ||
           !is_word_byte(static_cast<unsigned char>(body[i]));
  };
  auto at_word_end = [&](std::size_t e) {
    return e == body.size() || !is_word_byte(static_cast<unsigned char>(body[e])) ||
           !is_word_byte(static_cast<unsigned char>(body[e - 1]));
  };
  while (true) {
    // Longest common substring over unused body bytes (rolling DP row).
    std::vector<std::size_t> prev(parent.size() + 1, 0), cur(parent.size() + 1, 0);
    std::size_t best_len = 0, best_end = 0;
    for (std::size_t i = 1; i <= body.size(); ++i) {
      for (std::size_t j = 1; j <= parent.size(); ++j) {
        if (!used[i - 1] && body[i - 1] == parent[j - 1]) {
          cur[j] = prev[j - 1] + 1;
          if (cur[j] > best_len) {
            best_len = cur[j];
            best_end = i;
          }
        } else {
          cur[j] = 0;
        }
      }
      std::swap(prev, cur);
    }
    if (best_len < min_chars) break;
    std::size_t s = best_end - best_len, e = best_end;
    while (s < e && (!at_word_start(s) || is_space_byte(static_cast<unsigned char>(body[s])))) ++s;
    while (e > s && (!at_word_end(e) || is_space_byte(static_cast<unsigned char>(body[e - 1])))) --e;
    for (std::size_t k = best_end - best_len; k < best_end; ++k) used[k] = true;
    if (e > s && e - s >= min_chars) found.push_back({s, e});
  }
  std::sort(found.begin(), found.end(),
            [](const CharRange& a, const CharRange& b) { return a.start < b.start; });
  return found;
}

std::string_view flag_name(SpecialFlag f) {
  switch (f) {
    case SpecialFlag::None: return "NONE";
    case SpecialFlag::User: return "USER";
    case SpecialFlag::StartQuote: return "STARTQ";
    case SpecialFlag::EndQuote: return "ENDQ";
    case SpecialFlag::Url: return "URL";
  }
  return "NONE";
}

SpecialFlag parse_flag(std::string_view name) {
  if (name == "NONE") return SpecialFlag::None;
  if (name == "USER") return SpecialFlag::User;
  if (name == "STARTQ") return SpecialFlag::StartQuote;
  if (name == "ENDQ") return SpecialFlag::EndQuote;
  if (name == "URL") return SpecialFlag::Url;
  throw InputError("unknown token flag " + std::string(name));
}

std::size_t SerializedThread::post_of(std::size_t i) const {
  auto it = std::upper_bound(post_starts.begin(), post_starts.end(), i);
  if (it == post_starts.begin()) throw ContractError("token precedes the first post");
  return static_cast<std::size_t>(it - post_starts.begin()) - 1;
}

namespace {

/// Appends tokens to a SerializedThread until the length budget is spent.
class BoundedEmitter {
 public:
  BoundedEmitter(SerializedThread& st, std::size_t max_len) : st_(st), max_len_(max_len) {}

  bool full() const { return st_.tokens.size() >= max_len_; }

  bool emit(std::string token, std::optional<TokenAlignment> align, SpecialFlag flag) {
    if (full()) return false;
    st_.tokens.push_back(std::move(token));
    st_.alignment.push_back(align);
    st_.flags.push_back(flag);
    st_.global_attention.push_back(flag == SpecialFlag::User);
    return true;
  }

 private:
  SerializedThread& st_;
  std::size_t max_len_;
};

void emit_plain(BoundedEmitter& out, const Tokenizer& tok, const Post& post,
                std::size_t post_index, std::size_t from, std::size_t to,
                std::size_t& covered) {
  // URLs strictly inside [from, to), clipped at the segment edges.
  std::size_t pos = from;
  auto emit_text = [&](std::size_t a, std::size_t b) {
    if (b <= a) return;
    for (auto& rt : tok.tokenize(std::string_view(post.body).substr(a, b - a), a)) {
      const TokenAlignment al{post_index, rt.start, rt.end};
      if (!out.emit(std::move(rt.text), al, SpecialFlag::None)) return;
      covered = al.end;
    }
  };
  for (const auto& url : post.url_ranges) {
    const std::size_t us = std::max(url.start, from), ue = std::min(url.end, to);
    if (ue <= us || us < pos) continue;
    emit_text(pos, us);
    if (out.full()) return;
    out.emit(std::string(special::kUrl), TokenAlignment{post_index, us, ue}, SpecialFlag::Url);
    covered = ue;
    pos = ue;
  }
  emit_text(pos, to);
}

SerializedThread serialize_posts(const Thread& thread, std::size_t first, std::size_t last,
                                 const SerializeOptions& opts) {
  if (opts.max_len < 1) throw ContractError("max_len must be at least 1");
  const Tokenizer tok(opts.tokenizer);
  SerializedThread st;
  st.thread_id = thread.thread_id;
  st.submission_id = thread.submission_id;
  BoundedEmitter out(st, opts.max_len);
  for (std::size_t j = first; j < last && !out.full(); ++j) {
    Post post = thread.posts[j];
    const int user = thread.user_of(j);
    if (user >= opts.user_vocab)
      throw CapacityError("thread " + thread.thread_id + " has more than " +
                          std::to_string(opts.user_vocab) + " distinct authors");
    std::sort(post.quote_ranges.begin(), post.quote_ranges.end(),
              [](const CharRange& a, const CharRange& b) { return a.start < b.start; });
    std::sort(post.url_ranges.begin(), post.url_ranges.end(),
              [](const CharRange& a, const CharRange& b) { return a.start < b.start; });
    const std::size_t post_index = j - first;
    st.post_users.push_back(user);
    st.post_starts.push_back(st.tokens.size());
    st.post_covered.push_back(0);
    std::size_t& covered = st.post_covered.back();
    out.emit(special::user(user), std::nullopt, SpecialFlag::User);

    std::size_t pos = 0;
    for (const auto& q : post.quote_ranges) {
      if (q.size() == 0) continue;
      emit_plain(out, tok, post, post_index, pos, q.start, covered);
      if (!out.emit(std::string(special::kStartQuote), std::nullopt, SpecialFlag::StartQuote))
        break;
      emit_plain(out, tok, post, post_index, q.start, q.end, covered);
      if (!out.emit(std::string(special::kEndQuote), std::nullopt, SpecialFlag::EndQuote))
        break;
      pos = q.end;
    }
    if (!out.full()) emit_plain(out, tok, post, post_index, pos, post.body.size(), covered);
  }
  return st;
}

}  // namespace

SerializedThread serialize_thread(const Thread& thread, const SerializeOptions& opts) {
  return serialize_posts(thread, 0, thread.posts.size(), opts);
}

SerializedThread serialize_post(const Thread& thread, std::size_t post_index,
                                const SerializeOptions& opts) {
  if (post_index >= thread.posts.size()) throw ContractError("post index out of range");
  SerializedThread st = serialize_posts(thread, post_index, post_index + 1, opts);
  st.thread_id = thread.thread_id + "#" + thread.posts[post_index].post_id;
  return st;
}

std::string detokenize_post(const SerializedThread& st, std::size_t post_index) {
  std::string out;
  const std::size_t begin = st.post_starts.at(post_index);
  const std::size_t end =
      post_index + 1 < st.post_starts.size() ? st.post_starts[post_index + 1] : st.size();
  for (std::size_t i = begin; i < end; ++i) {
    if (st.flags[i] == SpecialFlag::None || st.flags[i] == SpecialFlag::Url) out += st.tokens[i];
  }
  return out;
}

// --- splits -----------------------------------------------------------------

std::vector<std::string> SplitPlan::threads_in(SplitPart part) const {
  std::vector<std::string> out;
  for (const auto& [id, p] : assignment)
    if (p == part) out.push_back(id);
  return out;
}

std::vector<SplitPlan> make_splits(const std::vector<SplitItem>& items,
                                   std::pair<double, double> ratios, int n_seeds,
                                   std::uint64_t base_seed) {
  if (ratios.first < 0 || ratios.second < 0 || std::abs(ratios.first + ratios.second - 1.0) > 1e-9)
    throw SplitError("split ratios must be non-negative and sum to 1");
  if (n_seeds < 1) throw SplitError("at least one split seed is required");
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& it : items) groups[it.submission_id].push_back(it.thread_id);
  if (groups.size() < 2)
    throw SplitError("need at least 2 submission groups to split, got " +
                     std::to_string(groups.size()));
  std::vector<std::string> keys;
  for (const auto& [k, _] : groups) keys.push_back(k);

  const auto g = static_cast<long>(keys.size());
  long n_test = std::lround(ratios.second * static_cast<double>(g));
  n_test = std::clamp(n_test, 1L, g - 1);

  std::vector<SplitPlan> plans;
  for (int s = 0; s < n_seeds; ++s) {
    SplitPlan plan;
    plan.split_name = ratio_name(ratios);
    plan.ratios = ratios;
    plan.seed = base_seed + static_cast<std::uint64_t>(s);
    std::vector<std::string> order = keys;
    Rng rng(plan.seed, "split");
    rng.shuffle(order.begin(), order.end());
    for (long k = 0; k < g; ++k) {
      const SplitPart part = k < n_test ? SplitPart::Test : SplitPart::Train;
      for (const auto& tid : groups[order[static_cast<std::size_t>(k)]])
        plan.assignment[tid] = part;
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::vector<SplitPlan> make_splits(const std::vector<Thread>& threads,
                                   std::pair<double, double> ratios, int n_seeds,
                                   std::uint64_t base_seed) {
  std::vector<SplitItem> items;
  for (const auto& t : threads) items.push_back({t.thread_id, t.submission_id});
  return make_splits(items, ratios, n_seeds, base_seed);
}

std::pair<double, double> parse_ratio(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw SplitError("ratio must look like 80:20");
  double a = 0, b = 0;
  auto pa = std::from_chars(spec.data(), spec.data() + colon, a);
  auto pb = std::from_chars(spec.data() + colon + 1, spec.data() + spec.size(), b);
  if (pa.ec != std::errc() || pb.ec != std::errc() || a < 0 || b < 0 || a + b <= 0)
    throw SplitError("bad ratio " + std::string(spec));
  return {a / (a + b), b / (a + b)};
}

std::string ratio_name(std::pair<double, double> ratios) {
  return std::to_string(std::lround(ratios.first * 100)) + ":" +
         std::to_string(std::lround(ratios.second * 100));
}

// --- IO -----------------------------------------------------------------------

namespace {

std::vector<CharRange> ranges_from_json(const json& j) {
  std::vector<CharRange> out;
  for (const auto& r : j) out.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
  return out;
}

json ranges_to_json(const std::vector<CharRange>& ranges) {
  json arr = json::array();
  for (const auto& r : ranges) arr.push_back({r.start, r.end});
  return arr;
}

template <typename F>
void for_each_record(std::istream& in, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IngestionError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains(kArtifactMetaKey)) continue;
    try {
      f(j);
    } catch (const json::exception& e) {
      throw IngestionError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::optional<std::string> optional_id(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (j.at(key).is_number()) return std::to_string(j.at(key).get<long long>());
  return j.at(key).get<std::string>();
}

}  // namespace

void fill_detected_ranges(std::vector<Post>& posts, const std::vector<bool>& has_quotes,
                          const std::vector<bool>& has_urls) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < posts.size(); ++i) by_id.emplace(posts[i].post_id, i);
  for (std::size_t i = 0; i < posts.size(); ++i) {
    auto& p = posts[i];
    if (!has_urls[i]) p.url_ranges = find_urls(p.body);
    if (!has_quotes[i] && p.parent_id) {
      auto it = by_id.find(*p.parent_id);
      if (it != by_id.end()) p.quote_ranges = detect_quotes(p.body, posts[it->second].body);
    }
  }
}

std::vector<Post> read_posts_jsonl(std::istream& in) {
  std::vector<Post> posts;
  std::vector<bool> has_quotes, has_urls;
  for_each_record(in, [&](const json& j) {
    Post p;
    p.post_id = *optional_id(j, "post_id");
    p.author_id = optional_id(j, "author_id").value_or("");
    p.parent_id = optional_id(j, "parent_id");
    p.body = j.at("body").get<std::string>();
    p.is_submission = j.contains("is_submission") ? j.at("is_submission").get<bool>()
                                                  : !p.parent_id.has_value();
    has_quotes.push_back(j.contains("quotes"));
    has_urls.push_back(j.contains("urls"));
    if (j.contains("quotes")) p.quote_ranges = ranges_from_json(j.at("quotes"));
    if (j.contains("urls")) p.url_ranges = ranges_from_json(j.at("urls"));
    posts.push_back(std::move(p));
  });
  fill_detected_ranges(posts, has_quotes, has_urls);
  return posts;
}

std::vector<Post> read_convokit_jsonl(std::istream& in) {
  std::vector<Post> posts;
  for_each_record(in, [&](const json& j) {
    Post p;
    p.post_id = *optional_id(j, "id");
    p.author_id = optional_id(j, "speaker").value_or("");
    p.parent_id = optional_id(j, "reply_to");
    p.body = j.value("text", std::string());
    p.is_submission = !p.parent_id.has_value();
    posts.push_back(std::move(p));
  });
  fill_detected_ranges(posts, std::vector<bool>(posts.size(), false),
                       std::vector<bool>(posts.size(), false));
  return posts;
}

void write_posts_jsonl(std::ostream& out, const std::vector<Post>& posts) {
  for (const auto& p : posts) {
    json j;
    j["post_id"] = p.post_id;
    if (p.parent_id) j["parent_id"] = *p.parent_id;
    j["author_id"] = p.author_id;
    j["body"] = p.body;
    j["quotes"] = ranges_to_json(p.quote_ranges);
    j["urls"] = ranges_to_json(p.url_ranges);
    j["is_submission"] = p.is_submission;
    out << j.dump() << '\n';
  }
}

json serialized_to_json(const SerializedThread& st) {
  json j;
  j["thread_id"] = st.thread_id;
  j["submission_id"] = st.submission_id;
  j["tokens"] = st.tokens;
  json flags = json::array();
  for (auto f : st.flags) flags.push_back(flag_name(f));
  j["flags"] = flags;
  json align = json::array();
  for (const auto& a : st.alignment) {
    if (a) align.push_back({a->post_index, a->start, a->end});
    else align.push_back(nullptr);
  }
  j["alignment"] = align;
  json global = json::array();
  for (bool g : st.global_attention) global.push_back(g ? 1 : 0);
  j["global"] = global;
  j["post_users"] = st.post_users;
  j["post_starts"] = st.post_starts;
  j["post_covered"] = st.post_covered;
  return j;
}

SerializedThread serialized_from_json(const json& j) {
  SerializedThread st;
  st.thread_id = j.at("thread_id").get<std::string>();
  st.submission_id = j.value("submission_id", std::string());
  st.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& f : j.at("flags")) st.flags.push_back(parse_flag(f.get<std::string>()));
  for (const auto& a : j.at("alignment")) {
    if (a.is_null()) st.alignment.push_back(std::nullopt);
    else
      st.alignment.push_back(TokenAlignment{a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>(),
                                            a.at(2).get<std::size_t>()});
  }
  for (const auto& g : j.at("global")) st.global_attention.push_back(g.get<int>() != 0);
  st.post_users = j.at("post_users").get<std::vector<int>>();
  st.post_starts = j.at("post_starts").get<std::vector<std::size_t>>();
  st.post_covered = j.value("post_covered", std::vector<std::size_t>(st.post_starts.size(), 0));
  const auto n = st.tokens.size();
  if (st.flags.size() != n || st.alignment.size() != n || st.global_attention.size() != n)
    throw InputError("serialized thread " + st.thread_id + ": per-token arrays disagree in length");
  return st;
}

void write_serialized_jsonl(std::ostream& out, const SerializedThread& st) {
  out << serialized_to_json(st).dump() << '\n';
}

std::vector<SerializedThread> read_serialized_jsonl(std::istream& in) {
  std::vector<SerializedThread> out;
  for_each_record(in, [&](const json& j) { out.push_back(serialized_from_json(j)); });
  return out;
}

void write_split_jsonl(std::ostream& out, const SplitPlan& plan) {
  json j;
  j["split_name"] = plan.split_name;
  j["ratios"] = {plan.ratios.first, plan.ratios.second};
  j["seed"] = plan.seed;
  json a = json::object();
  for (const auto& [id, part] : plan.assignment) a[id] = part == SplitPart::Train ? "train" : "test";
  j["assignment"] = a;
  out << j.dump() << '\n';
}

std::vector<SplitPlan> read_splits_jsonl(std::istream& in) {
  std::vector<SplitPlan> out;
  for_each_record(in, [&](const json& j) {
    SplitPlan p;
    p.split_name = j.at("split_name").get<std::string>();
    if (j.contains("ratios")) p.ratios = {j["ratios"].at(0).get<double>(), j["ratios"].at(1).get<double>()};
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, part] : j.at("assignment").items()) {
      const auto s = part.get<std::string>();
      if (s != "train" && s != "test") throw SplitError("unknown split part " + s);
      p.assignment[id] = s == "train" ? SplitPart::Train : SplitPart::Test;
    }
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace argmine
