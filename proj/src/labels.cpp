#include "argmine/labels.hpp"

#include <algorithm>
#include <istream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "argmine/errors.hpp"
#include "json_io.hpp"

namespace argmine {

using nlohmann::json;

namespace {

std::string normalize_type(std::string_view s) {
  std::string out = to_lower(s);
  std::replace(out.begin(), out.end(), '_', ' ');
  const auto b = out.find_first_not_of(' ');
  const auto e = out.find_last_not_of(' ');
  return b == std::string::npos ? std::string() : out.substr(b, e - b + 1);
}

struct FineMapping {
  std::vector<std::pair<std::string, std::string>> entries;  // fine -> coarse
};

const FineMapping& fine_mapping(SchemaKind kind) {
  static const FineMapping cmv{{
      {"continue", "support"},
      {"support", "support"},
      {"agreement", "agreement"},
      {"understand", "agreement"},
      {"attack", "direct attack"},
      {"rebuttal attack", "direct attack"},
      {"rebuttal", "direct attack"},
      {"disagreement", "direct attack"},
      {"undercutter", "undercutter attack"},
      {"undercutter attack", "undercutter attack"},
      {"partial agreement", "partial"},
      {"partial attack", "partial"},
      {"partial disagreement", "partial"},
  }};
  static const FineMapping dr{{
      {"support", "support"},
      {"supports", "support"},
      {"contradicts", "contradicts"},
      {"semantically same", "semantically same"},
      {"parts-of-same", "semantically same"},
      {"parts of same", "semantically same"},
  }};
  return kind == SchemaKind::Cmv ? cmv : dr;
}

}  // namespace

LabelSchema::LabelSchema(SchemaKind kind, std::string name, std::vector<std::string> ctypes,
                         std::vector<std::string> short_names, std::vector<std::string> classes)
    : kind_(kind),
      name_(std::move(name)),
      ctypes_(std::move(ctypes)),
      short_names_(std::move(short_names)),
      classes_(std::move(classes)) {}

const LabelSchema& LabelSchema::cmv() {
  static const LabelSchema s(SchemaKind::Cmv, "cmv", {"claim", "premise"}, {"C", "P"},
                             {"support", "agreement", "direct attack", "undercutter attack",
                              "partial"});
  return s;
}

const LabelSchema& LabelSchema::dr_inventor() {
  static const LabelSchema s(SchemaKind::DrInventor, "drinventor", {"BC", "OC", "Data"},
                             {"BC", "OC", "D"}, {"support", "contradicts", "semantically same"});
  return s;
}

const LabelSchema& LabelSchema::by_name(std::string_view name) {
  const std::string n = to_lower(name);
  if (n == "cmv" || n == "cmv-modes") return cmv();
  if (n == "drinventor" || n == "dr-inventor" || n == "dr_inventor") return dr_inventor();
  throw SchemaError("unknown schema '" + std::string(name) + "' (expected cmv|drinventor)");
}

int LabelSchema::ctype_index(std::string_view ctype) const {
  const std::string lower = to_lower(ctype);
  for (std::size_t i = 0; i < ctypes_.size(); ++i)
    if (to_lower(ctypes_[i]) == lower) return static_cast<int>(i);
  throw SchemaError("component type '" + std::string(ctype) + "' not in schema " + name_);
}

std::string LabelSchema::label_name(int label) const {
  if (label == 0) return "O";
  if (label < 0 || label >= num_labels()) throw SchemaError("label id out of range");
  return std::string(is_begin(label) ? "B-" : "I-") + ctypes_[type_of(label)];
}

std::string LabelSchema::short_label_name(int label) const {
  if (label == 0) return "O";
  return std::string(is_begin(label) ? "B-" : "I-") + short_names_.at(type_of(label));
}

int LabelSchema::parse_label(std::string_view name) const {
  if (name == "O") return 0;
  if (name.size() > 2 && (name.starts_with("B-") || name.starts_with("I-"))) {
    const int t = ctype_index(name.substr(2));
    return name[0] == 'B' ? begin_of(t) : inside_of(t);
  }
  throw SchemaError("bad BIO label '" + std::string(name) + "'");
}

int LabelSchema::class_index(std::string_view coarse_class) const {
  const std::string n = normalize_type(coarse_class);
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i] == n) return static_cast<int>(i);
  throw SchemaError("relation class '" + std::string(coarse_class) + "' not in schema " + name_);
}

std::vector<std::string> LabelSchema::fine_types() const {
  std::vector<std::string> out;
  for (const auto& [fine, _] : fine_mapping(kind_).entries) out.push_back(fine);
  return out;
}

int group_relation(std::string_view fine_type, const LabelSchema& schema) {
  const std::string n = normalize_type(fine_type);
  for (const auto& [fine, coarse] : fine_mapping(schema.kind()).entries)
    if (fine == n) return schema.class_index(coarse);
  std::string valid;
  for (const auto& f : schema.fine_types()) valid += (valid.empty() ? "" : ", ") + f;
  throw MappingError("unknown relation type '" + std::string(fine_type) + "' for schema " +
                     schema.name() + "; valid types: " + valid);
}

// --- BIO ----------------------------------------------------------------------

bool is_valid_bio(const BioSequence& seq, const LabelSchema& schema) {
  int prev = 0;
  for (int label : seq) {
    if (label < 0 || label >= schema.num_labels()) return false;
    if (LabelSchema::is_inside(label) && (prev == 0 || LabelSchema::type_of(prev) !=
                                                           LabelSchema::type_of(label)))
      return false;
    prev = label;
  }
  return true;
}

BioSequence repair_bio(const BioSequence& seq) {
  BioSequence out = seq;
  int prev = 0;
  for (int& label : out) {
    if (LabelSchema::is_inside(label) &&
        (prev == 0 || LabelSchema::type_of(prev) != LabelSchema::type_of(label)))
      label = LabelSchema::begin_of(LabelSchema::type_of(label));
    prev = label;
  }
  return out;
}

std::vector<LabeledSpan> bio_to_spans(const BioSequence& seq) {
  std::vector<LabeledSpan> spans;
  const BioSequence fixed = repair_bio(seq);
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (LabelSchema::is_begin(fixed[i])) {
      spans.push_back({i, i + 1, LabelSchema::type_of(fixed[i])});
    } else if (LabelSchema::is_inside(fixed[i])) {
      spans.back().end = i + 1;
    }
  }
  return spans;
}

BioSequence spans_to_bio(const std::vector<LabeledSpan>& spans, std::size_t length) {
  BioSequence out(length, 0);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw ContractError("span out of range");
    out[s.start] = LabelSchema::begin_of(s.ctype);
    for (std::size_t i = s.start + 1; i < s.end; ++i) out[i] = LabelSchema::inside_of(s.ctype);
  }
  return out;
}

// --- alignment ------------------------------------------------------------------

AlignmentResult align_annotations(const SerializedThread& st,
                                  const std::vector<CharAnnotation>& annotations,
                                  const LabelSchema& schema) {
  AlignmentResult result;
  result.bio.assign(st.size(), 0);
  for (const auto& ann : annotations) {
    if (ann.ctype < 0 || ann.ctype >= schema.num_types())
      throw SchemaError("component " + ann.component_id + " has an invalid type index");
    if (ann.start >= ann.end)
      throw AnnotationError("component " + ann.component_id + " has an empty range");
    if (ann.post_index >= st.post_starts.size() || ann.end > st.post_covered[ann.post_index]) {
      result.dropped.push_back(ann.component_id);
      continue;
    }
    const std::size_t begin = st.post_starts[ann.post_index];
    const std::size_t end = ann.post_index + 1 < st.post_starts.size()
                                ? st.post_starts[ann.post_index + 1]
                                : st.size();
    std::optional<std::size_t> first, last;
    std::size_t content_first = 0, content_last = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& al = st.alignment[i];
      if (!al) continue;
      const std::size_t cs =
          st.flags[i] == SpecialFlag::Url ? al->start : al->start + leading_space(st.tokens[i]);
      if (cs >= al->end) continue;  // whitespace-only token
      if (cs < ann.end && al->end > ann.start) {
        if (!first) {
          first = i;
          content_first = cs;
        }
        last = i;
        content_last = al->end;
      }
    }
    if (!first) {
      result.warnings.push_back("component " + ann.component_id + " covers no token; dropped");
      result.dropped.push_back(ann.component_id);
      continue;
    }
    if (content_first != ann.start || content_last != ann.end) {
      bool touches_special = false;
      for (std::size_t i = *first; i <= *last; ++i)
        if (st.flags[i] != SpecialFlag::None) touches_special = true;
      result.warnings.push_back("component " + ann.component_id + " [" +
                                std::to_string(ann.start) + "," + std::to_string(ann.end) +
                                ") snapped to token boundaries [" + std::to_string(content_first) +
                                "," + std::to_string(content_last) + ")" +
                                (touches_special ? " across a special token" : ""));
    }
    result.spans.push_back({ann.component_id, st.thread_id, *first, *last + 1, ann.ctype});
  }
  std::vector<std::size_t> order(result.spans.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.spans[a].token_start < result.spans[b].token_start;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& a = result.spans[order[k - 1]];
    const auto& b = result.spans[order[k]];
    if (b.token_start < a.token_end)
      throw AnnotationError("components " + a.component_id + " and " + b.component_id +
                            " overlap in thread " + st.thread_id);
  }
  for (const auto& s : result.spans) {
    result.bio[s.token_start] = LabelSchema::begin_of(s.ctype);
    for (std::size_t i = s.token_start + 1; i < s.token_end; ++i)
      result.bio[i] = LabelSchema::inside_of(s.ctype);
  }
  return result;
}

SplitComponents split_discontiguous(const RawComponent& component, const LabelSchema& schema) {
  SplitComponents out;
  const std::string link_type = schema.kind() == SchemaKind::Cmv ? "continue" : "parts-of-same";
  for (std::size_t k = 0; k < component.ranges.size(); ++k) {
    const auto& r = component.ranges[k];
    const std::string id =
        k == 0 ? component.component_id : component.component_id + "#" + std::to_string(k);
    out.pieces.push_back({id, r.post_index, r.start, r.end, component.ctype});
    if (k > 0)
      out.links.push_back(
          {id, out.pieces[k - 1].component_id, link_type, group_relation(link_type, schema)});
  }
  return out;
}

const ComponentSpan* LabeledThread::component(std::string_view id) const {
  for (const auto& c : components)
    if (c.component_id == id) return &c;
  return nullptr;
}

// --- annotation records ------------------------------------------------------------

Annotations read_annotations_jsonl(std::istream& in) {
  Annotations ann;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains(kArtifactMetaKey)) continue;
      if (j.contains("component_id")) {
        ann.ranges.push_back({j.at("component_id").get<std::string>(),
                              j.at("post_id").get<std::string>(),
                              j.at("char_start").get<std::size_t>(),
                              j.at("char_end").get<std::size_t>(), j.at("ctype").get<std::string>()});
      } else {
        ann.relations.push_back({j.at("source_id").get<std::string>(),
                                 j.at("target_id").get<std::string>(),
                                 j.at("fine_type").get<std::string>()});
      }
    } catch (const json::exception& e) {
      throw IngestionError("annotation line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ann;
}

void write_annotations_jsonl(std::ostream& out, const Annotations& ann) {
  for (const auto& r : ann.ranges) {
    json j{{"component_id", r.component_id}, {"post_id", r.post_id}, {"char_start", r.start},
           {"char_end", r.end}, {"ctype", r.ctype}};
    out << j.dump() << '\n';
  }
  for (const auto& r : ann.relations) {
    json j{{"source_id", r.source_id}, {"target_id", r.target_id}, {"fine_type", r.fine_type}};
    out << j.dump() << '\n';
  }
}

LabeledThread label_thread(const Thread& thread, const Annotations& ann,
                           const LabelSchema& schema, const SerializeOptions& opts,
                           std::vector<std::string>* warnings) {
  LabeledThread lt;
  lt.st = serialize_thread(thread, opts);
  lt.schema = schema.name();
  std::unordered_map<std::string, std::size_t> post_pos;
  for (std::size_t i = 0; i < thread.posts.size(); ++i) post_pos.emplace(thread.posts[i].post_id, i);

  std::vector<std::string> order;
  std::map<std::string, RawComponent> raw;
  for (const auto& r : ann.ranges) {
    auto it = post_pos.find(r.post_id);
    if (it == post_pos.end()) continue;
    auto [slot, inserted] = raw.try_emplace(r.component_id);
    if (inserted) {
      order.push_back(r.component_id);
      slot->second.component_id = r.component_id;
      slot->second.ctype = schema.ctype_index(r.ctype);
    }
    slot->second.ranges.push_back({it->second, r.start, r.end});
  }
  std::vector<CharAnnotation> pieces;
  std::vector<RelationEdge> links;
  for (const auto& id : order) {
    auto& rc = raw[id];
    std::sort(rc.ranges.begin(), rc.ranges.end(), [](const PostRange& a, const PostRange& b) {
      return std::tie(a.post_index, a.start) < std::tie(b.post_index, b.start);
    });
    auto split = split_discontiguous(rc, schema);
    pieces.insert(pieces.end(), split.pieces.begin(), split.pieces.end());
    links.insert(links.end(), split.links.begin(), split.links.end());
  }
  auto aligned = align_annotations(lt.st, pieces, schema);
  if (warnings) warnings->insert(warnings->end(), aligned.warnings.begin(), aligned.warnings.end());
  lt.components = std::move(aligned.spans);
  lt.bio = std::move(aligned.bio);

  std::set<std::string> alive;
  for (const auto& c : lt.components) alive.insert(c.component_id);
  for (auto& e : links)
    if (alive.contains(e.source_id) && alive.contains(e.target_id)) lt.relations.push_back(e);
  for (const auto& r : ann.relations) {
    const int coarse = group_relation(r.fine_type, schema);
    if (alive.contains(r.source_id) && alive.contains(r.target_id))
      lt.relations.push_back({r.source_id, r.target_id, r.fine_type, coarse});
  }
  return lt;
}

void write_labeled_jsonl(std::ostream& out, const LabeledThread& lt) {
  const LabelSchema& schema = LabelSchema::by_name(lt.schema);
  json j = serialized_to_json(lt.st);
  j["schema"] = lt.schema;
  json labels = json::array();
  for (int l : lt.bio) labels.push_back(schema.label_name(l));
  j["labels"] = labels;
  json comps = json::array();
  for (const auto& c : lt.components)
    comps.push_back({{"id", c.component_id}, {"start", c.token_start}, {"end", c.token_end},
                     {"ctype", schema.ctypes()[c.ctype]}});
  j["components"] = comps;
  json rels = json::array();
  for (const auto& r : lt.relations)
    rels.push_back({{"source", r.source_id}, {"target", r.target_id}, {"fine_type", r.fine_type},
                    {"coarse", schema.relation_classes()[r.coarse_class]}});
  j["relations"] = rels;
  out << j.dump() << '\n';
}

std::vector<LabeledThread> read_labeled_jsonl(std::istream& in) {
  std::vector<LabeledThread> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains(kArtifactMetaKey)) continue;
      LabeledThread lt;
      lt.st = serialized_from_json(j);
      lt.schema = j.value("schema", std::string("cmv"));
      const LabelSchema& schema = LabelSchema::by_name(lt.schema);
      if (j.contains("labels")) {
        for (const auto& l : j.at("labels")) lt.bio.push_back(schema.parse_label(l.get<std::string>()));
      } else {
        lt.bio.assign(lt.st.size(), 0);
      }
      if (lt.bio.size() != lt.st.size())
        throw InputError("thread " + lt.st.thread_id + ": label count differs from token count");
      for (const auto& c : j.value("components", json::array()))
        lt.components.push_back({c.at("id").get<std::string>(), lt.st.thread_id,
                                 c.at("start").get<std::size_t>(), c.at("end").get<std::size_t>(),
                                 schema.ctype_index(c.at("ctype").get<std::string>())});
      for (const auto& r : j.value("relations", json::array()))
        lt.relations.push_back({r.at("source").get<std::string>(), r.at("target").get<std::string>(),
                                r.at("fine_type").get<std::string>(),
                                schema.class_index(r.at("coarse").get<std::string>())});
      out.push_back(std::move(lt));
    } catch (const json::exception& e) {
      throw IngestionError("labeled thread line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// --- corpus adapters -------------------------------------------------------------------

namespace {

std::map<std::string, std::string> parse_attributes(std::string_view tag) {
  std::map<std::string, std::string> attrs;
  std::size_t i = 0;
  while (i < tag.size() && !is_space_byte(static_cast<unsigned char>(tag[i]))) ++i;
  while (i < tag.size()) {
    while (i < tag.size() && is_space_byte(static_cast<unsigned char>(tag[i]))) ++i;
    const std::size_t ks = i;
    while (i < tag.size() && tag[i] != '=' && !is_space_byte(static_cast<unsigned char>(tag[i]))) ++i;
    std::string key = to_lower(tag.substr(ks, i - ks));
    if (i >= tag.size() || tag[i] != '=') {
      if (!key.empty() && key != "/") attrs[key] = "";
      ++i;
      continue;
    }
    ++i;
    std::string value;
    if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) {
      const char q = tag[i++];
      const std::size_t vs = i;
      while (i < tag.size() && tag[i] != q) ++i;
      value = std::string(tag.substr(vs, i - vs));
      ++i;
    } else {
      const std::size_t vs = i;
      while (i < tag.size() && !is_space_byte(static_cast<unsigned char>(tag[i]))) ++i;
      value = std::string(tag.substr(vs, i - vs));
    }
    attrs[key] = value;
  }
  return attrs;
}

std::vector<std::string> split_on(std::string_view s, std::string_view seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string_view::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

ParsedCorpus read_cmv_modes(std::istream& in, std::string_view fallback_id) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  ParsedCorpus out;
  struct OpenComponent {
    std::string id, ctype, ref, rel;
    std::size_t start;
  };
  std::string thread_id(fallback_id);
  std::optional<Post> post;
  std::vector<OpenComponent> open;
  std::optional<std::size_t> quote_start;
  std::size_t reply_count = 0;
  bool in_title = false;
  std::optional<std::string> prev_post_id;

  auto local = [&](const std::string& id) { return thread_id + "/" + id; };
  auto finish_post = [&]() {
    if (!post) return;
    post->url_ranges = find_urls(post->body);
    out.posts.push_back(std::move(*post));
    prev_post_id = out.posts.back().post_id;
    post.reset();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      const std::size_t close = text.find('>', i);
      if (close == std::string::npos) throw IngestionError("unterminated tag in CMV-Modes input");
      std::string_view tag(text.data() + i + 1, close - i - 1);
      i = close + 1;
      const bool closing = !tag.empty() && tag.front() == '/';
      if (closing) tag.remove_prefix(1);
      std::size_t ne = 0;
      while (ne < tag.size() && !is_space_byte(static_cast<unsigned char>(tag[ne])) && tag[ne] != '/') ++ne;
      const std::string name = to_lower(tag.substr(0, ne));
      const auto attrs = parse_attributes(tag);
      auto attr = [&](const char* k, std::string fallback = {}) {
        auto it = attrs.find(k);
        return it == attrs.end() ? fallback : it->second;
      };
      if (name == "thread") {
        if (!closing) {
          thread_id = attr("id", std::string(fallback_id));
          reply_count = 0;
          prev_post_id.reset();
        } else {
          finish_post();
        }
      } else if (name == "title") {
        in_title = !closing;
      } else if (name == "op" || name == "reply") {
        if (closing) {
          finish_post();
          continue;
        }
        finish_post();
        Post p;
        if (name == "op") {
          p.post_id = thread_id;
          p.is_submission = true;
        } else {
          p.post_id = attr("id", thread_id + "/r" + std::to_string(++reply_count));
          if (!prev_post_id) throw IngestionError("reply before OP in thread " + thread_id);
          p.parent_id = *prev_post_id;
        }
        p.author_id = attr("author", "unknown");
        post = std::move(p);
      } else if (name == "claim" || name == "premise") {
        if (!post) continue;
        if (!closing) {
          open.push_back({local(attr("id")), name, attr("ref"), attr("rel"), post->body.size()});
        } else {
          if (open.empty()) throw IngestionError("unbalanced </" + name + "> in thread " + thread_id);
          OpenComponent oc = open.back();
          open.pop_back();
          out.annotations.ranges.push_back({oc.id, post->post_id, oc.start, post->body.size(), oc.ctype});
          const auto refs = split_on(oc.ref, " ,_");
          if (!refs.empty() && !oc.rel.empty()) {
            auto rels = split_on(oc.rel, "_");
            if (rels.size() != refs.size()) rels.assign(refs.size(), oc.rel);
            for (std::size_t k = 0; k < refs.size(); ++k)
              out.annotations.relations.push_back({oc.id, local(refs[k]), rels[k]});
          }
        }
      } else if (name == "quote") {
        if (!post) continue;
        if (!closing) {
          quote_start = post->body.size();
        } else if (quote_start) {
          if (post->body.size() > *quote_start)
            post->quote_ranges.push_back({*quote_start, post->body.size()});
          quote_start.reset();
        }
      }
      continue;
    }
    if (!post || in_title) {
      ++i;
      continue;
    }
    if (text[i] == '&') {
      static const std::pair<std::string_view, char> entities[] = {
          {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
      bool decoded = false;
      for (const auto& [ent, ch] : entities) {
        if (std::string_view(text).substr(i, ent.size()) == ent) {
          post->body += ch;
          i += ent.size();
          decoded = true;
          break;
        }
      }
      if (decoded) continue;
    }
    post->body += text[i++];
  }
  finish_post();
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> merge_sections(
    const std::vector<std::size_t>& lengths, std::size_t budget) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t begin = 0, total = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (i > begin && total + lengths[i] > budget) {
      groups.push_back({begin, i});
      begin = i;
      total = 0;
    }
    total += lengths[i];
  }
  if (begin < lengths.size()) groups.push_back({begin, lengths.size()});
  return groups;
}

ParsedCorpus read_dr_inventor(std::string_view text, std::istream& ann, std::string_view doc_id,
                              std::size_t token_budget, const TokenizerConfig& tokenizer) {
  // Sections: maximal spans ending after a blank-line separator.
  std::vector<std::pair<std::size_t, std::size_t>> sections;
  std::size_t s = 0;
  while (s < text.size()) {
    std::size_t sep = text.find("\n\n", s);
    std::size_t e = sep == std::string_view::npos ? text.size() : sep;
    while (e < text.size() && text[e] == '\n') ++e;
    sections.push_back({s, e});
    s = e;
  }
  const Tokenizer tok(tokenizer);
  std::vector<std::size_t> lengths;
  for (const auto& [a, b] : sections) lengths.push_back(tok.tokenize(text.substr(a, b - a)).size());
  // One slot per chunk goes to the leading [USER-0] token.
  const auto groups = merge_sections(lengths, token_budget > 0 ? token_budget - 1 : 0);

  ParsedCorpus out;
  std::vector<std::pair<std::size_t, std::size_t>> chunk_bytes;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t a = sections[groups[g].first].first;
    const std::size_t b = sections[groups[g].second - 1].second;
    Post p;
    p.post_id = std::string(doc_id) + "#" + std::to_string(g);
    p.author_id = std::string(doc_id);
    p.is_submission = true;
    p.body = std::string(text.substr(a, b - a));
    p.url_ranges = find_urls(p.body);
    out.posts.push_back(std::move(p));
    chunk_bytes.push_back({a, b});
  }

  static const std::map<std::string, std::string> entity_types = {
      {"background_claim", "BC"}, {"own_claim", "OC"}, {"data", "Data"}};
  std::string line;
  while (std::getline(ann, line)) {
    if (line.empty()) continue;
    const auto fields = split_on(line, "\t");
    if (fields.size() < 2) continue;
    const std::string& id = fields[0];
    const std::string local_id = std::string(doc_id) + "/" + id;
    if (id[0] == 'T') {
      const auto head = split_on(fields[1], " ");
      if (head.empty()) continue;
      auto et = entity_types.find(to_lower(head[0]));
      if (et == entity_types.end()) continue;
      const auto pieces = split_on(fields[1].substr(head[0].size()), ";");
      for (const auto& piece : pieces) {
        const auto nums = split_on(piece, " ");
        if (nums.size() != 2) throw IngestionError("bad brat span in " + line);
        const std::size_t a = std::stoul(nums[0]), b = std::stoul(nums[1]);
        for (std::size_t c = 0; c < chunk_bytes.size(); ++c) {
          const auto [ca, cb] = chunk_bytes[c];
          if (a >= ca && a < cb) {
            out.annotations.ranges.push_back(
                {local_id, out.posts[c].post_id, a - ca, std::min(b, cb) - ca, et->second});
            break;
          }
        }
      }
    } else if (id[0] == 'R') {
      const auto parts = split_on(fields[1], " ");
      if (parts.size() < 3) continue;
      auto arg = [&](const std::string& p) {
        const auto colon = p.find(':');
        return std::string(doc_id) + "/" + p.substr(colon + 1);
      };
      std::string type = to_lower(parts[0]);
      if (type == "parts_of_same") type = "parts-of-same";
      out.annotations.relations.push_back({arg(parts[1]), arg(parts[2]), type});
    }
  }
  return out;
}

// --- statistics ---------------------------------------------------------------------------

DatasetStats dataset_stats(const std::vector<LabeledThread>& threads, const LabelSchema& schema) {
  DatasetStats stats;
  stats.schema = schema.name();
  std::vector<std::size_t> label_counts(schema.num_labels(), 0);
  std::vector<std::size_t> class_counts(schema.num_classes(), 0);
  for (const auto& lt : threads) {
    for (int l : lt.bio) ++label_counts.at(l);
    for (const auto& r : lt.relations) ++class_counts.at(r.coarse_class);
    stats.components += lt.components.size();
  }
  stats.threads = threads.size();
  for (int l = 0; l < schema.num_labels(); ++l)
    stats.label_tokens.push_back({schema.short_label_name(l), label_counts[l]});
  for (int c = 0; c < schema.num_classes(); ++c)
    stats.relation_counts.push_back({schema.relation_classes()[c], class_counts[c]});
  return stats;
}

void write_stats_table(std::ostream& out, const DatasetStats& stats) {
  out << std::left << std::setw(22) << "Component Type" << "# Tokens\n";
  for (const auto& [name, n] : stats.label_tokens) out << std::setw(22) << name << n << '\n';
  out << std::setw(22) << "Relation Types" << "# of relations\n";
  for (const auto& [name, n] : stats.relation_counts) out << std::setw(22) << name << n << '\n';
}

}  // namespace argmine
