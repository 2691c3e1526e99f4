#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "argmine/corpus.hpp"

namespace argmine {

enum class SchemaKind : std::uint8_t { Cmv, DrInventor };

/// Component types, BIO label inventory and relation classes of one
/// annotation scheme. Label ids: 0 = O, 1 + 2c = B-c, 2 + 2c = I-c.
class LabelSchema {
 public:
  static const LabelSchema& cmv();
  static const LabelSchema& dr_inventor();
  static const LabelSchema& by_name(std::string_view name);

  SchemaKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& ctypes() const { return ctypes_; }
  const std::vector<std::string>& relation_classes() const { return classes_; }

  int num_types() const { return static_cast<int>(ctypes_.size()); }
  int num_labels() const { return 1 + 2 * num_types(); }
  int num_classes() const { return static_cast<int>(classes_.size()); }

  static constexpr int outside() { return 0; }
  static constexpr int begin_of(int ctype) { return 1 + 2 * ctype; }
  static constexpr int inside_of(int ctype) { return 2 + 2 * ctype; }
  static constexpr bool is_begin(int label) { return label > 0 && label % 2 == 1; }
  static constexpr bool is_inside(int label) { return label > 0 && label % 2 == 0; }
  /// Component type of a B/I label, -1 for O.
  static constexpr int type_of(int label) { return label == 0 ? -1 : (label - 1) / 2; }

  int ctype_index(std::string_view ctype) const;
  std::string label_name(int label) const;
  /// Abbreviated label names used in statistics tables (B-C, I-P, B-D ...).
  std::string short_label_name(int label) const;
  int parse_label(std::string_view name) const;
  int class_index(std::string_view coarse_class) const;

  /// Annotated fine relation types accepted by group_relation.
  std::vector<std::string> fine_types() const;

 private:
  LabelSchema(SchemaKind kind, std::string name, std::vector<std::string> ctypes,
              std::vector<std::string> short_names, std::vector<std::string> classes);

  SchemaKind kind_;
  std::string name_;
  std::vector<std::string> ctypes_;
  std::vector<std::string> short_names_;
  std::vector<std::string> classes_;
};

using BioSequence = std::vector<int>;

struct LabeledSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  int ctype = 0;
  auto operator<=>(const LabeledSpan&) const = default;
};

bool is_valid_bio(const BioSequence& seq, const LabelSchema& schema);
/// Promotes every I-x that does not continue an x span to B-x. Idempotent.
BioSequence repair_bio(const BioSequence& seq);
/// Spans of a BIO sequence; an I-x that does not continue an x span opens a new span.
std::vector<LabeledSpan> bio_to_spans(const BioSequence& seq);
BioSequence spans_to_bio(const std::vector<LabeledSpan>& spans, std::size_t length);

struct ComponentSpan {
  std::string component_id;
  std::string thread_id;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  int ctype = 0;
};

/// One contiguous annotated byte range inside one post.
struct CharAnnotation {
  std::string component_id;
  std::size_t post_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  int ctype = 0;
};

struct AlignmentResult {
  std::vector<ComponentSpan> spans;
  BioSequence bio;
  std::vector<std::string> warnings;
  std::vector<std::string> dropped;  // component ids cut by truncation
};

/// Maps byte-level annotations to the smallest covering token spans and
/// projects them to BIO. Throws AnnotationError when two components overlap.
AlignmentResult align_annotations(const SerializedThread& st,
                                  const std::vector<CharAnnotation>& annotations,
                                  const LabelSchema& schema);

struct RelationEdge {
  std::string source_id;  // the referring component
  std::string target_id;
  std::string fine_type;
  int coarse_class = 0;
};

/// Coarse relation class index for an annotated fine type. Throws
/// MappingError listing the valid types when the fine type is unknown.
int group_relation(std::string_view fine_type, const LabelSchema& schema);

struct PostRange {
  std::size_t post_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

/// An annotated component that may consist of several ranges.
struct RawComponent {
  std::string component_id;
  std::vector<PostRange> ranges;  // in reading order
  int ctype = 0;
};

struct SplitComponents {
  std::vector<CharAnnotation> pieces;
  std::vector<RelationEdge> links;
};

/// One component per contiguous range. The first piece keeps the original
/// id, later pieces get "<id>#k" and point at their predecessor through a
/// "continue" (CMV) or "parts-of-same" (Dr. Inventor) edge.
SplitComponents split_discontiguous(const RawComponent& component, const LabelSchema& schema);

/// A serialized thread together with its token-level supervision.
struct LabeledThread {
  SerializedThread st;
  std::string schema;
  std::vector<ComponentSpan> components;
  BioSequence bio;
  std::vector<RelationEdge> relations;

  const ComponentSpan* component(std::string_view id) const;
};

/// Standoff annotations: component records {component_id, post_id,
/// char_start, char_end, ctype} (repeated ids form discontiguous
/// components) and relation records {source_id, target_id, fine_type}.
struct Annotations {
  struct Range {
    std::string component_id;
    std::string post_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string ctype;
  };
  struct Relation {
    std::string source_id;
    std::string target_id;
    std::string fine_type;
  };
  std::vector<Range> ranges;
  std::vector<Relation> relations;
};

Annotations read_annotations_jsonl(std::istream& in);
void write_annotations_jsonl(std::ostream& out, const Annotations& ann);

/// Serializes and labels one thread: splits discontiguous components,
/// aligns them, drops components cut by truncation and keeps relations
/// whose endpoints both survive.
LabeledThread label_thread(const Thread& thread, const Annotations& ann,
                           const LabelSchema& schema, const SerializeOptions& opts,
                           std::vector<std::string>* warnings = nullptr);

void write_labeled_jsonl(std::ostream& out, const LabeledThread& lt);
std::vector<LabeledThread> read_labeled_jsonl(std::istream& in);

/// Corpus in the CMV-Modes inline markup: <thread>, <OP author=..>,
/// <reply id=.. author=..>, <claim id=.. >, <premise id=.. ref=.. rel=..>,
/// <quote>. Replies form one chain under the OP.
struct ParsedCorpus {
  std::vector<Post> posts;
  Annotations annotations;
};
ParsedCorpus read_cmv_modes(std::istream& in, std::string_view fallback_id = "thread");

/// Dr. Inventor brat standoff (.txt + .ann). Sections (blank-line separated
/// paragraphs) are merged greedily into chunks of at most `token_budget`
/// tokens; each chunk becomes a single-post thread.
ParsedCorpus read_dr_inventor(std::string_view text, std::istream& ann, std::string_view doc_id,
                              std::size_t token_budget, const TokenizerConfig& tokenizer = {});

/// Greedy concatenation of consecutive items while the running total stays
/// within budget. Returns [begin, end) index groups.
std::vector<std::pair<std::size_t, std::size_t>> merge_sections(
    const std::vector<std::size_t>& lengths, std::size_t budget);

struct DatasetStats {
  std::string schema;
  std::vector<std::pair<std::string, std::size_t>> label_tokens;    // short name -> count
  std::vector<std::pair<std::string, std::size_t>> relation_counts;  // class -> count
  std::size_t threads = 0;
  std::size_t components = 0;
};

DatasetStats dataset_stats(const std::vector<LabeledThread>& threads, const LabelSchema& schema);
void write_stats_table(std::ostream& out, const DatasetStats& stats);

}  // namespace argmine
