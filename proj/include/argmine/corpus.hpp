#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "argmine/text.hpp"

namespace argmine {

struct Post {
  std::string post_id;
  std::string author_id;
  std::optional<std::string> parent_id;
  std::string body;
  std::vector<CharRange> quote_ranges;  // text quoted from the parent post
  std::vector<CharRange> url_ranges;
  bool is_submission = false;
};

/// Checks the per-post invariants; throws IngestionError on violation.
void validate_post(const Post& post);

/// A root-to-leaf path through a discussion tree.
struct Thread {
  std::string thread_id;
  std::vector<Post> posts;
  std::map<std::string, int> user_index;  // author -> index by first appearance
  std::string submission_id;

  int user_of(std::size_t post_index) const;
};

/// Builds a Thread from an already ordered path, assigning user indices.
Thread make_thread(std::string thread_id, std::vector<Post> path);

/// One Thread per root-to-leaf path of every tree in the forest, in input
/// order of roots and children. Throws IngestionError on orphans, duplicate
/// ids or a submission flag that disagrees with the parent link, and
/// StructuralError when parent links form a cycle.
std::vector<Thread> extract_threads(const std::vector<Post>& forest);

/// Streaming variant of extract_threads for very large forests.
std::size_t visit_threads(const std::vector<Post>& forest,
                          const std::function<void(const Thread&)>& visit);

/// Longest-first exact substring matches of `parent` inside `body`, snapped
/// to word boundaries and at least `min_chars` long.
std::vector<CharRange> detect_quotes(std::string_view body, std::string_view parent,
                                     std::size_t min_chars = 20);

enum class SpecialFlag : std::uint8_t { None, User, StartQuote, EndQuote, Url };

std::string_view flag_name(SpecialFlag f);
SpecialFlag parse_flag(std::string_view name);

struct TokenAlignment {
  std::size_t post_index = 0;
  std::size_t start = 0;  // byte range in the post body
  std::size_t end = 0;
  bool operator==(const TokenAlignment&) const = default;
};

struct SerializedThread {
  std::string thread_id;
  std::string submission_id;
  std::vector<std::string> tokens;
  std::vector<std::optional<TokenAlignment>> alignment;
  std::vector<SpecialFlag> flags;
  std::vector<bool> global_attention;
  /// Per emitted post: user index of its author and token index of its
  /// [USER-i] token. Posts cut entirely by truncation are absent.
  std::vector<int> post_users;
  std::vector<std::size_t> post_starts;
  /// Bytes of each emitted post's body covered by the serialization.
  std::vector<std::size_t> post_covered;

  std::size_t size() const { return tokens.size(); }
  bool is_special(std::size_t i) const { return flags[i] != SpecialFlag::None; }
  /// Index of the post that token i belongs to.
  std::size_t post_of(std::size_t i) const;
};

struct SerializeOptions {
  std::size_t max_len = 4096;
  int user_vocab = 12;
  TokenizerConfig tokenizer;
};

/// Serializes a thread into one token stream: "[USER-i]" before every post,
/// quoted ranges wrapped in [STARTQ]/[ENDQ], URLs replaced by [URL], and the
/// tail dropped beyond max_len. Global attention is set on USER tokens.
SerializedThread serialize_thread(const Thread& thread, const SerializeOptions& opts);

/// Comment-level regime: only post `post_index`, keeping the thread's user index.
SerializedThread serialize_post(const Thread& thread, std::size_t post_index,
                                const SerializeOptions& opts);

/// Concatenation of the non-special tokens of one post, with [URL] kept as
/// its own sentinel text.
std::string detokenize_post(const SerializedThread& st, std::size_t post_index);

enum class SplitPart : std::uint8_t { Train, Test };

struct SplitPlan {
  std::string split_name;
  std::pair<double, double> ratios{0.8, 0.2};
  std::uint64_t seed = 0;
  std::map<std::string, SplitPart> assignment;  // thread_id -> part

  std::vector<std::string> threads_in(SplitPart part) const;
};

/// Minimal view of a thread needed for splitting.
struct SplitItem {
  std::string thread_id;
  std::string submission_id;
};

/// Submission-grouped random splits, one plan per seed in [0, n_seeds).
std::vector<SplitPlan> make_splits(const std::vector<SplitItem>& items,
                                   std::pair<double, double> ratios, int n_seeds,
                                   std::uint64_t base_seed = 0);
std::vector<SplitPlan> make_splits(const std::vector<Thread>& threads,
                                   std::pair<double, double> ratios, int n_seeds,
                                   std::uint64_t base_seed = 0);

/// "80:20" -> (0.8, 0.2)
std::pair<double, double> parse_ratio(std::string_view spec);
std::string ratio_name(std::pair<double, double> ratios);

// --- line-delimited record IO ---------------------------------------------

/// Canonical post records: {post_id, parent_id?, author_id, body,
/// quotes?:[[s,e]], urls?:[[s,e]], is_submission}. Missing quotes are
/// detected against the parent body; missing urls are detected by pattern.
std::vector<Post> read_posts_jsonl(std::istream& in);
/// ConvoKit utterance export: {id, speaker, reply_to, text, ...}.
std::vector<Post> read_convokit_jsonl(std::istream& in);
void write_posts_jsonl(std::ostream& out, const std::vector<Post>& posts);

/// Fills quote ranges (when absent) and URL ranges (when absent) by detection.
void fill_detected_ranges(std::vector<Post>& posts, const std::vector<bool>& has_quotes,
                          const std::vector<bool>& has_urls);

void write_serialized_jsonl(std::ostream& out, const SerializedThread& st);
std::vector<SerializedThread> read_serialized_jsonl(std::istream& in);

void write_split_jsonl(std::ostream& out, const SplitPlan& plan);
std::vector<SplitPlan> read_splits_jsonl(std::istream& in);

}  // namespace argmine
