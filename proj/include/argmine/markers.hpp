#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argmine/corpus.hpp"

namespace argmine {

/// Category -> marker phrases. Phrases are lowercased word sequences joined
/// by single spaces.
class MarkerLexicon {
 public:
  static const std::vector<std::string>& category_names();

  /// The discourse markers used for selective masking (opinion, causation,
  /// rebuttal, factual, assumption, summary and miscellaneous cues).
  static MarkerLexicon default_lexicon();

  /// Parses `[Category]` section headers followed by one phrase per line.
  /// Blank lines and lines starting with '#' are ignored.
  static MarkerLexicon parse(std::istream& in);
  static MarkerLexicon load(const std::string& path);
  void write(std::ostream& out) const;

  void add(const std::string& category, std::string_view phrase);

  const std::vector<std::pair<std::string, std::vector<std::string>>>& categories() const {
    return categories_;
  }
  /// Category of a normalized phrase, or nullptr.
  const std::string* category_of(const std::string& phrase) const;
  std::size_t max_phrase_words() const { return max_words_; }
  std::size_t phrase_count() const { return phrase_category_.size(); }

  void set_enabled(const std::string& category, bool enabled);
  bool enabled(const std::string& category) const { return !disabled_.contains(category); }

  /// Content hash over the canonical text form (recorded in checkpoints).
  std::uint64_t hash() const;

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> categories_;
  std::unordered_map<std::string, std::string> phrase_category_;
  std::set<std::string> disabled_;
  std::size_t max_words_ = 0;
};

struct MarkerMatch {
  std::size_t token_start = 0;
  std::size_t token_end = 0;  // exclusive
  std::string phrase;
  std::string category;
  bool operator==(const MarkerMatch&) const = default;
};

/// A word assembled from one or more consecutive non-special tokens.
struct WordSpan {
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string lower;
};

/// Groups tokens into words. Special tokens and whitespace-only tokens
/// close the current run; a new run starts after them.
std::vector<std::vector<WordSpan>> word_runs(const std::vector<std::string>& tokens,
                                             const std::vector<SpecialFlag>& flags);

/// Longest-match-first, non-overlapping, case-insensitive marker matching
/// on word boundaries. Matches never cross special tokens.
std::vector<MarkerMatch> find_markers(const std::vector<std::string>& tokens,
                                      const std::vector<SpecialFlag>& flags,
                                      const MarkerLexicon& lexicon);
std::vector<MarkerMatch> find_markers(const SerializedThread& st, const MarkerLexicon& lexicon);
/// Flags are inferred from the token texts.
std::vector<MarkerMatch> find_markers(const std::vector<std::string>& tokens,
                                      const MarkerLexicon& lexicon);

enum class MaskPolicy : std::uint8_t { Selective, Random15 };

std::string_view policy_name(MaskPolicy p);
MaskPolicy parse_policy(std::string_view name);

struct MaskedBatch {
  std::vector<std::string> input_tokens;
  std::map<std::size_t, std::string> targets;  // masked position -> original token
  MaskPolicy policy = MaskPolicy::Selective;
  std::vector<MarkerMatch> matches;  // selective only
};

inline constexpr double kRandomMaskRate = 0.15;

/// Selective: every marker-match token is masked (all pieces of a marker).
/// Random15: each non-special token is masked independently with
/// probability 0.15 drawn from the "mask" stream of `seed`.
MaskedBatch build_masked_batch(const SerializedThread& st, const MarkerLexicon& lexicon,
                               MaskPolicy policy, std::uint64_t seed);

/// Substitutes targets back into the input.
std::vector<std::string> unmask(const MaskedBatch& batch);

}  // namespace argmine
