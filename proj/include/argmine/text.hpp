#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace argmine {

/// Byte range [start, end) into a post body.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const CharRange&) const = default;
};

namespace special {
inline constexpr std::string_view kStartQuote = "[STARTQ]";
inline constexpr std::string_view kEndQuote = "[ENDQ]";
inline constexpr std::string_view kUrl = "[URL]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";

std::string user(int index);
/// Returns the user index encoded in a "[USER-i]" token, or -1.
int parse_user(std::string_view token);
bool is_special(std::string_view token);
}  // namespace special

/// A token as produced from raw text. `text` carries any whitespace that
/// preceded it so that concatenating token texts reproduces the input.
struct RawToken {
  std::string text;
  std::size_t start = 0;  // byte offset of text[0], leading whitespace included
  std::size_t end = 0;
};

struct TokenizerConfig {
  /// Words longer than this many characters are split into pieces; 0 disables.
  std::size_t max_piece_chars = 8;
};

/// Whitespace/punctuation tokenizer with length-bounded word pieces.
///
/// Words are maximal runs of alphanumerics, apostrophes and non-ASCII
/// characters; every other non-space character is its own token. Whitespace
/// is attached to the token that follows it; whitespace at the very end of
/// the input becomes a whitespace-only token.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(TokenizerConfig config) : config_(config) {}

  std::vector<RawToken> tokenize(std::string_view text,
                                 std::size_t base_offset = 0) const;

  const TokenizerConfig& config() const { return config_; }
  /// Stable identifier of the tokenizer behaviour, stored in checkpoints.
  std::string fingerprint() const;

 private:
  TokenizerConfig config_;
};

bool is_word_byte(unsigned char c);
bool is_space_byte(unsigned char c);

/// Token text without its leading whitespace.
std::string_view token_content(std::string_view token);
std::size_t leading_space(std::string_view token);

std::string to_lower(std::string_view s);

/// Scheme-prefixed URL detection (http, https, ftp). Trailing punctuation
/// that usually closes a sentence or a markdown link is not part of the URL.
std::vector<CharRange> find_urls(std::string_view body);

}  // namespace argmine
