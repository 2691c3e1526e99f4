#include "argmine/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace argmine {

namespace special {

std::string user(int index) { return "[USER-" + std::to_string(index) + "]"; }

int parse_user(std::string_view token) {
  constexpr std::string_view prefix = "[USER-";
  if (token.size() < prefix.size() + 2 || !token.starts_with(prefix) ||
      token.back() != ']')
    return -1;
  const auto digits = token.substr(prefix.size(), token.size() - prefix.size() - 1);
  int value = -1;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 0) return -1;
  return value;
}

bool is_special(std::string_view token) {
  return token == kStartQuote || token == kEndQuote || token == kUrl ||
         token == kMask || token == kPad || token == kUnk || parse_user(token) >= 0;
}

}  // namespace special

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

std::size_t leading_space(std::string_view token) {
  std::size_t i = 0;
  while (i < token.size() && is_space_byte(static_cast<unsigned char>(token[i]))) ++i;
  return i;
}

std::string_view token_content(std::string_view token) {
  return token.substr(leading_space(token));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::vector<RawToken> Tokenizer::tokenize(std::string_view text,
                                          std::size_t base_offset) const {
  std::vector<RawToken> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t ws_begin = i;
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i == n) {
      out.push_back({std::string(text.substr(ws_begin)), base_offset + ws_begin,
                     base_offset + n});
      break;
    }
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      out.push_back({std::string(text.substr(ws_begin, i - ws_begin)),
                     base_offset + ws_begin, base_offset + i});
      continue;
    }
    std::size_t piece_begin = ws_begin;
    std::size_t chars = 0;
    while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) {
      const bool starts_char = !is_utf8_continuation(static_cast<unsigned char>(text[i]));
      if (starts_char && config_.max_piece_chars > 0 && chars == config_.max_piece_chars) {
        out.push_back({std::string(text.substr(piece_begin, i - piece_begin)),
                       base_offset + piece_begin, base_offset + i});
        piece_begin = i;
        chars = 0;
      }
      if (starts_char) ++chars;
      ++i;
    }
    out.push_back({std::string(text.substr(piece_begin, i - piece_begin)),
                   base_offset + piece_begin, base_offset + i});
  }
  return out;
}

std::string Tokenizer::fingerprint() const {
  return "ws-punct-pieces/v1/max_piece_chars=" + std::to_string(config_.max_piece_chars);
}

std::vector<CharRange> find_urls(std::string_view body) {
  std::vector<CharRange> out;
  const std::string lower = to_lower(body);
  std::size_t i = 0;
  while (i < lower.size()) {
    std::size_t scheme_len = 0;
    for (std::string_view scheme : {"https://", "http://", "ftp://"}) {
      if (std::string_view(lower).substr(i, scheme.size()) == scheme) {
        scheme_len = scheme.size();
        break;
      }
    }
    const bool boundary = i == 0 || !is_word_byte(static_cast<unsigned char>(lower[i - 1]));
    if (scheme_len == 0 || !boundary) {
      ++i;
      continue;
    }
    std::size_t end = i + scheme_len;
    while (end < lower.size() && !is_space_byte(static_cast<unsigned char>(lower[end]))) ++end;
    while (end > i + scheme_len) {
      const char c = lower[end - 1];
      if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' ||
          c == ')' || c == ']' || c == '}' || c == '"' || c == '\'' || c == '>')
        --end;
      else
        break;
    }
    if (end > i + scheme_len) out.push_back({i, end});
    i = std::max(end, i + 1);
  }
  return out;
}

}  // namespace argmine
