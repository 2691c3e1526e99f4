#include "argmine/markers.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine {

namespace {

std::string normalize_phrase(std::string_view phrase) {
  std::istringstream in{std::string(phrase)};
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    out += to_lower(word);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& MarkerLexicon::category_names() {
  static const std::vector<std::string> names = {"Opinion", "Causation", "Rebuttal", "Factual",
                                                 "Assumption", "Summary", "Misc"};
  return names;
}

MarkerLexicon MarkerLexicon::default_lexicon() {
  MarkerLexicon lex;
  const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
      {"Opinion", {"i agree", "i disagree", "i think", "in my opinion", "imo", "imho"}},
      {"Causation",
       {"because", "since", "as", "therefore", "if", "so", "according to", "hence", "thus",
        "consequently"}},
      {"Rebuttal",
       {"in contrast", "yet", "though", "in spite of", "but", "regardless of", "however",
        "on the contrary"}},
      {"Factual",
       {"moreover", "in addition", "further to this", "in fact", "also", "firstly", "secondly",
        "lastly"}},
      {"Assumption",
       {"in the event of", "as long as", "so long as", "provided that", "assuming that",
        "given that"}},
      {"Summary", {"tldr"}},
      {"Misc", {"why", "where", "what", "how", "when", "while"}},
  };
  for (const auto& [cat, phrases] : table)
    for (const auto& p : phrases) lex.add(cat, p);
  return lex;
}

void MarkerLexicon::add(const std::string& category, std::string_view phrase) {
  const auto& names = category_names();
  if (std::find(names.begin(), names.end(), category) == names.end())
    throw ConfigError("unknown marker category '" + category + "'");
  const std::string norm = normalize_phrase(phrase);
  if (norm.empty()) throw ConfigError("empty marker phrase in category " + category);
  if (auto it = phrase_category_.find(norm); it != phrase_category_.end()) {
    if (it->second == category) return;
    throw ConfigError("marker '" + norm + "' listed under both " + it->second + " and " +
                      category);
  }
  phrase_category_.emplace(norm, category);
  auto it = std::find_if(categories_.begin(), categories_.end(),
                         [&](const auto& c) { return c.first == category; });
  if (it == categories_.end()) {
    categories_.push_back({category, {}});
    it = std::prev(categories_.end());
  }
  it->second.push_back(norm);
  max_words_ = std::max<std::size_t>(max_words_, std::count(norm.begin(), norm.end(), ' ') + 1);
}

MarkerLexicon MarkerLexicon::parse(std::istream& in) {
  MarkerLexicon lex;
  std::string line, current;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("lexicon line " + std::to_string(lineno) + ": bad header");
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      if (current == "Misc.") current = "Misc";
      continue;
    }
    if (current.empty())
      throw ConfigError("lexicon line " + std::to_string(lineno) + ": phrase before any [Category]");
    lex.add(current, t);
  }
  return lex;
}

MarkerLexicon MarkerLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon " + path);
  return parse(in);
}

void MarkerLexicon::write(std::ostream& out) const {
  bool first = true;
  for (const auto& [cat, phrases] : categories_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << cat << "]\n";
    for (const auto& p : phrases) out << p << '\n';
  }
}

const std::string* MarkerLexicon::category_of(const std::string& phrase) const {
  auto it = phrase_category_.find(phrase);
  return it == phrase_category_.end() ? nullptr : &it->second;
}

void MarkerLexicon::set_enabled(const std::string& category, bool enabled) {
  if (enabled) disabled_.erase(category);
  else disabled_.insert(category);
}

std::uint64_t MarkerLexicon::hash() const {
  std::ostringstream os;
  write(os);
  return fnv1a(os.str());
}

std::vector<std::vector<WordSpan>> word_runs(const std::vector<std::string>& tokens,
                                             const std::vector<SpecialFlag>& flags) {
  std::vector<std::vector<WordSpan>> runs(1);
  bool prev_joinable = false;  // previous token ends with a word byte
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string_view content = token_content(tokens[i]);
    if (flags[i] != SpecialFlag::None || content.empty()) {
      if (!runs.back().empty()) runs.emplace_back();
      prev_joinable = false;
      continue;
    }
    const bool continues = prev_joinable && leading_space(tokens[i]) == 0 &&
                           is_word_byte(static_cast<unsigned char>(content.front()));
    if (continues) {
      auto& w = runs.back().back();
      w.token_end = i + 1;
      w.lower += to_lower(content);
    } else {
      runs.back().push_back({i, i + 1, to_lower(content)});
    }
    prev_joinable = is_word_byte(static_cast<unsigned char>(content.back()));
  }
  if (runs.back().empty()) runs.pop_back();
  return runs;
}

std::vector<MarkerMatch> find_markers(const std::vector<std::string>& tokens,
                                      const std::vector<SpecialFlag>& flags,
                                      const MarkerLexicon& lexicon) {
  std::vector<MarkerMatch> out;
  for (const auto& run : word_runs(tokens, flags)) {
    std::size_t i = 0;
    while (i < run.size()) {
      bool matched = false;
      const std::size_t longest = std::min(lexicon.max_phrase_words(), run.size() - i);
      for (std::size_t len = longest; len >= 1; --len) {
        std::string key = run[i].lower;
        for (std::size_t k = 1; k < len; ++k) key += ' ' + run[i + k].lower;
        const std::string* cat = lexicon.category_of(key);
        if (cat && lexicon.enabled(*cat)) {
          out.push_back({run[i].token_start, run[i + len - 1].token_end, key, *cat});
          i += len;
          matched = true;
          break;
        }
      }
      if (!matched) ++i;
    }
  }
  return out;
}

std::vector<MarkerMatch> find_markers(const SerializedThread& st, const MarkerLexicon& lexicon) {
  return find_markers(st.tokens, st.flags, lexicon);
}

std::vector<MarkerMatch> find_markers(const std::vector<std::string>& tokens,
                                      const MarkerLexicon& lexicon) {
  std::vector<SpecialFlag> flags;
  flags.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t == special::kStartQuote) flags.push_back(SpecialFlag::StartQuote);
    else if (t == special::kEndQuote) flags.push_back(SpecialFlag::EndQuote);
    else if (t == special::kUrl) flags.push_back(SpecialFlag::Url);
    else if (special::is_special(t)) flags.push_back(SpecialFlag::User);
    else flags.push_back(SpecialFlag::None);
  }
  return find_markers(tokens, flags, lexicon);
}

std::string_view policy_name(MaskPolicy p) {
  return p == MaskPolicy::Selective ? "selective" : "random15";
}

MaskPolicy parse_policy(std::string_view name) {
  if (name == "selective") return MaskPolicy::Selective;
  if (name == "random15") return MaskPolicy::Random15;
  throw ConfigError("unknown masking policy '" + std::string(name) +
                    "' (expected selective|random15)");
}

MaskedBatch build_masked_batch(const SerializedThread& st, const MarkerLexicon& lexicon,
                               MaskPolicy policy, std::uint64_t seed) {
  if (st.tokens.empty()) throw InputError("cannot mask an empty token sequence");
  MaskedBatch batch;
  batch.policy = policy;
  batch.input_tokens = st.tokens;
  auto mask_at = [&](std::size_t i) {
    batch.targets.emplace(i, st.tokens[i]);
    batch.input_tokens[i] = std::string(special::kMask);
  };
  if (policy == MaskPolicy::Selective) {
    batch.matches = find_markers(st, lexicon);
    for (const auto& m : batch.matches)
      for (std::size_t i = m.token_start; i < m.token_end; ++i) mask_at(i);
  } else {
    Rng rng(seed, "mask");
    for (std::size_t i = 0; i < st.tokens.size(); ++i) {
      const bool draw = rng.bernoulli(kRandomMaskRate);
      if (draw && !st.is_special(i)) mask_at(i);
    }
  }
  return batch;
}

std::vector<std::string> unmask(const MaskedBatch& batch) {
  std::vector<std::string> out = batch.input_tokens;
  for (const auto& [pos, tok] : batch.targets) out.at(pos) = tok;
  return out;
}

}  // namespace argmine
