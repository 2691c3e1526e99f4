#include "argmine/synth.hpp"

#include <algorithm>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine {

const std::vector<SynthMarker>& synth_markers() {
  static const std::vector<SynthMarker> markers = {
      {"because", "it", "premise", "support"},
      {"i agree", "that", "claim", "agreement"},
      {"i disagree", "this", "claim", "disagreement"},
      {"however", "nobody", "claim", "undercutter"},
      {"though", "some", "claim", "partial agreement"},
      {"i think", "we", "claim", ""},
  };
  return markers;
}

const std::vector<std::string>& synth_filler_words() {
  static const std::vector<std::string> words = {
      "people", "policy", "should", "money",  "city",   "taxes",  "schools", "rules",
      "often",  "the",    "many",   "new",    "data",   "system", "rights",  "public",
      "market", "costs",  "will",   "can",    "more",   "less",   "good",    "bad",
      "local",  "state",  "change", "work",   "time",   "years",  "health",  "care",
      "law",    "vote",   "power",  "energy", "prices", "jobs",   "housing", "transit"};
  return words;
}

const std::vector<std::string>& synth_content_words() {
  static const std::vector<std::string> words = {
      "reform",  "funding", "curb",   "ban",     "limit",   "expand",  "protect", "reduce",
      "freedom", "safety",  "justice", "fairness", "growth", "privacy", "access",  "equity",
      "must",    "needs",   "helps",  "hurts",   "raises",  "lowers",  "fixes",   "breaks",
      "clearly", "rarely",  "always", "never",   "truly",   "simply"};
  return words;
}

namespace {

constexpr std::size_t kSupport = 0;
constexpr std::size_t kThink = 5;

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

struct Builder {
  const SynthOptions& opts;
  Rng rng;
  SynthCorpus out;
  std::size_t next_class = 0;
  std::size_t url_counter = 0;

  std::string words(int lo, int hi, const std::vector<std::string>& fw = synth_filler_words()) {
    const int n = lo + static_cast<int>(rng.below(static_cast<std::size_t>(hi - lo + 1)));
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + fw[rng.below(fw.size())];
    return s;
  }

  struct Body {
    std::string text;
    std::vector<CharRange> quotes;
    std::vector<CharRange> urls;
    std::vector<CharRange> fillers;  // sentences another post may quote
  };

  void space(Body& b) {
    if (!b.text.empty()) b.text += " ";
  }

  void filler(Body& b) {
    space(b);
    const std::size_t start = b.text.size();
    b.text += capitalize(words(4, 8));
    const bool link = rng.bernoulli(opts.url_rate);
    if (link) {
      b.text += " see ";
      const std::size_t u = b.text.size();
      b.text += "https://example.org/page" + std::to_string(url_counter++);
      b.urls.push_back({u, b.text.size()});
      b.text += " now";
    }
    b.text += ".";
    if (!link) b.fillers.push_back({start, b.text.size()});
  }

  // Appends "<Marker> <cue> words." and records the component.
  std::string component(Body& b, const std::string& post_id, std::size_t marker, int& counter) {
    const SynthMarker& m = synth_markers()[marker];
    space(b);
    b.text += capitalize(m.marker) + " ";
    const std::size_t start = b.text.size();
    b.text += m.cue + " " + words(opts.min_words, opts.max_words, synth_content_words());
    const std::string id = post_id + "_k" + std::to_string(counter++);
    out.annotations.ranges.push_back({id, post_id, start, b.text.size(), m.ctype});
    b.text += ".";
    return id;
  }

  std::size_t pick_class(bool has_parent) {
    if (!has_parent) return kSupport;
    if (opts.balanced) return next_class++ % 5;
    // Roughly the skew of annotated discussions: support dominates.
    static const double weights[] = {0.5, 0.15, 0.1, 0.13, 0.12};
    double u = rng.uniform();
    for (std::size_t c = 0; c < 5; ++c) {
      if (u < weights[c]) return c;
      u -= weights[c];
    }
    return 4;
  }

  void relation(const std::string& src, const std::string& tgt, std::size_t marker) {
    out.annotations.relations.push_back({src, tgt, synth_markers()[marker].fine_type});
  }

  void maybe_filler(Body& b) {
    if (rng.bernoulli(opts.filler_rate)) filler(b);
  }

  // Writes one post and recurses into its replies.
  void post(const std::string& id, const std::optional<std::string>& parent,
            const std::vector<std::string>& parent_components, const Body* parent_body, int depth,
            bool submission) {
    Body b;
    std::vector<std::string> comps;
    int counter = 0;
    if (parent_body && !parent_body->fillers.empty() && rng.bernoulli(opts.quote_rate)) {
      const CharRange r = parent_body->fillers[rng.below(parent_body->fillers.size())];
      const std::string quoted = parent_body->text.substr(r.start, r.end - r.start);
      if (quoted.size() >= 20) {
        b.quotes.push_back({0, quoted.size()});
        b.text = quoted;
      }
    }
    maybe_filler(b);
    const int events = 1 + static_cast<int>(rng.below(2));
    for (int e = 0; e < events; ++e) {
      const bool can_reply = !parent_components.empty();
      const std::size_t c = pick_class(can_reply);
      if (c == kSupport) {
        const std::string claim = component(b, id, kThink, counter);
        comps.push_back(claim);
        maybe_filler(b);
        const std::string premise = component(b, id, kSupport, counter);
        comps.push_back(premise);
        relation(premise, claim, kSupport);
      } else {
        const std::string claim = component(b, id, c, counter);
        comps.push_back(claim);
        relation(claim, parent_components[rng.below(parent_components.size())], c);
      }
      maybe_filler(b);
    }
    Post p;
    p.post_id = id;
    p.parent_id = parent;
    p.author_id = "user" + std::to_string(rng.below(static_cast<std::size_t>(opts.users)));
    p.body = b.text;
    p.quote_ranges = b.quotes;
    p.url_ranges = b.urls;
    p.is_submission = submission;
    out.posts.push_back(std::move(p));

    if (depth >= opts.max_depth) return;
    const int min_children = submission ? 1 : 0;
    const int children =
        min_children + static_cast<int>(rng.below(static_cast<std::size_t>(opts.max_children - min_children + 1)));
    for (int c = 0; c < children; ++c)
      post(id + "_" + std::to_string(c), id, comps, &b, depth + 1, false);
  }
};

}  // namespace

SynthCorpus generate_synthetic(const SynthOptions& opts) {
  if (opts.submissions == 0 || opts.max_children < 1 || opts.max_depth < 0 || opts.users < 1 ||
      opts.min_words < 1 || opts.max_words < opts.min_words)
    throw ConfigError("invalid synthetic corpus options");
  Builder b{opts, Rng(opts.seed, "synth"), {}};
  for (std::size_t s = 0; s < opts.submissions; ++s)
    b.post("s" + std::to_string(s), std::nullopt, {}, nullptr, 0, true);
  return std::move(b.out);
}

}  // namespace argmine
