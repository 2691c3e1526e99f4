#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "argmine/corpus.hpp"
#include "argmine/labels.hpp"

namespace argmine {

/// Knobs of the bundled synthetic discussion generator.
struct SynthOptions {
  std::size_t submissions = 20;
  int max_children = 2;      // replies per post
  int max_depth = 3;         // reply levels below the submission
  int users = 6;
  int min_words = 3;         // words per component after the cue word
  int max_words = 7;
  double filler_rate = 0.5;  // chance of a filler sentence around each component
  double quote_rate = 0.3;   // chance that a reply quotes a filler sentence of its parent
  double url_rate = 0.15;    // chance that a filler sentence carries a link
  bool balanced = false;     // cycle through the relation classes instead of sampling
  std::uint64_t seed = 0;
};

/// Every component starts right after a discourse marker and ends before
/// the sentence's full stop. The marker fixes both the component type and
/// the relation its component takes part in:
///   "because"     premise  -> support of the preceding claim
///   "i agree"     claim    -> agreement with a parent component
///   "i disagree"  claim    -> direct attack on a parent component
///   "however"     claim    -> undercutter attack on a parent component
///   "though"      claim    -> partial relation to a parent component
///   "i think"     claim    (no outgoing relation)
/// The first word of each component is a cue word specific to its marker;
/// the rest come from a word list disjoint from the filler sentences.
struct SynthCorpus {
  std::vector<Post> posts;
  Annotations annotations;
};

SynthCorpus generate_synthetic(const SynthOptions& opts);

/// The (marker, cue word, relation class) triples used by the generator.
struct SynthMarker {
  std::string marker;
  std::string cue;
  std::string ctype;
  std::string fine_type;  // empty when the component has no outgoing relation
};
const std::vector<SynthMarker>& synth_markers();
const std::vector<std::string>& synth_filler_words();
const std::vector<std::string>& synth_content_words();

}  // namespace argmine
