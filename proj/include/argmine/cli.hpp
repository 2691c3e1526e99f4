#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "argmine/config.hpp"
#include "argmine/model.hpp"
#include "argmine/training.hpp"

namespace argmine {

/// Experiment description read from a `key = value` manifest file.
/// ARGMINE_OUTPUT_DIR and ARGMINE_SEED override output_dir and seed.
struct ExperimentManifest {
  KeyValues values;
  std::string path;

  std::string corpus;
  std::string corpus_format = "posts";  // posts | convokit | cmv-modes | dr-inventor
  std::string annotations;
  std::string schema = "cmv";
  std::string lexicon;  // empty: built-in lexicon
  std::string output_dir = "out";
  std::string split = "80:20";
  int split_seeds = 5;
  std::uint64_t seed = 0;
  std::string level = "thread";  // thread | comment
  std::size_t max_len = 4096;
  int user_vocab = 12;
  std::size_t min_count = 1;
  std::string backbone_checkpoint;  // plug-in weights; empty: fresh toy backbone
  std::string init_from = "smlm";   // smlm | scratch | <checkpoint path>
  std::string rtp_mode = "prompt";  // prompt | mean_pool
  int mask_count = 3;

  /// `overrides` (command-line values) win over the environment, which wins over `kv`.
  static ExperimentManifest parse(const KeyValues& kv, const std::string& path = {},
                                  const std::map<std::string, std::string>& overrides = {});
  static ExperimentManifest load(const std::string& path);

  /// Hex digest of the canonical manifest text (output_dir excluded).
  std::string hash() const;
  /// Normalized ratio names of the comma-separated `split` key.
  std::vector<std::string> split_names() const;
  BackboneConfig backbone_config(Vocab vocab) const;
  /// Keys prefixed with the task name ("aci.epochs") over the task
  /// defaults, then `overrides` (unprefixed keys) on top.
  TrainConfig train_config(Task task, const KeyValues* overrides = nullptr) const;
  SerializeOptions serialize_options() const;
};

/// Entry point of the command-line tool. Returns 0 on success, 1 on a
/// domain error and 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace argmine
