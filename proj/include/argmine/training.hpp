#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "argmine/config.hpp"
#include "argmine/evaluation.hpp"
#include "argmine/markers.hpp"
#include "argmine/model.hpp"

namespace argmine {

enum class Task : std::uint8_t { Smlm, Aci, Rtp };

std::string_view task_name(Task t);
Task parse_task(std::string_view name);

struct TrainConfig {
  Task task = Task::Aci;
  std::size_t tokens_per_batch = 8192;
  int grad_accum = 4;
  double learning_rate = 2e-5;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool checkpoint_every_epoch = true;
  bool freeze_backbone = false;
  int warmup_steps = 0;
  double clip_norm = 0.0;  // 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int report_last_epochs = 5;
  double heldout_fraction = 0.01;  // sMLM only
  int smlm_default_epoch = 4;
  MaskPolicy mask_policy = MaskPolicy::Selective;

  /// Task defaults; comment_level selects the 1024-token batch budget.
  static TrainConfig defaults(Task task, bool comment_level = false);
  /// Reads keys named like the fields above over the defaults of the
  /// `task` key (or `fallback_task` when absent).
  static TrainConfig from_key_values(const KeyValues& kv, Task fallback_task);
  void validate() const;
  void write(std::ostream& out) const;
};

/// Adam over a parameter set, with optional linear warmup and global-norm
/// clipping. Frozen parameters are skipped.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, const TrainConfig& cfg);

  /// Applies the accumulated gradients, then zeroes them.
  void step();
  void zero_grad();
  long steps() const { return steps_; }
  double current_lr() const;

 private:
  std::vector<ad::Parameter*> params_;
  double lr_, beta1_, beta2_, eps_, clip_;
  int warmup_;
  long steps_ = 0;
};

struct BatchItem {
  std::string id;
  std::size_t length = 0;
};

/// Sorts items by length, fills batches greedily up to the token budget
/// and shuffles the batch order with the "shuffle" stream of (seed, epoch).
/// Throws BatchingError naming the first item longer than the budget.
std::vector<std::vector<std::size_t>> bucket_batches(const std::vector<BatchItem>& items,
                                                     std::size_t tokens_per_batch,
                                                     std::uint64_t seed, int epoch = 0);

/// Called after each epoch; returns the checkpoint path written (may be empty).
using EpochHook = std::function<std::string(int epoch, bool is_default)>;

// --- sMLM ----------------------------------------------------------------------

struct MaskedLmScore {
  double accuracy = 0.0;
  double perplexity = 0.0;
  std::size_t masked = 0;
};

/// Accuracy and perplexity of the MLM head at the masked positions.
MaskedLmScore evaluate_masked_lm(Backbone& backbone, const std::vector<SerializedThread>& threads,
                                 const MarkerLexicon& lexicon, MaskPolicy policy,
                                 std::uint64_t seed);

struct SmlmEpoch {
  int epoch = 0;
  double train_loss = 0.0;  // mean per masked token
  std::size_t masked_tokens = 0;
  MaskedLmScore heldout;
  std::size_t skipped_batches = 0;
  std::size_t skipped_items = 0;
  std::string checkpoint;
};

struct SmlmResult {
  MaskedLmScore initial;
  std::vector<SmlmEpoch> epochs;
  int default_epoch = 0;
  std::vector<std::string> heldout_ids;
};

/// Cross-entropy at masked positions only; a small reserve of threads is
/// held out for masked-token accuracy.
SmlmResult train_smlm(Backbone& backbone, const std::vector<SerializedThread>& corpus,
                      const MarkerLexicon& lexicon, const TrainConfig& cfg,
                      const EpochHook& hook = {});

// --- downstream ------------------------------------------------------------------

struct EpochRecord {
  int seed = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double micro_f1 = 0.0;
  double token_accuracy = 0.0;  // ACI only
  double weighted_f1 = 0.0;     // RTP only
  std::vector<double> class_f1;
  std::string checkpoint;
};

/// Per-epoch metrics for every seed. The reported score of a metric is the
/// mean over seeds of each seed's mean over its last `last_k` epochs.
class RunLedger {
 public:
  std::string task;
  int last_k = 5;
  std::vector<std::string> class_names;
  std::vector<EpochRecord> records;

  std::string selection_rule() const;
  std::vector<int> seeds() const;
  static double metric(const EpochRecord& r, std::string_view name);

  double seed_score(int seed, std::string_view name = "micro_f1") const;
  double reported(std::string_view name = "micro_f1") const;
  /// Bessel-corrected standard deviation of the per-seed scores.
  double reported_std(std::string_view name = "micro_f1") const;
  /// Per-epoch mean and Bessel-corrected standard deviation across seeds.
  std::vector<double> epoch_mean(std::string_view name = "micro_f1") const;
  std::vector<double> epoch_std(std::string_view name = "micro_f1") const;

  void write_jsonl(std::ostream& out, const std::string& manifest_hash) const;
  void write_summary(std::ostream& out) const;
};

SpanMatchReport evaluate_aci(Backbone& backbone, AciHead& head,
                             const std::vector<LabeledThread>& threads,
                             std::vector<BioSequence>* predictions = nullptr);

/// One relation to classify.
struct RtpExample {
  const LabeledThread* thread = nullptr;
  ComponentSpan source;
  ComponentSpan target;
  int label = 0;
  PromptInstance prompt;  // prompt mode only
};

/// Relation edges of `threads` as classification examples. Edges whose
/// endpoints are missing or whose prompt cannot be built are counted in
/// `skipped`.
std::vector<RtpExample> relation_examples(const std::vector<LabeledThread>& threads, RtpMode mode,
                                          const PromptOptions& opts, std::size_t* skipped = nullptr);

RelationReport evaluate_rtp(Backbone& backbone, RtpHead& head,
                            const std::vector<RtpExample>& examples, const LabelSchema& schema,
                            std::vector<int>* predictions = nullptr);

/// Finetunes on `train` (CRF negative log-likelihood) and evaluates on
/// `test` after every epoch, appending one record per epoch to `ledger`.
void train_downstream(Backbone& backbone, AciHead& head, const std::vector<LabeledThread>& train,
                      const std::vector<LabeledThread>& test, const TrainConfig& cfg,
                      RunLedger& ledger, const EpochHook& hook = {});

/// Same for relation classification with class cross-entropy.
void train_downstream(Backbone& backbone, RtpHead& head, const std::vector<RtpExample>& train,
                      const std::vector<RtpExample>& test, const LabelSchema& schema,
                      const TrainConfig& cfg, RunLedger& ledger, const EpochHook& hook = {});

}  // namespace argmine
