#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "argmine/autodiff.hpp"
#include "argmine/corpus.hpp"
#include "argmine/crf.hpp"
#include "argmine/labels.hpp"

namespace argmine {

/// Token <-> id mapping. Leading whitespace of a token is collapsed to a
/// single space before lookup, so " so" and "\nso" share an id.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  /// Special tokens first ([PAD] [UNK] [MASK] [STARTQ] [ENDQ] [URL]
  /// [USER-0..n-1]), then corpus keys in sorted order.
  static Vocab build(std::span<const std::vector<std::string>> sequences, int user_tokens,
                     std::size_t min_count = 1);

  static std::string key(std::string_view token);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  std::vector<int> encode(std::span<const std::string> tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  int pad_id() const { return 0; }
  int unk_id() const { return 1; }
  int mask_id() const { return 2; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class AttentionMode : std::uint8_t { Dense, WindowedGlobal };

struct BackboneConfig {
  Vocab vocab;
  int hidden_size = 64;
  int layers = 2;
  int heads = 4;
  int ffn_size = 256;
  int max_positions = 4096;
  AttentionMode attention_mode = AttentionMode::Dense;
  int window_size = 512;
  std::uint64_t init_seed = 0;

  /// Thread-level defaults (4096 positions, windowed+global attention).
  static BackboneConfig thread_level(Vocab vocab);
  /// Comment-level defaults (512 positions, dense attention).
  static BackboneConfig comment_level(Vocab vocab);
  void validate() const;
};

/// allowed(i, j): query i may attend to key j. Windowed mode lets tokens
/// within window_size/2 of each other attend, plus every pair involving a
/// global token.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> attention_pattern(
    const BackboneConfig& config, const std::vector<bool>& global);

/// Per-token contextual encoder with a masked-LM head.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const BackboneConfig& config() const = 0;
  /// n x hidden_size vectors for n input ids.
  virtual ad::Var encode(ad::Tape& tape, std::span<const int> ids,
                         const std::vector<bool>& global_attention) = 0;
  /// rows x vocab scores for rows of encoder output.
  virtual ad::Var mlm_logits(ad::Tape& tape, ad::Var hidden) = 0;
  virtual std::vector<ad::Parameter*> parameters() = 0;

  const Vocab& vocab() const { return config().vocab; }
};

/// Small pre-LN transformer with learned positions and an MLM head tied
/// to the input embeddings.
class ToyTransformer final : public Backbone {
 public:
  explicit ToyTransformer(BackboneConfig config);

  const BackboneConfig& config() const override { return config_; }
  ad::Var encode(ad::Tape& tape, std::span<const int> ids,
                 const std::vector<bool>& global_attention) override;
  ad::Var mlm_logits(ad::Tape& tape, ad::Var hidden) override;
  std::vector<ad::Parameter*> parameters() override;

  std::map<std::string, ad::Parameter>& named_parameters() { return params_; }

 private:
  ad::Parameter& p(const std::string& name) { return params_.at(name); }

  BackboneConfig config_;
  std::map<std::string, ad::Parameter> params_;
};

/// Inference-mode encoder output.
Eigen::MatrixXd encode_values(Backbone& backbone, std::span<const std::string> tokens,
                              const std::vector<bool>& global_attention);

enum class GlobalPolicy : std::uint8_t { UserTokens, None };

/// Copy of `st` whose global attention flags follow `policy`.
SerializedThread set_global_attention(const SerializedThread& st, GlobalPolicy policy);

// --- ACI ---------------------------------------------------------------------

/// Per-token projection to BIO scores followed by a constrained CRF.
class AciHead {
 public:
  AciHead(int hidden_size, const LabelSchema& schema, std::uint64_t seed);

  const LabelSchema& schema() const { return *schema_; }
  ad::Var emissions(ad::Tape& tape, ad::Var hidden);
  ad::Var loss(ad::Tape& tape, ad::Var hidden, const BioSequence& gold);
  /// Current transition parameters together with the BIO mask.
  crf::TransitionTable table() const;
  std::vector<ad::Parameter*> parameters();
  std::map<std::string, ad::Parameter>& named_parameters() { return params_; }

 private:
  const LabelSchema* schema_;
  crf::TransitionTable mask_;
  std::map<std::string, ad::Parameter> params_;
};

/// Token-level emission scores of a serialized thread.
crf::EmissionMatrix aci_forward(Backbone& backbone, AciHead& head, const SerializedThread& st);
BioSequence aci_decode(Backbone& backbone, AciHead& head, const SerializedThread& st);

// --- RTP ---------------------------------------------------------------------

struct PromptInstance {
  std::vector<std::string> context_tokens;
  std::vector<std::string> prompt_tokens;
  std::vector<bool> global_attention;  // over context + prompt
  std::vector<std::size_t> mask_positions;  // indices into context + prompt
  std::size_t context_dropped = 0;  // tokens removed from the front
  int label = -1;

  std::vector<std::string> tokens() const;
};

struct PromptOptions {
  int mask_count = 3;
  std::size_t max_positions = 4096;
  GlobalPolicy global = GlobalPolicy::None;
};

/// Appends "[USER-i] said <target> [MASK]*k [USER-j] said <source>" to the
/// thread, where the source component refers to the target. The context is
/// truncated from the front when the whole input would not fit.
PromptInstance build_prompt(const SerializedThread& st, const ComponentSpan& source,
                            const ComponentSpan& target, const PromptOptions& opts,
                            int label = -1);

enum class RtpMode : std::uint8_t { Prompt, MeanPool };

/// Affine map from mask-position vectors (prompt) or two mean-pooled
/// component vectors (mean pooling) to relation-class scores.
class RtpHead {
 public:
  RtpHead(RtpMode mode, int hidden_size, int num_classes, int mask_count, std::uint64_t seed);

  RtpMode mode() const { return mode_; }
  int input_dim() const { return input_dim_; }
  int num_classes() const { return num_classes_; }
  int mask_count() const { return mask_count_; }
  Eigen::Index parameter_count() const;

  ad::Var scores(ad::Tape& tape, ad::Var features);
  std::vector<ad::Parameter*> parameters();
  std::map<std::string, ad::Parameter>& named_parameters() { return params_; }

 private:
  RtpMode mode_;
  int input_dim_;
  int num_classes_;
  int mask_count_;
  std::map<std::string, ad::Parameter> params_;
};

/// One mean-pooling instance: component token ranges inside a serialized thread.
struct PairInstance {
  const SerializedThread* st = nullptr;
  ComponentSpan source;
  ComponentSpan target;
  int label = -1;
};

ad::Var rtp_forward(ad::Tape& tape, Backbone& backbone, const PromptInstance& inst, RtpHead& head);
ad::Var rtp_forward(ad::Tape& tape, Backbone& backbone, const PairInstance& inst, RtpHead& head);
/// Inference helpers returning the class scores.
Eigen::RowVectorXd rtp_scores(Backbone& backbone, const PromptInstance& inst, RtpHead& head);
Eigen::RowVectorXd rtp_scores(Backbone& backbone, const PairInstance& inst, RtpHead& head);

}  // namespace argmine
