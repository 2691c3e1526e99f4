#include "argmine/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"
#include <nlohmann/json.hpp>

namespace argmine {

std::string_view task_name(Task t) {
  switch (t) {
    case Task::Smlm: return "smlm";
    case Task::Aci: return "aci";
    case Task::Rtp: return "rtp";
  }
  return "aci";
}

Task parse_task(std::string_view name) {
  if (name == "smlm") return Task::Smlm;
  if (name == "aci") return Task::Aci;
  if (name == "rtp") return Task::Rtp;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected smlm, aci or rtp)");
}

// --- config ----------------------------------------------------------------------

TrainConfig TrainConfig::defaults(Task task, bool comment_level) {
  TrainConfig c;
  c.task = task;
  c.tokens_per_batch = comment_level ? 1024 : 8192;
  if (task == Task::Smlm) {
    c.grad_accum = 3;
    c.learning_rate = 1e-6;
    c.epochs = 10;
  } else {
    c.grad_accum = 4;
    c.learning_rate = 2e-5;
    c.epochs = 30;
  }
  return c;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv, Task fallback_task) {
  const Task task = kv.contains("task") ? parse_task(*kv.get("task")) : fallback_task;
  TrainConfig c = defaults(task, kv.get_bool("comment_level", false));
  c.tokens_per_batch = kv.get_uint("tokens_per_batch", c.tokens_per_batch);
  c.grad_accum = static_cast<int>(kv.get_int("grad_accum", c.grad_accum));
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.seed = kv.get_uint("seed", c.seed);
  c.checkpoint_every_epoch = kv.get_bool("checkpoint_every_epoch", c.checkpoint_every_epoch);
  c.freeze_backbone = kv.get_bool("freeze_backbone", c.freeze_backbone);
  c.warmup_steps = static_cast<int>(kv.get_int("warmup_steps", c.warmup_steps));
  c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
  c.beta1 = kv.get_double("adam_beta1", c.beta1);
  c.beta2 = kv.get_double("adam_beta2", c.beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.report_last_epochs = static_cast<int>(kv.get_int("report_last_epochs", c.report_last_epochs));
  c.heldout_fraction = kv.get_double("heldout_fraction", c.heldout_fraction);
  c.smlm_default_epoch = static_cast<int>(kv.get_int("smlm_default_epoch", c.smlm_default_epoch));
  if (auto p = kv.get("mask_policy")) c.mask_policy = parse_policy(*p);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (tokens_per_batch == 0) throw ConfigError("tokens_per_batch must be positive");
  if (grad_accum < 1) throw ConfigError("grad_accum must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a finite non-negative number");
  if (epochs < 0) throw ConfigError("epochs must not be negative");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must not be negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must not be negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (report_last_epochs < 1) throw ConfigError("report_last_epochs must be at least 1");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0))
    throw ConfigError("heldout_fraction must lie in [0, 1)");
  if (smlm_default_epoch < 1) throw ConfigError("smlm_default_epoch must be at least 1");
}

void TrainConfig::write(std::ostream& out) const {
  out << "task = " << task_name(task) << "\n"
      << "tokens_per_batch = " << tokens_per_batch << "\n"
      << "grad_accum = " << grad_accum << "\n"
      << "learning_rate = " << learning_rate << "\n"
      << "epochs = " << epochs << "\n"
      << "seed = " << seed << "\n"
      << "checkpoint_every_epoch = " << (checkpoint_every_epoch ? "true" : "false") << "\n"
      << "freeze_backbone = " << (freeze_backbone ? "true" : "false") << "\n"
      << "warmup_steps = " << warmup_steps << "\n"
      << "clip_norm = " << clip_norm << "\n"
      << "adam_beta1 = " << beta1 << "\n"
      << "adam_beta2 = " << beta2 << "\n"
      << "adam_eps = " << adam_eps << "\n"
      << "report_last_epochs = " << report_last_epochs << "\n"
      << "heldout_fraction = " << heldout_fraction << "\n"
      << "smlm_default_epoch = " << smlm_default_epoch << "\n"
      << "mask_policy = " << policy_name(mask_policy) << "\n";
}

// --- optimizer -------------------------------------------------------------------

Adam::Adam(std::vector<ad::Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      clip_(cfg.clip_norm),
      warmup_(cfg.warmup_steps) {
  for (auto* p : params_) {
    if (p->adam_m.size() != p->value.size()) p->adam_m = ad::Matrix::Zero(p->value.rows(), p->value.cols());
    if (p->adam_v.size() != p->value.size()) p->adam_v = ad::Matrix::Zero(p->value.rows(), p->value.cols());
    if (p->grad.size() != p->value.size()) p->zero_grad();
  }
}

double Adam::current_lr() const {
  if (warmup_ > 0 && steps_ < warmup_) return lr_ * static_cast<double>(steps_ + 1) / warmup_;
  return lr_;
}

void Adam::zero_grad() {
  for (auto* p : params_) p->grad.setZero();
}

void Adam::step() {
  double scale = 1.0;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (auto* p : params_)
      if (!p->frozen) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > clip_) scale = clip_ / norm;
  }
  const double lr = current_lr();
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto* p : params_) {
    if (!p->frozen) {
      const ad::Matrix g = p->grad * scale;
      p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * g;
      p->adam_v = beta2_ * p->adam_v + (1.0 - beta2_) * g.cwiseProduct(g);
      p->value.array() -= lr * (p->adam_m.array() / c1) / ((p->adam_v.array() / c2).sqrt() + eps_);
    }
    p->grad.setZero();
  }
}

// --- batching --------------------------------------------------------------------

std::vector<std::vector<std::size_t>> bucket_batches(const std::vector<BatchItem>& items,
                                                     std::size_t tokens_per_batch,
                                                     std::uint64_t seed, int epoch) {
  if (tokens_per_batch == 0) throw ConfigError("tokens_per_batch must be positive");
  for (const auto& it : items)
    if (it.length > tokens_per_batch)
      throw BatchingError("item '" + it.id + "' has " + std::to_string(it.length) +
                          " tokens, more than the batch budget of " +
                          std::to_string(tokens_per_batch));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].length < items[b].length; });
  std::vector<std::vector<std::size_t>> batches;
  std::size_t used = 0;
  for (std::size_t i : order) {
    if (batches.empty() || used + items[i].length > tokens_per_batch) {
      batches.emplace_back();
      used = 0;
    }
    batches.back().push_back(i);
    used += items[i].length;
  }
  Rng rng(seed, "shuffle/" + std::to_string(epoch));
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

namespace {

std::vector<ad::Parameter*> join(std::vector<ad::Parameter*> a, const std::vector<ad::Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void set_frozen(Backbone& backbone, bool frozen) {
  for (auto* p : backbone.parameters()) p->frozen = frozen;
}

// Runs one epoch over `batches`: `item_loss` records the forward pass and
// backward for one item and returns its loss (or a negative value to mark
// the item as skipped). Steps every grad_accum non-empty batches.
struct EpochStats {
  double loss = 0.0;
  std::size_t items = 0;
  std::size_t skipped_items = 0;
  std::size_t skipped_batches = 0;
};

template <typename F>
EpochStats run_epoch(const std::vector<std::vector<std::size_t>>& batches, Adam& opt, int grad_accum,
                     F&& item_loss) {
  EpochStats stats;
  int pending = 0;
  for (const auto& batch : batches) {
    std::size_t used = 0;
    for (std::size_t i : batch) {
      const double l = item_loss(i);
      if (l < 0.0) {
        ++stats.skipped_items;
        continue;
      }
      stats.loss += l;
      ++stats.items;
      ++used;
    }
    if (used == 0) {
      ++stats.skipped_batches;
      continue;
    }
    if (++pending == grad_accum) {
      opt.step();
      pending = 0;
    }
  }
  if (pending > 0) opt.step();
  return stats;
}

}  // namespace

// --- sMLM ------------------------------------------------------------------------

namespace {

struct MaskedItem {
  std::vector<int> ids;
  std::vector<std::size_t> positions;
  std::vector<int> targets;
  const std::vector<bool>* global = nullptr;
};

MaskedItem make_masked_item(const Vocab& vocab, const SerializedThread& st,
                            const MarkerLexicon& lexicon, MaskPolicy policy, std::uint64_t seed) {
  const MaskedBatch mb = build_masked_batch(st, lexicon, policy, seed);
  MaskedItem item;
  item.ids = vocab.encode(mb.input_tokens);
  for (const auto& [pos, tok] : mb.targets) {
    item.positions.push_back(pos);
    item.targets.push_back(vocab.id(tok));
  }
  item.global = &st.global_attention;
  return item;
}

ad::Var masked_loss(ad::Tape& tape, Backbone& backbone, const MaskedItem& item) {
  ad::Var hidden = backbone.encode(tape, item.ids, *item.global);
  ad::Var logits = backbone.mlm_logits(tape, ad::gather_rows(hidden, item.positions));
  return ad::cross_entropy(logits, item.targets);
}

}  // namespace

MaskedLmScore evaluate_masked_lm(Backbone& backbone, const std::vector<SerializedThread>& threads,
                                 const MarkerLexicon& lexicon, MaskPolicy policy,
                                 std::uint64_t seed) {
  MaskedLmScore score;
  double nll = 0.0;
  std::size_t correct = 0;
  for (const auto& st : threads) {
    const MaskedItem item = make_masked_item(backbone.vocab(), st, lexicon, policy, seed);
    if (item.positions.empty()) continue;
    ad::Tape tape;
    ad::Var hidden = backbone.encode(tape, item.ids, *item.global);
    const ad::Matrix logits = backbone.mlm_logits(tape, ad::gather_rows(hidden, item.positions)).value();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
      const int t = item.targets[static_cast<std::size_t>(r)];
      nll += lse - logits(r, t);
      Eigen::Index best;
      logits.row(r).maxCoeff(&best);
      correct += best == t ? 1 : 0;
      ++score.masked;
    }
  }
  if (score.masked > 0) {
    score.accuracy = static_cast<double>(correct) / score.masked;
    score.perplexity = std::exp(nll / score.masked);
  }
  return score;
}

SmlmResult train_smlm(Backbone& backbone, const std::vector<SerializedThread>& corpus,
                      const MarkerLexicon& lexicon, const TrainConfig& cfg, const EpochHook& hook) {
  if (cfg.task != Task::Smlm) throw ConfigError("train_smlm needs task = smlm");
  cfg.validate();
  if (corpus.empty()) throw ConfigError("sMLM corpus is empty");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng(cfg.seed, "heldout").shuffle(order.begin(), order.end());
  std::size_t n_held = 0;
  if (cfg.heldout_fraction > 0.0 && corpus.size() > 1)
    n_held = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(cfg.heldout_fraction * static_cast<double>(corpus.size()))),
        1, corpus.size() - 1);
  std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_held));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_held), order.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());

  SmlmResult result;
  std::vector<SerializedThread> heldout;
  for (std::size_t i : held) {
    heldout.push_back(corpus[i]);
    result.heldout_ids.push_back(corpus[i].thread_id);
  }
  result.initial = evaluate_masked_lm(backbone, heldout, lexicon, cfg.mask_policy, cfg.seed);
  result.default_epoch = std::min(cfg.smlm_default_epoch, cfg.epochs);

  std::vector<BatchItem> items;
  for (std::size_t i : train) items.push_back({corpus[i].thread_id, corpus[i].size()});
  set_frozen(backbone, false);
  Adam opt(backbone.parameters(), cfg);
  opt.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = bucket_batches(items, cfg.tokens_per_batch, cfg.seed, epoch);
    std::size_t masked = 0;
    const std::uint64_t mask_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch);
    const EpochStats stats = run_epoch(batches, opt, cfg.grad_accum, [&](std::size_t k) {
      const SerializedThread& st = corpus[train[k]];
      const MaskedItem item = make_masked_item(backbone.vocab(), st, lexicon, cfg.mask_policy, mask_seed);
      if (item.positions.empty()) return -1.0;
      ad::Tape tape;
      ad::Var loss = masked_loss(tape, backbone, item);
      tape.backward(loss);
      masked += item.positions.size();
      return loss.scalar();
    });
    SmlmEpoch rec;
    rec.epoch = epoch;
    rec.masked_tokens = masked;
    rec.train_loss = masked > 0 ? stats.loss / static_cast<double>(masked) : 0.0;
    rec.skipped_batches = stats.skipped_batches;
    rec.skipped_items = stats.skipped_items;
    rec.heldout = evaluate_masked_lm(backbone, heldout, lexicon, cfg.mask_policy, cfg.seed);
    if (hook && cfg.checkpoint_every_epoch) rec.checkpoint = hook(epoch, epoch == result.default_epoch);
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

// --- ledger ----------------------------------------------------------------------

std::string RunLedger::selection_rule() const {
  return "mean over seeds of the mean over the last " + std::to_string(last_k) + " epochs";
}

std::vector<int> RunLedger::seeds() const {
  std::set<int> s;
  for (const auto& r : records) s.insert(r.seed);
  return {s.begin(), s.end()};
}

double RunLedger::metric(const EpochRecord& r, std::string_view name) {
  if (name == "micro_f1") return r.micro_f1;
  if (name == "token_accuracy") return r.token_accuracy;
  if (name == "weighted_f1") return r.weighted_f1;
  if (name == "train_loss") return r.train_loss;
  throw ConfigError("unknown ledger metric '" + std::string(name) + "'");
}

double RunLedger::seed_score(int seed, std::string_view name) const {
  std::vector<const EpochRecord*> rs;
  for (const auto& r : records)
    if (r.seed == seed) rs.push_back(&r);
  if (rs.empty()) throw InputError("no records for seed " + std::to_string(seed));
  std::stable_sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->epoch < b->epoch; });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(last_k), rs.size());
  double sum = 0.0;
  for (std::size_t i = rs.size() - k; i < rs.size(); ++i) sum += metric(*rs[i], name);
  return sum / static_cast<double>(k);
}

double RunLedger::reported(std::string_view name) const {
  const auto s = seeds();
  if (s.empty()) return 0.0;
  double sum = 0.0;
  for (int seed : s) sum += seed_score(seed, name);
  return sum / static_cast<double>(s.size());
}

namespace {

double bessel_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

}  // namespace

double RunLedger::reported_std(std::string_view name) const {
  std::vector<double> v;
  for (int seed : seeds()) v.push_back(seed_score(seed, name));
  return bessel_std(v);
}

std::vector<double> RunLedger::epoch_mean(std::string_view name) const {
  std::map<int, std::vector<double>> by_epoch;
  for (const auto& r : records) by_epoch[r.epoch].push_back(metric(r, name));
  std::vector<double> out;
  for (const auto& [_, v] : by_epoch)
    out.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
  return out;
}

std::vector<double> RunLedger::epoch_std(std::string_view name) const {
  std::map<int, std::vector<double>> by_epoch;
  for (const auto& r : records) by_epoch[r.epoch].push_back(metric(r, name));
  std::vector<double> out;
  for (const auto& [_, v] : by_epoch) out.push_back(bessel_std(v));
  return out;
}

void RunLedger::write_jsonl(std::ostream& out, const std::string& manifest_hash) const {
  using nlohmann::json;
  for (const auto& r : records) {
    json j = {{"task", task},
              {"seed", r.seed},
              {"epoch", r.epoch},
              {"train_loss", r.train_loss},
              {"micro_f1", r.micro_f1},
              {"class_f1", r.class_f1},
              {"manifest_hash", manifest_hash}};
    if (task == "aci") j["token_accuracy"] = r.token_accuracy;
    if (task == "rtp") j["weighted_f1"] = r.weighted_f1;
    if (!r.checkpoint.empty()) j["checkpoint"] = r.checkpoint;
    out << j.dump() << "\n";
  }
  json summary = {{"summary", true},
                  {"task", task},
                  {"selection_rule", selection_rule()},
                  {"seeds", seeds()},
                  {"micro_f1", reported("micro_f1")},
                  {"micro_f1_std", reported_std("micro_f1")},
                  {"manifest_hash", manifest_hash}};
  if (task == "aci") summary["token_accuracy"] = reported("token_accuracy");
  if (task == "rtp") summary["weighted_f1"] = reported("weighted_f1");
  out << summary.dump() << "\n";
}

void RunLedger::write_summary(std::ostream& out) const {
  const auto s = seeds();
  out << task << ": " << s.size() << " seed(s), " << selection_rule() << "\n";
  out << std::fixed << std::setprecision(4);
  out << "  micro-F1 " << reported("micro_f1") << " +- " << reported_std("micro_f1") << "\n";
  if (task == "aci") out << "  token accuracy " << reported("token_accuracy") << "\n";
  if (task == "rtp") out << "  weighted-F1 " << reported("weighted_f1") << "\n";
  out << std::defaultfloat;
}

// --- ACI -------------------------------------------------------------------------

SpanMatchReport evaluate_aci(Backbone& backbone, AciHead& head,
                             const std::vector<LabeledThread>& threads,
                             std::vector<BioSequence>* predictions) {
  SpanMatchReport report(head.schema());
  if (predictions) predictions->clear();
  for (const auto& lt : threads) {
    BioSequence pred = aci_decode(backbone, head, lt.st);
    report.add(lt.bio, pred);
    if (predictions) predictions->push_back(std::move(pred));
  }
  return report;
}

void train_downstream(Backbone& backbone, AciHead& head, const std::vector<LabeledThread>& train,
                      const std::vector<LabeledThread>& test, const TrainConfig& cfg,
                      RunLedger& ledger, const EpochHook& hook) {
  if (cfg.task != Task::Aci) throw ConfigError("ACI finetuning needs task = aci");
  cfg.validate();
  if (train.empty()) throw ConfigError("the train split is empty");
  ledger.task = "aci";
  ledger.last_k = cfg.report_last_epochs;
  ledger.class_names = head.schema().ctypes();

  std::vector<BatchItem> items;
  for (const auto& lt : train) items.push_back({lt.st.thread_id, lt.st.size()});
  set_frozen(backbone, cfg.freeze_backbone);
  Adam opt(join(backbone.parameters(), head.parameters()), cfg);
  opt.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = bucket_batches(items, cfg.tokens_per_batch, cfg.seed, epoch);
    const EpochStats stats = run_epoch(batches, opt, cfg.grad_accum, [&](std::size_t k) {
      const LabeledThread& lt = train[k];
      ad::Tape tape;
      const auto ids = backbone.vocab().encode(lt.st.tokens);
      ad::Var hidden = backbone.encode(tape, ids, lt.st.global_attention);
      ad::Var loss = head.loss(tape, hidden, lt.bio);
      tape.backward(loss);
      return loss.scalar();
    });
    const SpanMatchReport r = evaluate_aci(backbone, head, test);
    EpochRecord rec;
    rec.seed = static_cast<int>(cfg.seed);
    rec.epoch = epoch;
    rec.train_loss = stats.items ? stats.loss / static_cast<double>(stats.items) : 0.0;
    rec.micro_f1 = r.micro_f1();
    rec.token_accuracy = r.token_accuracy();
    for (const auto& c : r.classes) rec.class_f1.push_back(c.f1());
    if (hook && cfg.checkpoint_every_epoch) rec.checkpoint = hook(epoch, epoch == cfg.epochs);
    ledger.records.push_back(std::move(rec));
  }
  set_frozen(backbone, false);
}

// --- RTP -------------------------------------------------------------------------

std::vector<RtpExample> relation_examples(const std::vector<LabeledThread>& threads, RtpMode mode,
                                          const PromptOptions& opts, std::size_t* skipped) {
  std::vector<RtpExample> out;
  std::size_t missed = 0;
  for (const auto& lt : threads) {
    for (const auto& e : lt.relations) {
      const ComponentSpan* s = lt.component(e.source_id);
      const ComponentSpan* t = lt.component(e.target_id);
      if (!s || !t) {
        ++missed;
        continue;
      }
      RtpExample ex;
      ex.thread = &lt;
      ex.source = *s;
      ex.target = *t;
      ex.label = e.coarse_class;
      if (mode == RtpMode::Prompt) {
        try {
          ex.prompt = build_prompt(lt.st, *s, *t, opts, e.coarse_class);
        } catch (const PromptError&) {
          ++missed;
          continue;
        }
      }
      out.push_back(std::move(ex));
    }
  }
  if (skipped) *skipped = missed;
  return out;
}

namespace {

ad::Var example_scores(ad::Tape& tape, Backbone& backbone, RtpHead& head, const RtpExample& ex) {
  if (head.mode() == RtpMode::Prompt) return rtp_forward(tape, backbone, ex.prompt, head);
  PairInstance pair{&ex.thread->st, ex.source, ex.target, ex.label};
  return rtp_forward(tape, backbone, pair, head);
}

std::size_t example_length(const RtpExample& ex, RtpMode mode) {
  return mode == RtpMode::Prompt ? ex.prompt.context_tokens.size() + ex.prompt.prompt_tokens.size()
                                 : ex.thread->st.size();
}

int argmax(const Eigen::RowVectorXd& v) {
  Eigen::Index best;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

RelationReport evaluate_rtp(Backbone& backbone, RtpHead& head,
                            const std::vector<RtpExample>& examples, const LabelSchema& schema,
                            std::vector<int>* predictions) {
  std::vector<int> gold, pred;
  for (const auto& ex : examples) {
    ad::Tape tape;
    gold.push_back(ex.label);
    pred.push_back(argmax(example_scores(tape, backbone, head, ex).value().row(0)));
  }
  if (predictions) *predictions = pred;
  return relation_scores(gold, pred, schema);
}

void train_downstream(Backbone& backbone, RtpHead& head, const std::vector<RtpExample>& train,
                      const std::vector<RtpExample>& test, const LabelSchema& schema,
                      const TrainConfig& cfg, RunLedger& ledger, const EpochHook& hook) {
  if (cfg.task != Task::Rtp) throw ConfigError("relation finetuning needs task = rtp");
  cfg.validate();
  if (train.empty()) throw ConfigError("the train split is empty");
  if (head.num_classes() != schema.num_classes())
    throw ConfigError("relation head has " + std::to_string(head.num_classes()) +
                      " classes but schema " + schema.name() + " has " +
                      std::to_string(schema.num_classes()));
  ledger.task = "rtp";
  ledger.last_k = cfg.report_last_epochs;
  ledger.class_names = schema.relation_classes();

  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < train.size(); ++i)
    items.push_back({train[i].thread->st.thread_id + "/" + train[i].source.component_id,
                     example_length(train[i], head.mode())});
  set_frozen(backbone, cfg.freeze_backbone);
  Adam opt(join(backbone.parameters(), head.parameters()), cfg);
  opt.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = bucket_batches(items, cfg.tokens_per_batch, cfg.seed, epoch);
    const EpochStats stats = run_epoch(batches, opt, cfg.grad_accum, [&](std::size_t k) {
      ad::Tape tape;
      ad::Var scores = example_scores(tape, backbone, head, train[k]);
      const int label = train[k].label;
      ad::Var loss = ad::cross_entropy(scores, std::span<const int>(&label, 1));
      tape.backward(loss);
      return loss.scalar();
    });
    const RelationReport r = evaluate_rtp(backbone, head, test, schema);
    EpochRecord rec;
    rec.seed = static_cast<int>(cfg.seed);
    rec.epoch = epoch;
    rec.train_loss = stats.items ? stats.loss / static_cast<double>(stats.items) : 0.0;
    rec.micro_f1 = r.micro_f1();
    rec.weighted_f1 = r.weighted_f1();
    for (const auto& c : r.classes) rec.class_f1.push_back(c.f1());
    if (hook && cfg.checkpoint_every_epoch) rec.checkpoint = hook(epoch, epoch == cfg.epochs);
    ledger.records.push_back(std::move(rec));
  }
  set_frozen(backbone, false);
}

}  // namespace argmine
