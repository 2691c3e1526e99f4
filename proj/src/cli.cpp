#include "argmine/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "argmine/checkpoint.hpp"
#include "argmine/corpus.hpp"
#include "argmine/errors.hpp"
#include "argmine/evaluation.hpp"
#include "argmine/labels.hpp"
#include "argmine/markers.hpp"
#include "argmine/rng.hpp"
#include "argmine/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace argmine {

// --- manifest ----------------------------------------------------------------------

ExperimentManifest ExperimentManifest::parse(const KeyValues& kv_in, const std::string& path,
                                             const std::map<std::string, std::string>& overrides) {
  KeyValues kv = kv_in;
  if (const char* dir = std::getenv("ARGMINE_OUTPUT_DIR"); dir && *dir) kv.set("output_dir", dir);
  if (const char* seed = std::getenv("ARGMINE_SEED"); seed && *seed) kv.set("seed", seed);
  for (const auto& [k, v] : overrides) kv.set(k, v);

  ExperimentManifest m;
  m.values = kv;
  m.path = path;
  const fs::path base = path.empty() ? fs::path(".") : fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
  };
  m.corpus = resolve(kv.get_string("corpus", ""));
  m.corpus_format = kv.get_string("corpus_format", m.corpus_format);
  m.annotations = resolve(kv.get_string("annotations", ""));
  m.schema = kv.get_string("schema", m.schema);
  m.lexicon = resolve(kv.get_string("lexicon", ""));
  m.output_dir = resolve(kv.get_string("output_dir", m.output_dir));
  m.split = kv.get_string("split", m.split);
  m.split_seeds = static_cast<int>(kv.get_int("split_seeds", m.split_seeds));
  m.seed = kv.get_uint("seed", m.seed);
  m.level = kv.get_string("level", m.level);
  m.max_len = kv.get_uint("max_len", m.level == "comment" ? 512 : m.max_len);
  m.user_vocab = static_cast<int>(kv.get_int("user_vocab", m.user_vocab));
  m.min_count = kv.get_uint("min_count", m.min_count);
  m.backbone_checkpoint = resolve(kv.get_string("backbone_checkpoint", ""));
  m.init_from = kv.get_string("init_from", m.init_from);
  if (m.init_from != "smlm" && m.init_from != "scratch") m.init_from = resolve(m.init_from);
  m.rtp_mode = kv.get_string("rtp_mode", m.rtp_mode);
  m.mask_count = static_cast<int>(kv.get_int("mask_count", m.mask_count));

  static const std::set<std::string> formats = {"posts", "convokit", "cmv-modes", "dr-inventor"};
  if (!formats.contains(m.corpus_format))
    throw ConfigError("unknown corpus_format '" + m.corpus_format + "'");
  if (m.level != "thread" && m.level != "comment")
    throw ConfigError("level must be thread or comment");
  if (m.rtp_mode != "prompt" && m.rtp_mode != "mean_pool")
    throw ConfigError("rtp_mode must be prompt or mean_pool");
  if (m.split_seeds < 1) throw ConfigError("split_seeds must be at least 1");
  LabelSchema::by_name(m.schema);
  if (m.split_names().empty()) throw ConfigError("split must name at least one ratio");
  return m;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  return parse(KeyValues::load(path), path);
}

std::vector<std::string> ExperimentManifest::split_names() const {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= split.size()) {
    std::size_t comma = split.find(',', pos);
    if (comma == std::string::npos) comma = split.size();
    std::string piece = split.substr(pos, comma - pos);
    piece.erase(0, piece.find_first_not_of(" \t"));
    piece.erase(piece.find_last_not_of(" \t") + 1);
    if (!piece.empty()) out.push_back(ratio_name(parse_ratio(piece)));
    pos = comma + 1;
  }
  return out;
}

std::string ExperimentManifest::hash() const {
  KeyValues kv = values;
  std::string text;
  for (const auto& [k, v] : kv.values())
    if (k != "output_dir") text += k + "=" + v + "\n";
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(text);
  return s.str();
}

BackboneConfig ExperimentManifest::backbone_config(Vocab vocab) const {
  BackboneConfig c = level == "comment" ? BackboneConfig::comment_level(std::move(vocab))
                                        : BackboneConfig::thread_level(std::move(vocab));
  c.hidden_size = static_cast<int>(values.get_int("hidden_size", c.hidden_size));
  c.layers = static_cast<int>(values.get_int("layers", c.layers));
  c.heads = static_cast<int>(values.get_int("heads", c.heads));
  c.ffn_size = static_cast<int>(values.get_int("ffn_size", c.ffn_size));
  c.max_positions = static_cast<int>(values.get_int("max_positions", c.max_positions));
  c.window_size = static_cast<int>(values.get_int("window_size", c.window_size));
  if (auto mode = values.get("attention_mode")) {
    if (*mode == "dense") c.attention_mode = AttentionMode::Dense;
    else if (*mode == "windowed_global") c.attention_mode = AttentionMode::WindowedGlobal;
    else throw ConfigError("attention_mode must be dense or windowed_global");
  }
  c.init_seed = values.get_uint("init_seed", seed);
  c.validate();
  return c;
}

TrainConfig ExperimentManifest::train_config(Task task, const KeyValues* overrides) const {
  const std::string prefix = std::string(task_name(task)) + ".";
  KeyValues kv;
  kv.set("seed", std::to_string(seed));
  if (level == "comment") kv.set("comment_level", "true");
  for (const auto& [k, v] : values.values())
    if (k.starts_with(prefix)) kv.set(k.substr(prefix.size()), v);
  if (overrides)
    for (const auto& [k, v] : overrides->values()) kv.set(k, v);
  kv.set("task", std::string(task_name(task)));
  return TrainConfig::from_key_values(kv, task);
}

SerializeOptions ExperimentManifest::serialize_options() const {
  SerializeOptions o;
  o.max_len = max_len;
  o.user_vocab = user_vocab;
  o.tokenizer.max_piece_chars =
      static_cast<std::size_t>(values.get_int("max_piece_chars", static_cast<long long>(o.tokenizer.max_piece_chars)));
  return o;
}

namespace {

// --- artifact helpers ------------------------------------------------------------------

struct Context {
  ExperimentManifest m;
  std::string hash;
  std::ostream& out;
  std::ostream& err;

  fs::path dir() const { return fs::path(m.output_dir); }
};

json meta_json(const Context& c, const std::string& artifact) {
  return {{"artifact", artifact},
          {"manifest_hash", c.hash},
          {"seed", c.m.seed},
          {"code_version", code_version()}};
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  return f;
}

std::ofstream open_jsonl(const Context& c, const fs::path& p) {
  auto f = open_out(p);
  f << json{{"artifact_meta", meta_json(c, p.filename().string())}}.dump() << "\n";
  return f;
}

std::ofstream open_text(const Context& c, const fs::path& p) {
  auto f = open_out(p);
  f << "# manifest " << c.hash << " seed " << c.m.seed << " version " << code_version() << "\n";
  return f;
}

std::ifstream open_in(const fs::path& p, const std::string& hint) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("missing " + p.string() + " (" + hint + ")");
  return f;
}

void require_path(const std::string& p, const std::string& key) {
  if (p.empty()) throw ConfigError("manifest key '" + key + "' is required");
  if (!fs::exists(p)) throw ConfigError("manifest '" + key + "' refers to missing path " + p);
}

MarkerLexicon load_lexicon(const ExperimentManifest& m) {
  if (m.lexicon.empty()) return MarkerLexicon::default_lexicon();
  require_path(m.lexicon, "lexicon");
  return MarkerLexicon::load(m.lexicon);
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// --- corpus ingestion -------------------------------------------------------------------

std::vector<fs::path> files_in(const std::string& p, const std::string& ext) {
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else {
    out.emplace_back(p);
  }
  return out;
}

void append(ParsedCorpus& into, ParsedCorpus part) {
  into.posts.insert(into.posts.end(), std::make_move_iterator(part.posts.begin()),
                    std::make_move_iterator(part.posts.end()));
  auto& a = into.annotations;
  a.ranges.insert(a.ranges.end(), part.annotations.ranges.begin(), part.annotations.ranges.end());
  a.relations.insert(a.relations.end(), part.annotations.relations.begin(),
                     part.annotations.relations.end());
}

ParsedCorpus ingest(const ExperimentManifest& m, bool& has_annotations) {
  require_path(m.corpus, "corpus");
  ParsedCorpus pc;
  has_annotations = false;
  if (m.corpus_format == "posts" || m.corpus_format == "convokit") {
    for (const auto& f : files_in(m.corpus, ".jsonl")) {
      auto in = open_in(f, "corpus");
      auto posts = m.corpus_format == "posts" ? read_posts_jsonl(in) : read_convokit_jsonl(in);
      pc.posts.insert(pc.posts.end(), posts.begin(), posts.end());
    }
  } else if (m.corpus_format == "cmv-modes") {
    for (const auto& f : files_in(m.corpus, ".xml")) {
      auto in = open_in(f, "corpus");
      append(pc, read_cmv_modes(in, f.stem().string()));
    }
    has_annotations = true;
  } else {
    for (const auto& f : files_in(m.corpus, ".txt")) {
      auto txt = open_in(f, "corpus");
      std::ostringstream buf;
      buf << txt.rdbuf();
      fs::path ann_path = f;
      ann_path.replace_extension(".ann");
      auto ann = open_in(ann_path, "brat annotations next to " + f.string());
      append(pc, read_dr_inventor(buf.str(), ann, f.stem().string(), m.max_len,
                                  m.serialize_options().tokenizer));
    }
    has_annotations = true;
  }
  if (!m.annotations.empty()) {
    require_path(m.annotations, "annotations");
    auto in = open_in(m.annotations, "annotations");
    Annotations extra = read_annotations_jsonl(in);
    pc.annotations.ranges.insert(pc.annotations.ranges.end(), extra.ranges.begin(), extra.ranges.end());
    pc.annotations.relations.insert(pc.annotations.relations.end(), extra.relations.begin(),
                                    extra.relations.end());
    has_annotations = true;
  }
  return pc;
}

// Restricts annotations to the posts of one thread.
Annotations annotations_for(const Thread& t, const Annotations& all,
                            const std::map<std::string, std::vector<std::size_t>>& ranges_by_post) {
  Annotations a;
  std::set<std::string> ids;
  for (const auto& p : t.posts) {
    auto it = ranges_by_post.find(p.post_id);
    if (it == ranges_by_post.end()) continue;
    for (std::size_t i : it->second) {
      a.ranges.push_back(all.ranges[i]);
      ids.insert(all.ranges[i].component_id);
    }
  }
  for (const auto& r : all.relations)
    if (ids.contains(r.source_id) && ids.contains(r.target_id)) a.relations.push_back(r);
  return a;
}

// --- loading prepared data ------------------------------------------------------------

std::vector<SerializedThread> load_threads(const Context& c) {
  auto in = open_in(c.dir() / "threads.jsonl", "run prepare-data first");
  return read_serialized_jsonl(in);
}

std::vector<LabeledThread> load_labeled(const Context& c) {
  auto in = open_in(c.dir() / "labeled.jsonl", "run prepare-data on an annotated corpus first");
  return read_labeled_jsonl(in);
}

std::vector<SplitPlan> load_splits(const Context& c, const std::string& split_name) {
  auto in = open_in(c.dir() / "splits.jsonl", "run prepare-data first");
  std::vector<SplitPlan> plans;
  for (auto& p : read_splits_jsonl(in))
    if (p.split_name == split_name) plans.push_back(std::move(p));
  if (plans.empty()) throw SplitError("no split plans named " + split_name);
  return plans;
}

Vocab load_vocab(const Context& c) {
  auto in = open_in(c.dir() / "vocab.json", "run prepare-data first");
  json j = json::parse(in);
  return Vocab(j.at("tokens").get<std::vector<std::string>>());
}

std::unique_ptr<ToyTransformer> fresh_backbone(const Context& c) {
  if (!c.m.backbone_checkpoint.empty()) {
    require_path(c.m.backbone_checkpoint, "backbone_checkpoint");
    return load_checkpoint(c.m.backbone_checkpoint).backbone;
  }
  return std::make_unique<ToyTransformer>(c.m.backbone_config(load_vocab(c)));
}

std::unique_ptr<ToyTransformer> downstream_backbone(const Context& c) {
  std::string path;
  if (c.m.init_from == "smlm") {
    std::ifstream in(c.dir() / "smlm" / "summary.json");
    if (in) path = json::parse(in).at("default_checkpoint").get<std::string>();
    if (path.empty()) c.err << "note: no sMLM checkpoint found, starting from a fresh backbone\n";
  } else if (c.m.init_from != "scratch") {
    require_path(c.m.init_from, "init_from");
    path = c.m.init_from;
  }
  if (path.empty()) return fresh_backbone(c);
  return load_checkpoint(path).backbone;
}

void partition(const std::vector<LabeledThread>& all, const SplitPlan& plan,
               std::vector<LabeledThread>& train, std::vector<LabeledThread>& test) {
  for (const auto& lt : all) {
    auto it = plan.assignment.find(lt.st.thread_id);
    if (it == plan.assignment.end()) continue;
    (it->second == SplitPart::Train ? train : test).push_back(lt);
  }
}

GlobalPolicy global_policy(const Context& c, Task task) {
  if (auto p = c.m.values.get("global_policy")) {
    if (*p == "user_tokens") return GlobalPolicy::UserTokens;
    if (*p == "none") return GlobalPolicy::None;
    throw ConfigError("global_policy must be user_tokens or none");
  }
  return task == Task::Rtp && c.m.rtp_mode == "prompt" ? GlobalPolicy::None : GlobalPolicy::UserTokens;
}

void apply_policy(std::vector<LabeledThread>& threads, GlobalPolicy policy) {
  for (auto& lt : threads) lt.st = set_global_attention(lt.st, policy);
}

CheckpointMeta checkpoint_meta(const Context& c, Task task, int epoch, bool is_default) {
  CheckpointMeta meta;
  meta.manifest_hash = c.hash;
  meta.code_version = code_version();
  meta.seed = c.m.seed;
  meta.lexicon_hash = hex(load_lexicon(c.m).hash());
  meta.tokenizer_fingerprint = Tokenizer(c.m.serialize_options().tokenizer).fingerprint();
  meta.task = std::string(task_name(task));
  meta.epoch = epoch;
  meta.default_for_downstream = is_default;
  return meta;
}

std::string save_view(const Context& c, ToyTransformer& backbone, AciHead* aci, RtpHead* rtp,
                      Task task, int epoch, bool is_default, const fs::path& path) {
  fs::create_directories(path.parent_path());
  save_checkpoint(path.string(), ModelView{&backbone, aci, rtp, c.m.schema,
                                           checkpoint_meta(c, task, epoch, is_default)});
  return path.string();
}

TrainConfig train_config(const Context& c, Task task, const std::string& config_path,
                         std::optional<std::uint64_t> seed) {
  std::optional<KeyValues> overrides;
  if (!config_path.empty()) overrides = KeyValues::load(config_path);
  TrainConfig cfg = c.m.train_config(task, overrides ? &*overrides : nullptr);
  if (seed) cfg.seed = *seed;
  return cfg;
}

// --- subcommands -------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, const SynthOptions& opts, std::ostream& out) {
  const SynthCorpus sc = generate_synthetic(opts);
  fs::create_directories(out_dir);
  {
    auto f = open_out(fs::path(out_dir) / "posts.jsonl");
    write_posts_jsonl(f, sc.posts);
  }
  {
    auto f = open_out(fs::path(out_dir) / "annotations.jsonl");
    write_annotations_jsonl(f, sc.annotations);
  }
  out << "wrote " << sc.posts.size() << " posts, " << sc.annotations.ranges.size()
      << " component ranges and " << sc.annotations.relations.size() << " relations to " << out_dir
      << "\n";
  return 0;
}

int cmd_prepare(Context& c) {
  bool has_annotations = false;
  ParsedCorpus pc = ingest(c.m, has_annotations);
  const SerializeOptions so = c.m.serialize_options();
  const LabelSchema& schema = LabelSchema::by_name(c.m.schema);
  std::vector<Thread> threads = extract_threads(pc.posts);

  if (c.m.level == "comment") {
    std::vector<Thread> singles;
    std::set<std::string> seen;
    for (const auto& t : threads)
      for (const auto& p : t.posts)
        if (seen.insert(p.post_id).second) {
          Thread s = make_thread(t.thread_id + "#" + p.post_id, {p});
          s.submission_id = t.submission_id;
          singles.push_back(std::move(s));
        }
    threads = std::move(singles);
  }

  std::map<std::string, std::vector<std::size_t>> ranges_by_post;
  for (std::size_t i = 0; i < pc.annotations.ranges.size(); ++i)
    ranges_by_post[pc.annotations.ranges[i].post_id].push_back(i);

  std::vector<std::vector<std::string>> sequences;
  std::size_t warnings = 0, labeled = 0;
  {
    auto tf = open_jsonl(c, c.dir() / "threads.jsonl");
    std::ofstream lf;
    if (has_annotations) lf = open_jsonl(c, c.dir() / "labeled.jsonl");
    for (const auto& t : threads) {
      SerializedThread st = serialize_thread(t, so);
      write_serialized_jsonl(tf, st);
      sequences.push_back(st.tokens);
      if (has_annotations) {
        std::vector<std::string> w;
        LabeledThread lt = label_thread(t, annotations_for(t, pc.annotations, ranges_by_post), schema, so, &w);
        warnings += w.size();
        write_labeled_jsonl(lf, lt);
        ++labeled;
      }
    }
  }
  sequences.push_back({" said"});
  const Vocab vocab = Vocab::build(sequences, c.m.user_vocab, c.m.min_count);
  {
    auto f = open_out(c.dir() / "vocab.json");
    f << json{{"artifact_meta", meta_json(c, "vocab.json")}, {"tokens", vocab.tokens()}}.dump(1) << "\n";
  }
  std::size_t plans = 0;
  {
    auto f = open_jsonl(c, c.dir() / "splits.jsonl");
    if (threads.size() >= 2) {
      std::set<std::string> groups;
      for (const auto& t : threads) groups.insert(t.submission_id);
      if (groups.size() >= 2) {
        for (const auto& name : c.m.split_names())
          for (const auto& plan : make_splits(threads, parse_ratio(name), c.m.split_seeds, c.m.seed)) {
            write_split_jsonl(f, plan);
            ++plans;
          }
      } else {
        c.err << "note: a single submission cannot be split; no split plans written\n";
      }
    }
  }
  {
    auto f = open_out(c.dir() / "prepare.json");
    f << json{{"artifact_meta", meta_json(c, "prepare.json")},
              {"posts", pc.posts.size()},
              {"threads", threads.size()},
              {"labeled_threads", labeled},
              {"alignment_warnings", warnings},
              {"vocab_size", vocab.size()},
              {"split_plans", plans}}
             .dump(1)
      << "\n";
  }
  c.out << "posts " << pc.posts.size() << ", threads " << threads.size() << ", labeled " << labeled
        << ", vocab " << vocab.size() << ", split plans " << plans << "\n";
  return 0;
}

int cmd_mask(Context& c, const std::string& policy_name_arg) {
  const MaskPolicy policy = parse_policy(policy_name_arg);
  const MarkerLexicon lex = load_lexicon(c.m);
  const auto threads = load_threads(c);
  auto f = open_jsonl(c, c.dir() / ("masked-" + std::string(argmine::policy_name(policy)) + ".jsonl"));
  std::size_t masked = 0;
  for (const auto& st : threads) {
    const MaskedBatch mb = build_masked_batch(st, lex, policy, c.m.seed);
    json targets = json::object();
    for (const auto& [pos, tok] : mb.targets) targets[std::to_string(pos)] = tok;
    f << json{{"thread_id", st.thread_id}, {"policy", policy_name(policy)},
              {"input_tokens", mb.input_tokens}, {"targets", targets}}
             .dump()
      << "\n";
    masked += mb.targets.size();
  }
  c.out << "masked " << masked << " tokens in " << threads.size() << " threads\n";
  return 0;
}

int cmd_pretrain(Context& c, const std::string& config_path, std::optional<std::uint64_t> seed) {
  const TrainConfig cfg = train_config(c, Task::Smlm, config_path, seed);
  const MarkerLexicon lex = load_lexicon(c.m);
  auto threads = load_threads(c);
  for (auto& st : threads) st = set_global_attention(st, GlobalPolicy::UserTokens);
  auto backbone = fresh_backbone(c);
  const fs::path dir = c.dir() / "smlm";
  {
    auto f = open_text(c, dir / "train.cfg");
    cfg.write(f);
  }
  const SmlmResult r = train_smlm(*backbone, threads, lex, cfg, [&](int epoch, bool is_default) {
    return save_view(c, *backbone, nullptr, nullptr, Task::Smlm, epoch, is_default,
                     dir / ("epoch-" + std::to_string(epoch) + ".ckpt"));
  });
  std::string default_ckpt;
  {
    auto f = open_jsonl(c, dir / "ledger.jsonl");
    f << json{{"epoch", 0}, {"heldout_accuracy", r.initial.accuracy},
              {"heldout_perplexity", r.initial.perplexity}, {"heldout_masked", r.initial.masked}}
             .dump()
      << "\n";
    for (const auto& e : r.epochs) {
      f << json{{"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"masked_tokens", e.masked_tokens},
                {"heldout_accuracy", e.heldout.accuracy},
                {"heldout_perplexity", e.heldout.perplexity},
                {"skipped_batches", e.skipped_batches},
                {"skipped_items", e.skipped_items},
                {"checkpoint", e.checkpoint},
                {"default", e.epoch == r.default_epoch}}
               .dump()
        << "\n";
      if (e.epoch == r.default_epoch) default_ckpt = e.checkpoint;
    }
  }
  if (default_ckpt.empty() && cfg.epochs == 0)
    default_ckpt = save_view(c, *backbone, nullptr, nullptr, Task::Smlm, 0, true, dir / "epoch-0.ckpt");
  {
    auto f = open_out(dir / "summary.json");
    f << json{{"artifact_meta", meta_json(c, "summary.json")},
              {"default_epoch", r.default_epoch},
              {"default_checkpoint", default_ckpt},
              {"heldout_threads", r.heldout_ids.size()},
              {"initial_perplexity", r.initial.perplexity},
              {"final_perplexity", r.epochs.empty() ? r.initial.perplexity : r.epochs.back().heldout.perplexity}}
             .dump(1)
      << "\n";
  }
  c.out << "sMLM: held-out perplexity " << r.initial.perplexity << " -> "
        << (r.epochs.empty() ? r.initial.perplexity : r.epochs.back().heldout.perplexity)
        << ", default checkpoint " << (default_ckpt.empty() ? "(none)" : default_ckpt) << "\n";
  return 0;
}

void write_ledger_outputs(const Context& c, const RunLedger& ledger, const fs::path& dir) {
  {
    auto f = open_jsonl(c, dir / "ledger.jsonl");
    ledger.write_jsonl(f, c.hash);
  }
  {
    auto f = open_text(c, dir / "summary.txt");
    ledger.write_summary(f);
  }
  {
    auto f = open_out(dir / "f1.svg");
    std::ostringstream body;
    write_epoch_plot_svg(body, {{ledger.task + " micro-F1", ledger.epoch_mean(), ledger.epoch_std()}},
                         ledger.task + " test micro-F1 by epoch");
    std::string svg = body.str();
    const auto pos = svg.find('\n');
    f << svg.substr(0, pos + 1) << "<!-- manifest " << c.hash << " seed " << c.m.seed
      << " version " << code_version() << " -->\n"
      << svg.substr(pos + 1);
  }
  ledger.write_summary(c.out);
}

int cmd_train_aci(Context& c, const std::string& config_path, std::optional<std::uint64_t> seed,
                  const std::string& split) {
  const TrainConfig base = train_config(c, Task::Aci, config_path, seed);
  auto all = load_labeled(c);
  apply_policy(all, global_policy(c, Task::Aci));
  const LabelSchema& schema = LabelSchema::by_name(c.m.schema);
  const fs::path dir = c.dir() / "aci";
  {
    auto f = open_text(c, dir / "train.cfg");
    base.write(f);
  }
  RunLedger ledger;
  for (const auto& plan : load_splits(c, split)) {
    std::vector<LabeledThread> train, test;
    partition(all, plan, train, test);
    TrainConfig cfg = base;
    cfg.seed = base.seed + plan.seed;
    auto backbone = downstream_backbone(c);
    AciHead head(backbone->config().hidden_size, schema, cfg.seed);
    const fs::path sdir = dir / ("split-" + std::to_string(plan.seed));
    train_downstream(*backbone, head, train, test, cfg, ledger, [&](int epoch, bool last) {
      if (!last) return std::string();
      return save_view(c, *backbone, &head, nullptr, Task::Aci, epoch, false, sdir / "final.ckpt");
    });
    for (auto& r : ledger.records)
      if (r.seed == static_cast<int>(cfg.seed)) r.seed = static_cast<int>(plan.seed);
    if (cfg.epochs == 0) save_view(c, *backbone, &head, nullptr, Task::Aci, 0, false, sdir / "final.ckpt");
  }
  write_ledger_outputs(c, ledger, dir);
  return 0;
}

RtpMode rtp_mode(const Context& c) {
  return c.m.rtp_mode == "prompt" ? RtpMode::Prompt : RtpMode::MeanPool;
}

PromptOptions prompt_options(const Context& c, int max_positions) {
  PromptOptions o;
  o.mask_count = c.m.mask_count;
  o.max_positions = static_cast<std::size_t>(max_positions);
  o.global = global_policy(c, Task::Rtp);
  return o;
}

int cmd_train_rtp(Context& c, const std::string& config_path, std::optional<std::uint64_t> seed,
                  const std::string& split) {
  const TrainConfig base = train_config(c, Task::Rtp, config_path, seed);
  auto all = load_labeled(c);
  apply_policy(all, global_policy(c, Task::Rtp));
  const LabelSchema& schema = LabelSchema::by_name(c.m.schema);
  const fs::path dir = c.dir() / "rtp";
  {
    auto f = open_text(c, dir / "train.cfg");
    base.write(f);
  }
  RunLedger ledger;
  for (const auto& plan : load_splits(c, split)) {
    std::vector<LabeledThread> train, test;
    partition(all, plan, train, test);
    TrainConfig cfg = base;
    cfg.seed = base.seed + plan.seed;
    auto backbone = downstream_backbone(c);
    const PromptOptions po = prompt_options(c, backbone->config().max_positions);
    std::size_t skipped = 0;
    const auto train_ex = relation_examples(train, rtp_mode(c), po, &skipped);
    const auto test_ex = relation_examples(test, rtp_mode(c), po, &skipped);
    if (skipped > 0) c.err << "note: " << skipped << " relation edges could not be used\n";
    RtpHead head(rtp_mode(c), backbone->config().hidden_size, schema.num_classes(), c.m.mask_count,
                 cfg.seed);
    const fs::path sdir = dir / ("split-" + std::to_string(plan.seed));
    train_downstream(*backbone, head, train_ex, test_ex, schema, cfg, ledger, [&](int epoch, bool last) {
      if (!last) return std::string();
      return save_view(c, *backbone, nullptr, &head, Task::Rtp, epoch, false, sdir / "final.ckpt");
    });
    for (auto& r : ledger.records)
      if (r.seed == static_cast<int>(cfg.seed)) r.seed = static_cast<int>(plan.seed);
    if (cfg.epochs == 0) save_view(c, *backbone, nullptr, &head, Task::Rtp, 0, false, sdir / "final.ckpt");
  }
  write_ledger_outputs(c, ledger, dir);
  return 0;
}

const SplitPlan& pick_plan(const std::vector<SplitPlan>& plans, std::optional<std::uint64_t> seed) {
  if (!seed) return plans.front();
  for (const auto& p : plans)
    if (p.seed == *seed) return p;
  throw SplitError("no split plan with seed " + std::to_string(*seed));
}

int cmd_evaluate(Context& c, const std::string& task_arg, const std::string& checkpoint,
                 const std::string& split, std::optional<std::uint64_t> split_seed) {
  const Task task = parse_task(task_arg);
  if (task == Task::Smlm) throw ConfigError("evaluate supports --task aci or rtp");
  ModelBundle b = load_checkpoint(checkpoint);
  auto all = load_labeled(c);
  apply_policy(all, global_policy(c, task));
  const auto plans = load_splits(c, split);
  const SplitPlan& plan = pick_plan(plans, split_seed);
  std::vector<LabeledThread> train, test;
  partition(all, plan, train, test);
  const LabelSchema& schema = LabelSchema::by_name(b.schema.empty() ? c.m.schema : b.schema);
  const fs::path path = c.dir() / ("evaluate-" + std::string(task_name(task)) + ".json");
  json report = {{"artifact_meta", meta_json(c, path.filename().string())},
                 {"checkpoint", checkpoint},
                 {"split", plan.split_name},
                 {"split_seed", plan.seed}};
  std::ostringstream table;
  if (task == Task::Aci) {
    if (!b.aci) throw ConfigError("checkpoint " + checkpoint + " has no ACI head");
    const SpanMatchReport r = evaluate_aci(*b.backbone, *b.aci, test);
    report["micro_f1"] = r.micro_f1();
    report["token_accuracy"] = r.token_accuracy();
    for (const auto& cl : r.classes) report["classes"][cl.name] = {{"p", cl.precision()}, {"r", cl.recall()}, {"f1", cl.f1()}};
    write_span_table(table, r, "ACI exact-span scores (" + plan.split_name + ", split seed " + std::to_string(plan.seed) + ")");
  } else {
    if (!b.rtp) throw ConfigError("checkpoint " + checkpoint + " has no relation head");
    PromptOptions po = prompt_options(c, b.backbone->config().max_positions);
    po.mask_count = b.rtp->mask_count();
    const auto ex = relation_examples(test, b.rtp->mode(), po);
    const RelationReport r = evaluate_rtp(*b.backbone, *b.rtp, ex, schema);
    report["micro_f1"] = r.micro_f1();
    report["weighted_f1"] = r.weighted_f1();
    report["edges"] = r.total;
    for (const auto& cl : r.classes) report["classes"][cl.name] = {{"p", cl.precision()}, {"r", cl.recall()}, {"f1", cl.f1()}};
    write_relation_table(table, r, "Relation scores (" + plan.split_name + ", split seed " + std::to_string(plan.seed) + ")");
  }
  {
    auto f = open_out(path);
    f << report.dump(1) << "\n";
  }
  c.out << table.str();
  return 0;
}

int cmd_analyze(Context& c, const std::string& kind, const std::string& checkpoint,
                const std::string& split, std::optional<std::uint64_t> split_seed,
                const std::string& unit) {
  ModelBundle b = load_checkpoint(checkpoint);
  const bool distance = kind == "distance";
  if (!distance && kind != "marker-vicinity")
    throw ConfigError("analyze --kind must be distance or marker-vicinity");
  const Task task = distance ? Task::Rtp : Task::Aci;
  auto all = load_labeled(c);
  apply_policy(all, global_policy(c, task));
  const auto plans = load_splits(c, split);
  const SplitPlan& plan = pick_plan(plans, split_seed);
  std::vector<LabeledThread> train, test;
  partition(all, plan, train, test);
  std::ostringstream table;
  if (distance) {
    if (!b.rtp) throw ConfigError("distance analysis needs a checkpoint with a relation head");
    PromptOptions po = prompt_options(c, b.backbone->config().max_positions);
    po.mask_count = b.rtp->mask_count();
    const auto ex = relation_examples(test, b.rtp->mode(), po);
    const LabelSchema& schema = LabelSchema::by_name(b.schema);
    std::vector<int> pred;
    evaluate_rtp(*b.backbone, *b.rtp, ex, schema, &pred);
    std::vector<EdgePrediction> edges;
    for (std::size_t i = 0; i < ex.size(); ++i)
      edges.push_back({ex[i].thread, ex[i].source.component_id, ex[i].target.component_id,
                       ex[i].label, pred[i]});
    const DistanceProfile p = distance_error_profile(edges, default_distance_bins(), parse_unit(unit));
    write_distance_table(table, p);
  } else {
    if (!b.aci) throw ConfigError("marker-vicinity analysis needs a checkpoint with an ACI head");
    std::vector<BioSequence> preds;
    evaluate_aci(*b.backbone, *b.aci, test, &preds);
    const VicinityReport r = marker_vicinity_report(test, preds, load_lexicon(c.m));
    table << "components near a marker: " << r.near_count << ", far: " << r.far_count << "\n";
    write_span_table(table, r.near, "Near markers");
    write_span_table(table, r.far, "Far from markers");
  }
  {
    auto f = open_text(c, c.dir() / ("analyze-" + kind + ".txt"));
    f << table.str();
  }
  c.out << table.str();
  return 0;
}

int cmd_stats(Context& c, const std::string& input) {
  std::vector<LabeledThread> threads;
  if (input.empty()) {
    threads = load_labeled(c);
  } else {
    auto in = open_in(input, "labeled threads");
    threads = read_labeled_jsonl(in);
  }
  const LabelSchema& schema = LabelSchema::by_name(threads.empty() ? c.m.schema : threads.front().schema);
  const DatasetStats s = dataset_stats(threads, schema);
  std::ostringstream table;
  write_stats_table(table, s);
  {
    auto f = open_text(c, c.dir() / "stats.txt");
    f << table.str();
  }
  c.out << table.str();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Argument mining over discussion threads: data preparation, selective masked-LM "
               "pretraining, component identification and relation prediction"};
  app.require_subcommand(1);
  std::string manifest_path, config_path, split, checkpoint, task = "aci", kind, unit = "tokens",
                                                       policy = "selective", input, synth_out;
  std::optional<std::uint64_t> seed, split_seed;
  SynthOptions synth;

  // Command-line values that take precedence over manifest keys.
  std::map<std::string, std::string> overrides;
  auto override_path = [&](CLI::App* s, const char* flag, const char* key, const char* help) {
    s->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = fs::absolute(v).string(); }, help);
  };
  auto override_value = [&](CLI::App* s, const char* flag, const char* key, const char* help) {
    s->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };

  auto with_manifest = [&](CLI::App* s) {
    s->add_option("-m,--manifest", manifest_path, "Experiment manifest file")->required();
  };
  auto* prepare = app.add_subcommand("prepare-data", "Extract, serialize, label and split a corpus");
  prepare->add_option("-m,--manifest", manifest_path, "Experiment manifest file");
  override_path(prepare, "--input", "corpus", "Corpus file");
  override_path(prepare, "--annotations", "annotations", "Standoff annotation file");
  override_path(prepare, "--output", "output_dir", "Output directory");
  override_value(prepare, "--max-len", "max_len", "Token budget per serialized thread");
  override_value(prepare, "--splits", "split", "Comma-separated split ratios, e.g. 80:20,50:50");
  override_value(prepare, "--seeds", "split_seeds", "Split plans per ratio");
  override_value(prepare, "--format", "corpus_format", "posts, convokit, cmv-modes or dr-inventor");
  auto* mask = app.add_subcommand("mask", "Write masked inputs for inspection");
  with_manifest(mask);
  mask->add_option("--policy", policy, "selective or random15");
  override_path(mask, "--lexicon", "lexicon", "Marker lexicon file");
  override_value(mask, "--seed", "seed", "Masking seed (random15)");
  auto* pretrain = app.add_subcommand("pretrain-smlm", "Selective masked-LM pretraining");
  auto* train_aci = app.add_subcommand("train-aci", "Finetune component identification");
  auto* train_rtp = app.add_subcommand("train-rtp", "Finetune relation type prediction");
  for (auto* s : {pretrain, train_aci, train_rtp}) {
    with_manifest(s);
    s->add_option("--config", config_path, "Training config file (key = value)");
    s->add_option("--seed", seed, "Training seed");
  }
  for (auto* s : {train_aci, train_rtp}) s->add_option("--split", split, "Split name, e.g. 80:20");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a test split");
  with_manifest(evaluate);
  evaluate->add_option("--task", task, "aci or rtp")->required();
  auto* analyze = app.add_subcommand("analyze", "Error analyses of a checkpoint");
  with_manifest(analyze);
  analyze->add_option("--kind", kind, "distance or marker-vicinity")->required();
  analyze->add_option("--unit", unit, "Distance unit: tokens, components or posts");
  for (auto* s : {evaluate, analyze}) {
    s->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    s->add_option("--split", split, "Split name, e.g. 80:20");
    s->add_option("--split-seed", split_seed, "Which split plan to use (default: the first)");
  }
  auto* stats = app.add_subcommand("stats", "Label and relation counts of a labeled corpus");
  with_manifest(stats);
  stats->add_option("--input", input, "Labeled threads file (default: prepared data)");
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic marker-governed corpus");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--submissions", synth.submissions, "Number of discussion trees");
  synth_cmd->add_option("--max-children", synth.max_children, "Replies per post");
  synth_cmd->add_option("--max-depth", synth.max_depth, "Reply levels");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_flag("--balanced", synth.balanced, "Equal relation class counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth_out, synth, out);
    const KeyValues kv = manifest_path.empty() ? KeyValues() : KeyValues::load(manifest_path);
    Context c{ExperimentManifest::parse(kv, manifest_path, overrides), "", out, err};
    c.hash = c.m.hash();
    if (split.empty()) split = c.m.split_names().front();
    if (prepare->parsed()) return cmd_prepare(c);
    if (mask->parsed()) return cmd_mask(c, policy);
    if (pretrain->parsed()) return cmd_pretrain(c, config_path, seed);
    if (train_aci->parsed()) return cmd_train_aci(c, config_path, seed, split);
    if (train_rtp->parsed()) return cmd_train_rtp(c, config_path, seed, split);
    if (evaluate->parsed()) return cmd_evaluate(c, task, checkpoint, split, split_seed);
    if (analyze->parsed()) return cmd_analyze(c, kind, checkpoint, split, split_seed, unit);
    if (stats->parsed()) return cmd_stats(c, input);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "usage error: no subcommand\n";
  return 2;
}

}  // namespace argmine
