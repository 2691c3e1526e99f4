#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "argmine/cli.hpp"
#include "argmine/config.hpp"
#include "argmine/errors.hpp"
#include "argmine/synth.hpp"

using namespace argmine;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "argmine");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("argmine-test-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("key=value parsing") {
  std::istringstream in("# comment\n a = 1 \nflag = yes\nname = two words # note\n\nx=0.5\n");
  const auto kv = KeyValues::parse(in);
  CHECK(kv.get_int("a", 0) == 1);
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_string("name", "") == "two words");
  CHECK(kv.get_double("x", 0) == 0.5);
  CHECK(kv.get_uint("missing", 9) == 9);
  std::istringstream bad("no equals sign\n");
  CHECK_THROWS_AS(KeyValues::parse(bad), ConfigError);
  std::istringstream bad_int("a = 1x\n");
  CHECK_THROWS_AS(KeyValues::parse(bad_int).get_int("a", 0), ConfigError);
}

TEST_CASE("manifest hash ignores the output directory and task keys override defaults") {
  KeyValues kv;
  kv.set("corpus", "c.jsonl");
  kv.set("output_dir", "a");
  kv.set("aci.epochs", "7");
  kv.set("rtp.learning_rate", "0.5");
  kv.set("split", "80:20, 50:50");
  const auto m1 = ExperimentManifest::parse(kv);
  kv.set("output_dir", "b");
  const auto m2 = ExperimentManifest::parse(kv);
  CHECK(m1.hash() == m2.hash());
  kv.set("seed", "3");
  CHECK(ExperimentManifest::parse(kv).hash() != m1.hash());
  CHECK(m1.train_config(Task::Aci).epochs == 7);
  CHECK(m1.train_config(Task::Rtp).learning_rate == 0.5);
  CHECK(m1.train_config(Task::Smlm).epochs == 10);
  CHECK(m1.split_names() == std::vector<std::string>{"80:20", "50:50"});
  KeyValues over;
  over.set("epochs", "2");
  CHECK(m1.train_config(Task::Aci, &over).epochs == 2);
  kv.set("rtp_mode", "telepathy");
  CHECK_THROWS_AS(ExperimentManifest::parse(kv), ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"train-aci"}) == 2);
  CHECK(run({"stats", "-m", "/nonexistent/manifest.txt"}) == 1);
  std::string help;
  CHECK(run({"--help"}, &help) == 0);
  CHECK(help.find("prepare-data") != std::string::npos);
}

TEST_CASE("prepare-data is idempotent and stamps its artifacts") {
  const auto dir = scratch_dir("prepare");
  REQUIRE(run({"synth", "-o", (dir / "data").string(), "--submissions", "6", "--seed", "2"}) == 0);
  {
    std::ofstream m(dir / "m.txt");
    m << "corpus = data/posts.jsonl\nannotations = data/annotations.jsonl\noutput_dir = out\nsplit_seeds = 2\n";
  }
  const std::string manifest = (dir / "m.txt").string();
  REQUIRE(run({"prepare-data", "-m", manifest}) == 0);
  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(dir / "out")) first[e.path().filename().string()] = slurp(e.path());
  REQUIRE(run({"prepare-data", "-m", manifest}) == 0);
  for (const auto& [name, text] : first) CHECK(slurp(dir / "out" / name) == text);
  CHECK(first.contains("splits.jsonl"));
  const auto hash = ExperimentManifest::load(manifest).hash();
  for (const auto& name : {"threads.jsonl", "labeled.jsonl", "splits.jsonl"}) {
    const auto& text = first[name];
    CHECK(text.starts_with("{\"artifact_meta\""));
    CHECK(text.substr(0, text.find('\n')).find(hash) != std::string::npos);
  }
  std::string out;
  CHECK(run({"stats", "-m", manifest}, &out) == 0);
  CHECK(slurp(dir / "out" / "stats.txt").find("B-C") != std::string::npos);
  CHECK(run({"mask", "-m", manifest, "--policy", "random15", "--seed", "4"}) == 0);
  CHECK(fs::exists(dir / "out" / "masked-random15.jsonl"));

  // Flag-only invocation without a manifest.
  CHECK(run({"prepare-data", "--input", (dir / "data" / "posts.jsonl").string(), "--output",
             (dir / "flags").string(), "--splits", "80:20,50:50", "--seeds", "2", "--max-len", "64"}) == 0);
  const auto splits = slurp(dir / "flags" / "splits.jsonl");
  CHECK(splits.find("\"50:50\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("synthetic generator") {
  SynthOptions o;
  o.submissions = 10;
  o.seed = 5;
  const auto a = generate_synthetic(o), b = generate_synthetic(o);
  CHECK(a.posts.size() == b.posts.size());
  CHECK(a.posts.back().body == b.posts.back().body);
  for (const auto& p : a.posts) CHECK_NOTHROW(validate_post(p));
  const auto& schema = LabelSchema::cmv();
  for (const auto& r : a.annotations.relations) CHECK_NOTHROW(group_relation(r.fine_type, schema));
  for (const auto& f : synth_filler_words())
    CHECK(std::find(synth_content_words().begin(), synth_content_words().end(), f) == synth_content_words().end());
  o.balanced = true;
  o.max_depth = 1;
  o.submissions = 30;
  const auto bal = generate_synthetic(o);
  std::map<int, int> counts;
  for (const auto& r : bal.annotations.relations) {
    const int c = group_relation(r.fine_type, schema);
    if (c != 0) ++counts[c];
  }
  CHECK(counts.size() == 4);
}
