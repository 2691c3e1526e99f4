#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "argmine/cli.hpp"
#include "argmine/corpus.hpp"
#include "argmine/crf.hpp"
#include "argmine/errors.hpp"
#include "argmine/evaluation.hpp"
#include "argmine/labels.hpp"
#include "argmine/markers.hpp"
#include "argmine/model.hpp"

namespace py = pybind11;
using namespace argmine;

namespace {

/// Posts given as dicts with post_id, author_id, body and optional parent_id,
/// ordered from the submission down to the leaf.
Thread thread_from(const std::vector<py::dict>& posts) {
  std::vector<Post> path;
  for (const auto& d : posts) {
    Post p;
    p.post_id = d["post_id"].cast<std::string>();
    p.author_id = d["author_id"].cast<std::string>();
    p.body = d["body"].cast<std::string>();
    if (d.contains("parent_id") && !d["parent_id"].is_none()) p.parent_id = d["parent_id"].cast<std::string>();
    p.is_submission = !p.parent_id;
    p.url_ranges = find_urls(p.body);
    if (!path.empty()) p.quote_ranges = detect_quotes(p.body, path.back().body);
    path.push_back(std::move(p));
  }
  std::string id = path.empty() ? "" : path.front().post_id;
  return make_thread(std::move(id), std::move(path));
}

SerializedThread serialize(const std::vector<py::dict>& posts, std::size_t max_len) {
  SerializeOptions o;
  o.max_len = max_len;
  return serialize_thread(thread_from(posts), o);
}

py::dict serialized_dict(const SerializedThread& st) {
  std::vector<std::string> flags;
  for (auto f : st.flags) flags.emplace_back(flag_name(f));
  py::dict d;
  d["tokens"] = st.tokens;
  d["flags"] = flags;
  d["global_attention"] = st.global_attention;
  d["post_starts"] = st.post_starts;
  return d;
}

crf::TransitionTable table(const Eigen::MatrixXd& trans, const Eigen::VectorXd& start, const Eigen::VectorXd& end,
                           int bio_types) {
  auto t = bio_types > 0 ? crf::TransitionTable::bio(bio_types)
                         : crf::TransitionTable::unconstrained(static_cast<int>(trans.rows()));
  if (t.trans.rows() != trans.rows() || trans.cols() != trans.rows() || start.size() != trans.rows() ||
      end.size() != trans.rows())
    throw ContractError("transition shapes do not match the label count");
  t.trans = trans;
  t.start = start;
  t.end = end;
  return t;
}

}  // namespace

PYBIND11_MODULE(_argmine, m) {
  m.doc() = "Argument mining over discussion threads";

  py::register_exception<Error>(m, "ArgmineError", PyExc_ValueError);

  m.def(
      "tokenize",
      [](const std::string& text) {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
        for (const auto& t : Tokenizer().tokenize(text)) out.emplace_back(t.text, t.start, t.end);
        return out;
      },
      py::arg("text"), "Splits text into (token, start, end) triples; whitespace joins the next token.");

  m.def(
      "serialize",
      [](const std::vector<py::dict>& posts, std::size_t max_len) { return serialized_dict(serialize(posts, max_len)); },
      py::arg("posts"), py::arg("max_len") = 4096);

  m.def(
      "find_markers",
      [](const std::vector<std::string>& tokens) {
        std::vector<py::dict> out;
        for (const auto& mm : find_markers(tokens, MarkerLexicon::default_lexicon())) {
          py::dict d;
          d["start"] = mm.token_start;
          d["end"] = mm.token_end;
          d["phrase"] = mm.phrase;
          d["category"] = mm.category;
          out.push_back(d);
        }
        return out;
      },
      py::arg("tokens"));

  m.def(
      "mask",
      [](const std::vector<py::dict>& posts, const std::string& policy, std::uint64_t seed) {
        const auto st = serialize(posts, 4096);
        const auto b = build_masked_batch(st, MarkerLexicon::default_lexicon(), parse_policy(policy), seed);
        py::dict d;
        d["tokens"] = st.tokens;
        d["input_tokens"] = b.input_tokens;
        d["targets"] = b.targets;
        return d;
      },
      py::arg("posts"), py::arg("policy") = "selective", py::arg("seed") = 0);

  m.def(
      "viterbi",
      [](const Eigen::MatrixXd& e, const Eigen::MatrixXd& trans, const Eigen::VectorXd& start,
         const Eigen::VectorXd& end, int bio_types) { return crf::viterbi(e, table(trans, start, end, bio_types)); },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("end"), py::arg("bio_types") = 0);

  m.def(
      "log_partition",
      [](const Eigen::MatrixXd& e, const Eigen::MatrixXd& trans, const Eigen::VectorXd& start,
         const Eigen::VectorXd& end, int bio_types) {
        return crf::log_partition(e, table(trans, start, end, bio_types));
      },
      py::arg("emissions"), py::arg("trans"), py::arg("start"), py::arg("end"), py::arg("bio_types") = 0);

  m.def(
      "span_scores",
      [](const BioSequence& gold, const BioSequence& pred, const std::string& schema) {
        const auto r = exact_span_scores(gold, pred, LabelSchema::by_name(schema));
        py::dict classes;
        for (const auto& c : r.classes) classes[py::str(c.name)] = py::make_tuple(c.tp, c.fp, c.fn);
        py::dict d;
        d["classes"] = classes;
        d["micro_f1"] = r.micro_f1();
        d["tokens_correct"] = r.tokens_correct;
        d["tokens_total"] = r.tokens_total;
        return d;
      },
      py::arg("gold"), py::arg("pred"), py::arg("schema") = "cmv");

  m.def(
      "group_relation",
      [](const std::string& fine, const std::string& schema) {
        const auto& s = LabelSchema::by_name(schema);
        return s.relation_classes()[static_cast<std::size_t>(group_relation(fine, s))];
      },
      py::arg("fine_type"), py::arg("schema") = "cmv");

  m.def(
      "build_prompt",
      [](const std::vector<py::dict>& posts, std::pair<std::size_t, std::size_t> source,
         std::pair<std::size_t, std::size_t> target, int mask_count, std::size_t max_positions) {
        const auto st = serialize(posts, max_positions);
        PromptOptions o;
        o.mask_count = mask_count;
        o.max_positions = max_positions;
        const auto inst = build_prompt(st, {"source", st.thread_id, source.first, source.second, 0},
                                       {"target", st.thread_id, target.first, target.second, 0}, o);
        py::dict d;
        d["tokens"] = inst.tokens();
        d["mask_positions"] = inst.mask_positions;
        d["context_dropped"] = inst.context_dropped;
        return d;
      },
      py::arg("posts"), py::arg("source"), py::arg("target"), py::arg("mask_count") = 3,
      py::arg("max_positions") = 4096, "Source and target are token ranges [start, end) of the serialized thread.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"argmine"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a CLI subcommand and returns (exit_code, stdout, stderr).");
}
