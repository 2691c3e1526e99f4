#include "argmine/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "argmine/errors.hpp"

namespace argmine {

namespace {

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; }

}  // namespace

double ClassScore::precision() const { return ratio(tp, tp + fp); }
double ClassScore::recall() const { return ratio(tp, tp + fn); }
double ClassScore::f1() const { return ratio(2 * tp, 2 * tp + fp + fn); }

// --- spans ---------------------------------------------------------------------

SpanMatchReport::SpanMatchReport(const LabelSchema& schema) {
  for (const auto& c : schema.ctypes()) classes.push_back({c});
}

void SpanMatchReport::add(const BioSequence& gold, const BioSequence& pred) {
  if (gold.size() != pred.size())
    throw InputError("gold and predicted sequences differ in length (" +
                     std::to_string(gold.size()) + " vs " + std::to_string(pred.size()) + ")");
  const int n_types = static_cast<int>(classes.size());
  for (const auto* seq : {&gold, &pred})
    for (int l : *seq)
      if (l < 0 || LabelSchema::type_of(l) >= n_types)
        throw InputError("label " + std::to_string(l) + " outside the schema");

  const auto gold_spans = bio_to_spans(gold);
  const auto pred_spans = bio_to_spans(pred);
  const std::set<LabeledSpan> gold_set(gold_spans.begin(), gold_spans.end());
  std::set<LabeledSpan> matched;
  for (const auto& s : pred_spans) {
    auto& c = classes[static_cast<std::size_t>(s.ctype)];
    if (gold_set.contains(s) && matched.insert(s).second) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& s : gold_set)
    if (!matched.contains(s)) ++classes[static_cast<std::size_t>(s.ctype)].fn;

  const BioSequence fixed = repair_bio(pred);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool same = gold[i] == pred[i] || (LabelSchema::is_begin(gold[i]) && fixed[i] == gold[i]);
    tokens_correct += same ? 1 : 0;
  }
  tokens_total += gold.size();
}

void SpanMatchReport::merge(const SpanMatchReport& other) {
  if (classes.empty()) classes = other.classes;
  else {
    if (other.classes.size() != classes.size()) throw InputError("cannot merge reports of different schemas");
    for (std::size_t i = 0; i < classes.size(); ++i) {
      classes[i].tp += other.classes[i].tp;
      classes[i].fp += other.classes[i].fp;
      classes[i].fn += other.classes[i].fn;
    }
  }
  tokens_correct += other.tokens_correct;
  tokens_total += other.tokens_total;
}

std::size_t SpanMatchReport::tp() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.tp;
  return n;
}
std::size_t SpanMatchReport::fp() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.fp;
  return n;
}
std::size_t SpanMatchReport::fn() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.fn;
  return n;
}

double SpanMatchReport::micro_f1() const { return ratio(2 * tp(), 2 * tp() + fp() + fn()); }
double SpanMatchReport::token_accuracy() const { return ratio(tokens_correct, tokens_total); }

SpanMatchReport exact_span_scores(const BioSequence& gold, const BioSequence& pred,
                                  const LabelSchema& schema) {
  SpanMatchReport r(schema);
  r.add(gold, pred);
  return r;
}

// --- relations -----------------------------------------------------------------

double RelationReport::micro_f1() const { return ratio(correct, total); }

double RelationReport::weighted_f1() const {
  double sum = 0.0;
  std::size_t support = 0;
  for (const auto& c : classes) {
    sum += c.f1() * static_cast<double>(c.tp + c.fn);
    support += c.tp + c.fn;
  }
  return support == 0 ? 0.0 : sum / static_cast<double>(support);
}

RelationReport relation_scores(const std::vector<int>& gold, const std::vector<int>& pred,
                               const LabelSchema& schema) {
  if (gold.size() != pred.size())
    throw InputError("gold and predicted relation lists differ in length");
  RelationReport r;
  for (const auto& c : schema.relation_classes()) r.classes.push_back({c});
  const int k = schema.num_classes();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i], p = pred[i];
    if (g < 0 || g >= k || p < 0 || p >= k)
      throw SchemaError("relation class index outside the " + schema.name() + " schema");
    if (g == p) {
      ++r.classes[static_cast<std::size_t>(g)].tp;
      ++r.correct;
    } else {
      ++r.classes[static_cast<std::size_t>(p)].fp;
      ++r.classes[static_cast<std::size_t>(g)].fn;
    }
    ++r.total;
  }
  return r;
}

RelationReport relation_scores(const std::vector<std::string>& gold,
                               const std::vector<std::string>& pred, const LabelSchema& schema) {
  auto index = [&](const std::string& name) { return schema.class_index(name); };
  std::vector<int> g, p;
  for (const auto& s : gold) g.push_back(index(s));
  for (const auto& s : pred) p.push_back(index(s));
  return relation_scores(g, p, schema);
}

// --- distance ------------------------------------------------------------------

std::string_view unit_name(DistanceUnit u) {
  switch (u) {
    case DistanceUnit::Tokens: return "tokens";
    case DistanceUnit::Components: return "components";
    case DistanceUnit::Posts: return "posts";
  }
  return "tokens";
}

DistanceUnit parse_unit(std::string_view name) {
  if (name == "tokens") return DistanceUnit::Tokens;
  if (name == "components") return DistanceUnit::Components;
  if (name == "posts" || name == "comments") return DistanceUnit::Posts;
  throw ConfigError("unknown distance unit '" + std::string(name) + "'");
}

std::string DistanceBin::label() const {
  if (hi == std::numeric_limits<std::size_t>::max()) return "[" + std::to_string(lo) + ",inf)";
  return "[" + std::to_string(lo) + "," + std::to_string(hi) + ")";
}

std::vector<DistanceBin> default_distance_bins() {
  return {{0, 10}, {10, 50}, {50, 200}, {200, 1000}, {1000, std::numeric_limits<std::size_t>::max()}};
}

std::size_t component_distance(const LabeledThread& thread, const ComponentSpan& a,
                               const ComponentSpan& b, DistanceUnit unit) {
  const ComponentSpan& first = a.token_start <= b.token_start ? a : b;
  const ComponentSpan& second = a.token_start <= b.token_start ? b : a;
  switch (unit) {
    case DistanceUnit::Tokens:
      return second.token_start > first.token_end ? second.token_start - first.token_end : 0;
    case DistanceUnit::Components: {
      std::size_t n = 0;
      for (const auto& c : thread.components)
        if (c.token_start >= first.token_end && c.token_end <= second.token_start) ++n;
      return n;
    }
    case DistanceUnit::Posts:
      return thread.st.post_of(second.token_start) - thread.st.post_of(first.token_start);
  }
  return 0;
}

DistanceProfile distance_error_profile(const std::vector<EdgePrediction>& edges,
                                       std::vector<DistanceBin> bins, DistanceUnit unit) {
  DistanceProfile profile;
  profile.unit = unit;
  for (auto& b : bins) b.total = b.wrong = 0;
  profile.bins = std::move(bins);
  for (const auto& e : edges) {
    const ComponentSpan* s = e.thread ? e.thread->component(e.source_id) : nullptr;
    const ComponentSpan* t = e.thread ? e.thread->component(e.target_id) : nullptr;
    if (!s || !t) {
      ++profile.unresolved;
      continue;
    }
    const std::size_t d = component_distance(*e.thread, *s, *t, unit);
    auto it = std::find_if(profile.bins.begin(), profile.bins.end(),
                           [d](const DistanceBin& b) { return d >= b.lo && d < b.hi; });
    if (it == profile.bins.end()) {
      ++profile.unresolved;
      continue;
    }
    ++it->total;
    if (e.gold != e.pred) ++it->wrong;
  }
  return profile;
}

// --- marker vicinity --------------------------------------------------------------

namespace {

bool intersects(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  return a0 < b1 && b0 < a1;
}

bool is_near(std::size_t start, std::size_t end, const std::vector<MarkerMatch>& matches,
             std::size_t window) {
  const std::size_t s0 = start > window ? start - window : 0;
  const std::size_t e0 = end > window ? end - window : 0;
  for (const auto& m : matches)
    if (intersects(m.token_start, m.token_end, s0, start + window) ||
        intersects(m.token_start, m.token_end, e0, end + window))
      return true;
  return false;
}

}  // namespace

VicinitySplit marker_vicinity_split(const LabeledThread& thread,
                                    const std::vector<MarkerMatch>& matches, std::size_t window) {
  VicinitySplit split;
  for (std::size_t i = 0; i < thread.components.size(); ++i) {
    const auto& c = thread.components[i];
    (is_near(c.token_start, c.token_end, matches, window) ? split.near : split.far).push_back(i);
  }
  return split;
}

VicinityReport marker_vicinity_report(const std::vector<LabeledThread>& threads,
                                      const std::vector<BioSequence>& predictions,
                                      const MarkerLexicon& lexicon, std::size_t window) {
  if (threads.size() != predictions.size())
    throw InputError("one prediction per thread is required");
  VicinityReport report;
  for (std::size_t t = 0; t < threads.size(); ++t) {
    const LabeledThread& lt = threads[t];
    const LabelSchema& schema = LabelSchema::by_name(lt.schema);
    if (report.near.classes.empty()) {
      report.near = SpanMatchReport(schema);
      report.far = SpanMatchReport(schema);
    }
    if (predictions[t].size() != lt.bio.size())
      throw InputError("prediction length differs for thread " + lt.st.thread_id);
    const auto matches = find_markers(lt.st, lexicon);
    std::map<LabeledSpan, bool> gold_near;
    for (const auto& s : bio_to_spans(lt.bio)) {
      const bool near = is_near(s.start, s.end, matches, window);
      gold_near[s] = near;
      ++(near ? report.near_count : report.far_count);
    }
    std::set<LabeledSpan> matched;
    for (const auto& s : bio_to_spans(predictions[t])) {
      auto it = gold_near.find(s);
      const bool near = it != gold_near.end() ? it->second : is_near(s.start, s.end, matches, window);
      auto& cls = (near ? report.near : report.far).classes[static_cast<std::size_t>(s.ctype)];
      if (it != gold_near.end() && matched.insert(s).second) ++cls.tp;
      else ++cls.fp;
    }
    for (const auto& [s, near] : gold_near)
      if (!matched.contains(s))
        ++(near ? report.near : report.far).classes[static_cast<std::size_t>(s.ctype)].fn;
  }
  return report;
}

// --- rendering -------------------------------------------------------------------

namespace {

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

void score_rows(std::ostream& out, const std::vector<ClassScore>& classes) {
  out << std::left << std::setw(22) << "class" << std::right << std::setw(8) << "P" << std::setw(8)
      << "R" << std::setw(8) << "F1" << std::setw(8) << "TP" << std::setw(8) << "FP"
      << std::setw(8) << "FN" << "\n";
  for (const auto& c : classes)
    out << std::left << std::setw(22) << c.name << std::right << std::setw(8) << fmt(c.precision())
        << std::setw(8) << fmt(c.recall()) << std::setw(8) << fmt(c.f1()) << std::setw(8) << c.tp
        << std::setw(8) << c.fp << std::setw(8) << c.fn << "\n";
}

}  // namespace

void write_span_table(std::ostream& out, const SpanMatchReport& r, const std::string& title) {
  out << title << "\n";
  score_rows(out, r.classes);
  out << "micro-F1 " << fmt(r.micro_f1());
  if (r.tokens_total > 0) out << "  token accuracy " << fmt(r.token_accuracy());
  out << "\n";
}

void write_relation_table(std::ostream& out, const RelationReport& r, const std::string& title) {
  out << title << "\n";
  score_rows(out, r.classes);
  out << "micro-F1 " << fmt(r.micro_f1()) << "  weighted-F1 " << fmt(r.weighted_f1()) << "  ("
      << r.total << " edges)\n";
}

void write_distance_table(std::ostream& out, const DistanceProfile& p) {
  out << "distance (" << unit_name(p.unit) << ")  edges  wrong  error%\n";
  for (const auto& b : p.bins)
    out << std::left << std::setw(18) << b.label() << std::right << std::setw(7) << b.total
        << std::setw(7) << b.wrong << std::setw(8) << fmt(100.0 * b.error_rate(), 1) << "\n";
  if (p.unresolved > 0) out << "unresolved edges: " << p.unresolved << "\n";
}

void write_epoch_plot_svg(std::ostream& out, const std::vector<CurveSeries>& series,
                          const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::size_t epochs = 0;
  double lo = 1.0, hi = 0.0;
  for (const auto& s : series) {
    epochs = std::max(epochs, s.mean.size());
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      const double sd = i < s.stddev.size() ? s.stddev[i] : 0.0;
      lo = std::min(lo, s.mean[i] - sd);
      hi = std::max(hi, s.mean[i] + sd);
    }
  }
  if (hi <= lo) {
    lo = 0.0;
    hi = 1.0;
  }
  lo = std::max(0.0, lo);
  hi = std::min(1.0, hi) > lo ? std::min(1.0, hi) : lo + 1e-3;
  auto x = [&](std::size_t i) {
    return epochs <= 1 ? L : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(epochs - 1);
  };
  auto y = [&](double v) { return T + (H - T - B) * (1.0 - (std::clamp(v, lo, hi) - lo) / (hi - lo)); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(v, 2) << "</text>\n";
  }
  out << "<text x=\"" << (W + L - R) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";
  out << "<text x=\"16\" y=\"" << (H - B + T) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << (H - B + T) / 2
      << ")\">F1</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 5];
    if (s.mean.empty()) continue;
    std::ostringstream band;
    for (std::size_t i = 0; i < s.mean.size(); ++i)
      band << x(i) << "," << y(s.mean[i] + (i < s.stddev.size() ? s.stddev[i] : 0.0)) << " ";
    for (std::size_t i = s.mean.size(); i-- > 0;)
      band << x(i) << "," << y(s.mean[i] - (i < s.stddev.size() ? s.stddev[i] : 0.0)) << " ";
    out << "<polygon points=\"" << band.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    std::ostringstream line;
    for (std::size_t i = 0; i < s.mean.size(); ++i) line << x(i) << "," << y(s.mean[i]) << " ";
    out << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 16 * (k + 1)
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace argmine
