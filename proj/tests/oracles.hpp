#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the code under test except for data types.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "argmine/crf.hpp"
#include "argmine/labels.hpp"
#include "argmine/rng.hpp"

namespace oracle {

using argmine::BioSequence;
using argmine::crf::EmissionMatrix;
using argmine::crf::TransitionTable;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Calls f on every label path of length L over n labels, in lexicographic order.
inline void for_each_path(int length, int labels, const std::function<void(const BioSequence&)>& f) {
  BioSequence path(static_cast<std::size_t>(length), 0);
  while (true) {
    f(path);
    int i = length - 1;
    while (i >= 0 && path[static_cast<std::size_t>(i)] == labels - 1) path[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) return;
    ++path[static_cast<std::size_t>(i)];
  }
}

/// Path score written out directly from the masks; -inf when forbidden.
inline double score(const EmissionMatrix& e, const TransitionTable& t, const BioSequence& y) {
  if (y.empty()) return 0.0;
  if (!t.start_allowed(y[0])) return kNegInf;
  double s = t.start(y[0]) + e(0, y[0]);
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (!t.allowed(y[i - 1], y[i])) return kNegInf;
    s += t.trans(y[i - 1], y[i]) + e(static_cast<Eigen::Index>(i), y[i]);
  }
  return s + t.end(y.back());
}

/// Exhaustive argmax; the first path in lexicographic order wins ties.
inline BioSequence brute_viterbi(const EmissionMatrix& e, const TransitionTable& t) {
  BioSequence best;
  double best_score = kNegInf;
  for_each_path(static_cast<int>(e.rows()), static_cast<int>(e.cols()), [&](const BioSequence& y) {
    const double s = score(e, t, y);
    if (best.empty() || s > best_score) {
      best = y;
      best_score = s;
    }
  });
  return best;
}

/// Exhaustive log-sum-exp over all allowed paths.
inline double brute_log_partition(const EmissionMatrix& e, const TransitionTable& t) {
  std::vector<double> scores;
  for_each_path(static_cast<int>(e.rows()), static_cast<int>(e.cols()),
                [&](const BioSequence& y) { scores.push_back(score(e, t, y)); });
  double m = kNegInf;
  for (double s : scores) m = std::max(m, s);
  if (m == kNegInf) return m;
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return m + std::log(z);
}

inline TransitionTable random_table(argmine::Rng& rng, int labels, bool bio) {
  TransitionTable t = bio ? TransitionTable::bio((labels - 1) / 2) : TransitionTable::unconstrained(labels);
  for (int i = 0; i < labels; ++i) {
    t.start(i) = rng.normal();
    t.end(i) = rng.normal();
    for (int j = 0; j < labels; ++j) t.trans(i, j) = rng.normal();
  }
  return t;
}

inline EmissionMatrix random_emissions(argmine::Rng& rng, int length, int labels) {
  EmissionMatrix e(length, labels);
  for (int i = 0; i < length; ++i)
    for (int j = 0; j < labels; ++j) e(i, j) = 2.0 * rng.normal();
  return e;
}

/// A random path that the table allows.
inline BioSequence random_allowed_path(argmine::Rng& rng, const TransitionTable& t, int length) {
  BioSequence y;
  const int n = t.num_labels();
  for (int i = 0; i < length; ++i) {
    std::vector<int> ok;
    for (int l = 0; l < n; ++l)
      if (i == 0 ? t.start_allowed(l) : t.allowed(y.back(), l)) ok.push_back(l);
    y.push_back(ok[rng.below(ok.size())]);
  }
  return y;
}

/// Central finite difference of f at x along every coordinate.
inline Eigen::MatrixXd finite_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                         const Eigen::MatrixXd& x, double h = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::MatrixXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(1, |a|, |b|) elementwise.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a(i) - b(i));
    const double s = std::max({1.0, std::abs(a(i)), std::abs(b(i))});
    worst = std::max(worst, d / s);
  }
  return worst;
}

// --- span metric -------------------------------------------------------------

/// (start, end, type) triples. A span opens at B-x, or at I-x whose left
/// neighbour is not a B-x/I-x of the same type, and runs over the I-x that follow.
inline std::set<std::tuple<int, int, int>> span_set(const BioSequence& y) {
  std::set<std::tuple<int, int, int>> out;
  const int n = static_cast<int>(y.size());
  for (int i = 0; i < n; ++i) {
    const int l = y[static_cast<std::size_t>(i)];
    if (l == 0) continue;
    const int type = (l - 1) / 2;
    const bool begin = l % 2 == 1;
    const bool continues = i > 0 && y[static_cast<std::size_t>(i - 1)] != 0 &&
                           (y[static_cast<std::size_t>(i - 1)] - 1) / 2 == type;
    if (!begin && continues) continue;
    int j = i + 1;
    while (j < n && y[static_cast<std::size_t>(j)] == 2 + 2 * type) ++j;
    out.insert({i, j, type});
  }
  return out;
}

struct SpanCounts {
  std::map<int, std::size_t> tp, fp, fn;
  std::size_t tokens_correct = 0;

  double micro_f1() const {
    std::size_t t = 0, p = 0, n = 0;
    for (auto& [_, v] : tp) t += v;
    for (auto& [_, v] : fp) p += v;
    for (auto& [_, v] : fn) n += v;
    return t + p + n == 0 ? 0.0 : 2.0 * static_cast<double>(t) / static_cast<double>(2 * t + p + n);
  }
};

inline SpanCounts brute_span_scores(const BioSequence& gold, const BioSequence& pred) {
  SpanCounts c;
  const auto g = span_set(gold), p = span_set(pred);
  for (const auto& s : p) (g.count(s) ? c.tp : c.fp)[std::get<2>(s)]++;
  for (const auto& s : g)
    if (!p.count(s)) c.fn[std::get<2>(s)]++;
  // A gold B-x token also counts when the prediction opens the same span with I-x.
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool ok = gold[i] == pred[i];
    if (!ok && gold[i] % 2 == 1 && pred[i] == gold[i] + 1) {
      const int type = (gold[i] - 1) / 2;
      ok = i == 0 || pred[i - 1] == 0 || (pred[i - 1] - 1) / 2 != type;
    }
    c.tokens_correct += ok ? 1 : 0;
  }
  return c;
}

/// Random label sequence, valid or not, biased towards spans.
inline BioSequence random_bio(argmine::Rng& rng, int length, int types) {
  BioSequence y;
  for (int i = 0; i < length; ++i) {
    const double u = rng.uniform();
    const int type = static_cast<int>(rng.below(static_cast<std::size_t>(types)));
    if (u < 0.3) y.push_back(0);
    else if (u < 0.5) y.push_back(1 + 2 * type);
    else if (u < 0.9 && !y.empty() && y.back() != 0) y.push_back(2 + 2 * ((y.back() - 1) / 2));
    else y.push_back(2 + 2 * type);
  }
  return y;
}

/// Copy of gold with a few labels flipped, so pairs share many spans.
inline BioSequence perturb(argmine::Rng& rng, BioSequence y, int types, double rate) {
  for (auto& l : y)
    if (rng.bernoulli(rate)) l = static_cast<int>(rng.below(static_cast<std::size_t>(1 + 2 * types)));
  return y;
}

}  // namespace oracle
