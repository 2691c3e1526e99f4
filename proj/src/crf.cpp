#include "argmine/crf.hpp"

#include <cmath>
#include <limits>

#include "argmine/errors.hpp"

namespace argmine::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_inputs(const EmissionMatrix& e, const TransitionTable& t) {
  if (e.rows() < 1) throw ContractError("CRF needs a sequence of length at least 1");
  if (e.cols() != t.num_labels())
    throw ConfigError("emission label count " + std::to_string(e.cols()) +
                      " does not match transition table " + std::to_string(t.num_labels()));
  if (!e.allFinite()) throw NumericError("non-finite value in CRF emissions");
  if (!t.trans.allFinite() || !t.start.allFinite() || !t.end.allFinite())
    throw NumericError("non-finite value in CRF transition parameters");
}

// alpha(i, j): log-sum of prefix paths ending in label j at position i.
Eigen::MatrixXd forward(const EmissionMatrix& e, const TransitionTable& t) {
  const Eigen::Index n = e.rows(), k = e.cols();
  Eigen::MatrixXd alpha(n, k);
  for (Eigen::Index j = 0; j < k; ++j) alpha(0, j) = t.start_score(static_cast<int>(j)) + e(0, j);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double acc = kNegInf;
      for (Eigen::Index p = 0; p < k; ++p)
        acc = log_add(acc, alpha(i - 1, p) + t.transition(static_cast<int>(p), static_cast<int>(j)));
      alpha(i, j) = acc + e(i, j);
    }
  }
  return alpha;
}

// beta(i, j): log-sum of suffix paths after label j at position i, end included.
Eigen::MatrixXd backward(const EmissionMatrix& e, const TransitionTable& t) {
  const Eigen::Index n = e.rows(), k = e.cols();
  Eigen::MatrixXd beta(n, k);
  for (Eigen::Index j = 0; j < k; ++j) beta(n - 1, j) = t.end(j);
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double acc = kNegInf;
      for (Eigen::Index q = 0; q < k; ++q)
        acc = log_add(acc, t.transition(static_cast<int>(j), static_cast<int>(q)) + e(i + 1, q) +
                               beta(i + 1, q));
      beta(i, j) = acc;
    }
  }
  return beta;
}

double finish(const Eigen::MatrixXd& alpha, const TransitionTable& t) {
  double z = kNegInf;
  const Eigen::Index last = alpha.rows() - 1;
  for (Eigen::Index j = 0; j < alpha.cols(); ++j) z = log_add(z, alpha(last, j) + t.end(j));
  return z;
}

}  // namespace

TransitionTable TransitionTable::unconstrained(int num_labels) {
  TransitionTable t;
  t.trans = Eigen::MatrixXd::Zero(num_labels, num_labels);
  t.start = Eigen::VectorXd::Zero(num_labels);
  t.end = Eigen::VectorXd::Zero(num_labels);
  t.allowed.setConstant(num_labels, num_labels, true);
  t.start_allowed.setConstant(num_labels, true);
  return t;
}

TransitionTable TransitionTable::bio(int num_types) {
  const int k = 1 + 2 * num_types;
  TransitionTable t = unconstrained(k);
  for (int to = 0; to < k; ++to) {
    if (!LabelSchema::is_inside(to)) continue;
    t.start_allowed(to) = false;
    for (int from = 0; from < k; ++from)
      t.allowed(from, to) = from != 0 && LabelSchema::type_of(from) == LabelSchema::type_of(to);
  }
  return t;
}

double TransitionTable::transition(int from, int to) const {
  return allowed(from, to) ? trans(from, to) : kNegInf;
}

double TransitionTable::start_score(int label) const {
  return start_allowed(label) ? start(label) : kNegInf;
}

double path_score(const EmissionMatrix& e, const TransitionTable& t, const BioSequence& path) {
  if (static_cast<Eigen::Index>(path.size()) != e.rows())
    throw ContractError("path length does not match emissions");
  double s = t.start_score(path[0]) + e(0, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i)
    s += t.transition(path[i - 1], path[i]) + e(static_cast<Eigen::Index>(i), path[i]);
  return s + t.end(path.back());
}

double log_partition(const EmissionMatrix& e, const TransitionTable& t) {
  check_inputs(e, t);
  return finish(forward(e, t), t);
}

double nll(const EmissionMatrix& e, const TransitionTable& t, const BioSequence& gold) {
  check_inputs(e, t);
  if (static_cast<Eigen::Index>(gold.size()) != e.rows())
    throw ContractError("gold length does not match emissions");
  for (int l : gold)
    if (l < 0 || l >= t.num_labels()) throw LabelError("gold label out of range");
  const double s = path_score(e, t, gold);
  if (!std::isfinite(s)) throw LabelError("gold label path violates the transition mask");
  return log_partition(e, t) - s;
}

double nll_with_gradients(const EmissionMatrix& e, const TransitionTable& t,
                          const BioSequence& gold, Gradients& grad) {
  const double value = nll(e, t, gold);
  const Eigen::Index n = e.rows(), k = e.cols();
  const Eigen::MatrixXd alpha = forward(e, t);
  const Eigen::MatrixXd beta = backward(e, t);
  const double z = finish(alpha, t);

  grad.emissions = ((alpha + beta).array() - z).exp().matrix();
  grad.start = grad.emissions.row(0).transpose();
  grad.end = grad.emissions.row(n - 1).transpose();
  grad.trans = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    for (Eigen::Index p = 0; p < k; ++p)
      for (Eigen::Index q = 0; q < k; ++q) {
        if (!t.allowed(p, q)) continue;
        grad.trans(p, q) += std::exp(alpha(i, p) + t.trans(p, q) + e(i + 1, q) + beta(i + 1, q) - z);
      }

  for (Eigen::Index i = 0; i < n; ++i) grad.emissions(i, gold[i]) -= 1.0;
  grad.start(gold.front()) -= 1.0;
  grad.end(gold.back()) -= 1.0;
  for (std::size_t i = 1; i < gold.size(); ++i) grad.trans(gold[i - 1], gold[i]) -= 1.0;
  for (Eigen::Index j = 0; j < k; ++j)
    if (!t.start_allowed(j)) grad.start(j) = 0.0;
  return value;
}

BioSequence viterbi(const EmissionMatrix& e, const TransitionTable& t) {
  check_inputs(e, t);
  const Eigen::Index n = e.rows(), k = e.cols();
  Eigen::VectorXd score(k), next(k);
  Eigen::MatrixXi back(n, k);
  for (Eigen::Index j = 0; j < k; ++j) score(j) = t.start_score(static_cast<int>(j)) + e(0, j);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index p = 0; p < k; ++p) {
        const double s = score(p) + t.transition(static_cast<int>(p), static_cast<int>(j));
        if (s > best) {
          best = s;
          arg = static_cast<int>(p);
        }
      }
      next(j) = best + e(i, j);
      back(i, j) = arg;
    }
    score.swap(next);
  }
  int last = 0;
  double best = kNegInf;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double s = score(j) + t.end(j);
    if (s > best) {
      best = s;
      last = static_cast<int>(j);
    }
  }
  BioSequence path(static_cast<std::size_t>(n));
  path[n - 1] = last;
  for (Eigen::Index i = n - 1; i > 0; --i) path[i - 1] = back(i, path[i]);
  return path;
}

}  // namespace argmine::crf
