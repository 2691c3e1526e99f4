#pragma once

#include <Eigen/Core>

#include "argmine/labels.hpp"

namespace argmine::crf {

/// Sequence-length x label-count unnormalized scores.
using EmissionMatrix = Eigen::MatrixXd;

/// Linear-chain CRF parameters. Entries where `allowed` (or
/// `start_allowed`) is false contribute -inf regardless of their value.
struct TransitionTable {
  Eigen::MatrixXd trans;        // from x to
  Eigen::VectorXd start;
  Eigen::VectorXd end;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed;
  Eigen::Array<bool, Eigen::Dynamic, 1> start_allowed;

  int num_labels() const { return static_cast<int>(trans.rows()); }

  /// All transitions allowed, zero scores.
  static TransitionTable unconstrained(int num_labels);
  /// Zero scores with the BIO mask for `num_types` component types:
  /// O->I-x, B-x->I-y, I-x->I-y (x != y) and start->I-x are forbidden.
  static TransitionTable bio(int num_types);

  double transition(int from, int to) const;
  double start_score(int label) const;
};

/// Score of one label path: start + emissions + transitions + end.
double path_score(const EmissionMatrix& e, const TransitionTable& t, const BioSequence& path);

/// log of the sum of exp(path score) over all label paths (forward algorithm).
double log_partition(const EmissionMatrix& e, const TransitionTable& t);

/// -(gold path score - log partition). Throws LabelError if the gold path
/// is forbidden by the mask.
double nll(const EmissionMatrix& e, const TransitionTable& t, const BioSequence& gold);

struct Gradients {
  Eigen::MatrixXd emissions;
  Eigen::MatrixXd trans;
  Eigen::VectorXd start;
  Eigen::VectorXd end;
};

/// nll together with its gradient w.r.t. every parameter (forward-backward
/// marginals minus gold indicators). Masked entries get zero gradient.
double nll_with_gradients(const EmissionMatrix& e, const TransitionTable& t,
                          const BioSequence& gold, Gradients& grad);

/// Highest-scoring allowed path. Ties go to the lowest label index, both
/// for backpointers and for the final label.
BioSequence viterbi(const EmissionMatrix& e, const TransitionTable& t);

}  // namespace argmine::crf
