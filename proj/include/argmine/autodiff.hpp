#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "argmine/crf.hpp"

namespace argmine::ad {

using Matrix = Eigen::MatrixXd;

/// A trainable tensor with its accumulated gradient and Adam moments.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) { zero_grad(); }

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Records operations for one forward pass; backward() propagates into the
/// Parameters that were read. A tape is single-use and single-threaded.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, const Node&)> backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Var parameter(Parameter& p);
  Var constant(Matrix value);
  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backward);

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool needs_grad(Var v) const { return node(v.id).needs_grad; }

  /// Adds `g` into the gradient of `v` (no-op for constants).
  void accumulate(Var v, const Matrix& g);
  /// Adds row i of `g` into row rows[i] of the gradient of `v`.
  void accumulate_rows(Var v, const std::vector<int>& rows, const Matrix& g);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward in reverse.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// --- operations ---------------------------------------------------------------

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_bt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var relu(Var a);
Var gelu(Var a);
/// Row-wise layer normalization with learned gain and bias rows.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Rows of `table` selected by ids.
Var embedding(Var table, std::span<const int> ids);
/// Rows of a selected by index.
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Rows of a selected by index and laid side by side into one 1 x (k*cols) row.
Var gather_concat(Var a, std::span<const std::size_t> rows);
/// Mean of rows [begin, end) as a 1 x cols row.
Var mean_rows(Var a, std::size_t begin, std::size_t end);
Var concat_cols(Var a, Var b);
Var sum_all(std::span<const Var> scalars);

/// Multi-head scaled dot-product attention over n x d inputs. allowed(i, j)
/// says whether query i may attend to key j.
Var attention(Var q, Var k, Var v, int heads,
              const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed);

/// Sum over rows of -log softmax(logits)[row, target].
Var cross_entropy(Var logits, std::span<const int> targets);

/// Linear-chain CRF negative log-likelihood. Masks come from `table`; the
/// numeric transition/start/end scores come from the three Vars.
Var crf_nll(Var emissions, Var trans, Var start, Var end, const crf::TransitionTable& mask,
            const BioSequence& gold);

}  // namespace argmine::ad
