#include "argmine/autodiff.hpp"

#include <cmath>
#include <limits>

#include "argmine/errors.hpp"

namespace argmine::ad {

const Matrix& Var::value() const { return tape->node(id).value; }

Var Tape::parameter(Parameter& p) {
  nodes_.push_back({p.value, {}, nullptr, &p, !p.frozen});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, nullptr, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backward) {
  nodes_.push_back({std::move(value), {}, needs_grad ? std::move(backward) : nullptr, nullptr,
                    needs_grad});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = node(v.id);
  if (!n.needs_grad) return;
  if (n.param) {
    n.param->grad += g;
    return;
  }
  if (n.grad.size() == 0) n.grad = g;
  else n.grad += g;
}

void Tape::accumulate_rows(Var v, const std::vector<int>& rows, const Matrix& g) {
  Node& n = node(v.id);
  if (!n.needs_grad) return;
  Matrix& target = n.param ? n.param->grad : n.grad;
  if (target.size() == 0) target = Matrix::Zero(n.value.rows(), n.value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    target.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
}

void Tape::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ContractError("backward needs a scalar loss");
  accumulate(loss, Matrix::Ones(1, 1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n);
    n.grad.resize(0, 0);
  }
}

namespace {

bool any_grad(std::initializer_list<Var> vars) {
  for (const auto& v : vars)
    if (v.tape->needs_grad(v)) return true;
  return false;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push(a.value() * b.value(), any_grad({a, b}), [a, b](Tape& t, const Tape::Node& n) {
    if (t.needs_grad(a)) t.accumulate(a, n.grad * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * n.grad);
  });
}

Var matmul_bt(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push(a.value() * b.value().transpose(), any_grad({a, b}),
                [a, b](Tape& t, const Tape::Node& n) {
                  if (t.needs_grad(a)) t.accumulate(a, n.grad * b.value());
                  if (t.needs_grad(b)) t.accumulate(b, n.grad.transpose() * a.value());
                });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError("add: shape mismatch");
  return t.push(a.value() + b.value(), any_grad({a, b}), [a, b](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad);
    t.accumulate(b, n.grad);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape;
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), any_grad({a, row}), [a, row](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad);
    if (t.needs_grad(row)) t.accumulate(row, n.grad.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, any_grad({a}),
                [a, s](Tape& t, const Tape::Node& n) { t.accumulate(a, n.grad * s); });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  return t.push(a.value().cwiseMax(0.0), any_grad({a}), [a](Tape& t, const Tape::Node& n) {
    t.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Var gelu(Var a) {
  // tanh approximation
  static constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  Tape& t = *a.tape;
  const Eigen::ArrayXXd x = a.value().array();
  const Eigen::ArrayXXd inner = c * (x + 0.044715 * x.cube());
  const Eigen::ArrayXXd th = inner.tanh();
  Matrix out = (0.5 * x * (1.0 + th)).matrix();
  return t.push(std::move(out), any_grad({a}), [a, x, th](Tape& t, const Tape::Node& n) {
    const Eigen::ArrayXXd dinner = c * (1.0 + 3.0 * 0.044715 * x.square());
    const Eigen::ArrayXXd d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th.square()) * dinner;
    t.accumulate(a, (d * n.grad.array()).matrix());
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::VectorXd mean = X.rowwise().mean();
  Matrix centered = X.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(d)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  return t.push(std::move(out), any_grad({x, gain, bias}),
                [x, gain, bias, xhat, inv_std, n, d](Tape& t, const Tape::Node& node) {
                  const Matrix& g = node.grad;
                  if (t.needs_grad(gain))
                    t.accumulate(gain, (g.array() * xhat.array()).colwise().sum().matrix());
                  if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
                  if (t.needs_grad(x)) {
                    const Eigen::ArrayXXd gx = g.array().rowwise() * gain.value().row(0).array();
                    const Eigen::ArrayXd mean_gx = gx.rowwise().mean();
                    const Eigen::ArrayXd mean_gx_xhat = (gx * xhat.array()).rowwise().mean();
                    Eigen::ArrayXXd dx = gx.colwise() - mean_gx;
                    dx -= xhat.array().colwise() * mean_gx_xhat;
                    dx = dx.colwise() * inv_std.array();
                    t.accumulate(x, dx.matrix());
                  }
                  (void)n;
                  (void)d;
                });
}

Var embedding(Var table, std::span<const int> ids) {
  Tape& t = *table.tape;
  const Matrix& T = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows()) throw ContractError("embedding id out of range");
    out.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return t.push(std::move(out), any_grad({table}), [table, idv](Tape& t, const Tape::Node& n) {
    t.accumulate_rows(table, idv, n.grad);
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = *a.tape;
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(a.rows())) throw ContractError("gather row out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(static_cast<Eigen::Index>(rows[i]));
  }
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return t.push(std::move(out), any_grad({a}), [a, rv](Tape& t, const Tape::Node& n) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < rv.size(); ++i)
      g.row(static_cast<Eigen::Index>(rv[i])) += n.grad.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, g);
  });
}

Var gather_concat(Var a, std::span<const std::size_t> rows) {
  Tape& t = *a.tape;
  const Eigen::Index d = a.cols();
  Matrix out(1, d * static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(a.rows())) throw ContractError("gather row out of range");
    out.block(0, static_cast<Eigen::Index>(i) * d, 1, d) =
        a.value().row(static_cast<Eigen::Index>(rows[i]));
  }
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return t.push(std::move(out), any_grad({a}), [a, rv, d](Tape& t, const Tape::Node& n) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < rv.size(); ++i)
      g.row(static_cast<Eigen::Index>(rv[i])) += n.grad.block(0, static_cast<Eigen::Index>(i) * d, 1, d);
    t.accumulate(a, g);
  });
}

Var mean_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = *a.tape;
  if (begin >= end || end > static_cast<std::size_t>(a.rows()))
    throw ContractError("mean_rows: bad row range");
  const auto b = static_cast<Eigen::Index>(begin), len = static_cast<Eigen::Index>(end - begin);
  Matrix out = a.value().middleRows(b, len).colwise().mean();
  return t.push(std::move(out), any_grad({a}), [a, b, len](Tape& t, const Tape::Node& n) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    g.middleRows(b, len).rowwise() = n.grad.row(0) / static_cast<double>(len);
    t.accumulate(a, g);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.rows() != b.rows()) throw ContractError("concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return t.push(std::move(out), any_grad({a, b}), [a, b, ca, cb](Tape& t, const Tape::Node& n) {
    t.accumulate(a, n.grad.leftCols(ca));
    t.accumulate(b, n.grad.rightCols(cb));
  });
}

Var sum_all(std::span<const Var> scalars) {
  if (scalars.empty()) throw ContractError("sum_all of nothing");
  Tape& t = *scalars.front().tape;
  double total = 0.0;
  bool grad = false;
  for (const auto& s : scalars) {
    total += s.scalar();
    grad = grad || t.needs_grad(s);
  }
  std::vector<Var> vs(scalars.begin(), scalars.end());
  return t.push(Matrix::Constant(1, 1, total), grad, [vs](Tape& t, const Tape::Node& n) {
    for (const auto& s : vs) t.accumulate(s, n.grad);
  });
}

Var attention(Var q, Var k, Var v, int heads,
              const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed) {
  Tape& t = *q.tape;
  const Eigen::Index n = q.rows(), dim = q.cols();
  if (dim % heads != 0) throw ConfigError("hidden size must be divisible by head count");
  if (allowed.rows() != n || allowed.cols() != n) throw ContractError("attention mask shape");
  const Eigen::Index dh = dim / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(n, dim);
  for (int h = 0; h < heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix s = q.value().middleCols(c0, dh) * k.value().middleCols(c0, dh).transpose() * inv;
    for (Eigen::Index i = 0; i < n; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (allowed(i, j)) m = std::max(m, s(i, j));
      double z = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        s(i, j) = allowed(i, j) ? std::exp(s(i, j) - m) : 0.0;
        z += s(i, j);
      }
      s.row(i) /= z;
    }
    out.middleCols(c0, dh) = s * v.value().middleCols(c0, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return t.push(std::move(out), any_grad({q, k, v}),
                [q, k, v, heads, dh, inv, probs](Tape& t, const Tape::Node& node) {
                  const Eigen::Index n = q.rows(), dim = q.cols();
                  Matrix dq = Matrix::Zero(n, dim), dk = Matrix::Zero(n, dim),
                         dv = Matrix::Zero(n, dim);
                  for (int h = 0; h < heads; ++h) {
                    const auto c0 = static_cast<Eigen::Index>(h) * dh;
                    const Matrix& p = probs[static_cast<std::size_t>(h)];
                    const Matrix go = node.grad.middleCols(c0, dh);
                    dv.middleCols(c0, dh) = p.transpose() * go;
                    const Matrix dp = go * v.value().middleCols(c0, dh).transpose();
                    const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
                    const Matrix ds = (p.array() * (dp.colwise() - rowdot).array()).matrix() * inv;
                    dq.middleCols(c0, dh) = ds * k.value().middleCols(c0, dh);
                    dk.middleCols(c0, dh) = ds.transpose() * q.value().middleCols(c0, dh);
                  }
                  t.accumulate(q, dq);
                  t.accumulate(k, dk);
                  t.accumulate(v, dv);
                });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  Tape& t = *logits.tape;
  const Matrix& L = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != L.rows())
    throw ContractError("cross_entropy: one target per row required");
  Matrix probs(L.rows(), L.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double m = L.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (L.row(i).array() - m).exp();
    const double z = e.sum();
    probs.row(i) = e / z;
    const int y = targets[static_cast<std::size_t>(i)];
    if (y < 0 || y >= L.cols()) throw ContractError("cross_entropy: target out of range");
    loss += std::log(z) + m - L(i, y);
  }
  std::vector<int> tv(targets.begin(), targets.end());
  return t.push(Matrix::Constant(1, 1, loss), any_grad({logits}),
                [logits, probs, tv](Tape& t, const Tape::Node& n) {
                  Matrix g = probs;
                  for (std::size_t i = 0; i < tv.size(); ++i) g(static_cast<Eigen::Index>(i), tv[i]) -= 1.0;
                  t.accumulate(logits, g * n.grad(0, 0));
                });
}

Var crf_nll(Var emissions, Var trans, Var start, Var end, const crf::TransitionTable& mask,
            const BioSequence& gold) {
  Tape& t = *emissions.tape;
  crf::TransitionTable table = mask;
  table.trans = trans.value();
  table.start = start.value().row(0).transpose();
  table.end = end.value().row(0).transpose();
  crf::Gradients g;
  const double value = crf::nll_with_gradients(emissions.value(), table, gold, g);
  return t.push(Matrix::Constant(1, 1, value), any_grad({emissions, trans, start, end}),
                [emissions, trans, start, end, g](Tape& t, const Tape::Node& n) {
                  const double s = n.grad(0, 0);
                  t.accumulate(emissions, g.emissions * s);
                  t.accumulate(trans, g.trans * s);
                  t.accumulate(start, g.start.transpose() * s);
                  t.accumulate(end, g.end.transpose() * s);
                });
}

}  // namespace argmine::ad
