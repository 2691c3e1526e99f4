#include <functional>

#include "doctest.h"

#include "argmine/autodiff.hpp"
#include "oracles.hpp"

using namespace argmine;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

namespace {

using Graph = std::function<Var(Tape&, std::vector<Var>&)>;

Matrix random_matrix(Rng& rng, int r, int c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

/// Largest relative error between tape gradients and finite differences
/// over all inputs of a scalar-valued graph.
double gradient_error(std::vector<Matrix> inputs, const Graph& g) {
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("p" + std::to_string(i), inputs[i]);
  auto evaluate = [&](std::vector<Parameter>& ps, bool backward) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& p : ps) vars.push_back(tape.parameter(p));
    Var loss = g(tape, vars);
    if (backward) tape.backward(loss);
    return loss.scalar();
  };
  evaluate(params, true);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto fd = oracle::finite_difference(
        [&](const Matrix& x) {
          auto copy = params;
          copy[i].value = x;
          return evaluate(copy, false);
        },
        params[i].value, 1e-5);
    worst = std::max(worst, oracle::relative_error(params[i].grad, fd));
  }
  return worst;
}

/// Reduces any matrix to a scalar with fixed random weights.
Var project(Tape& tape, Var x, std::uint64_t seed) {
  Rng rng(seed, "test/project");
  Matrix w = random_matrix(rng, static_cast<int>(x.cols()), 1);
  Var col = ad::matmul(x, tape.constant(w));
  Matrix ones = Matrix::Ones(1, col.rows());
  return ad::matmul(tape.constant(ones), col);
}

}  // namespace

TEST_CASE("elementwise and linear ops") {
  Rng rng(1, "test/ad");
  const auto a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2), c = random_matrix(rng, 3, 4);
  const auto row = random_matrix(rng, 1, 4);
  CHECK(gradient_error({a, b}, [](Tape& t, auto& v) { return project(t, ad::matmul(v[0], v[1]), 1); }) < 1e-6);
  CHECK(gradient_error({a, c}, [](Tape& t, auto& v) { return project(t, ad::matmul_bt(v[0], v[1]), 2); }) < 1e-6);
  CHECK(gradient_error({a, c}, [](Tape& t, auto& v) { return project(t, ad::add(v[0], ad::scale(v[1], -2.5)), 3); }) < 1e-6);
  CHECK(gradient_error({a, row}, [](Tape& t, auto& v) { return project(t, ad::add_row(v[0], v[1]), 4); }) < 1e-6);
  CHECK(gradient_error({a}, [](Tape& t, auto& v) { return project(t, ad::gelu(v[0]), 5); }) < 1e-6);
  CHECK(gradient_error({a}, [](Tape& t, auto& v) { return project(t, ad::relu(v[0]), 6); }) < 1e-5);
  CHECK(gradient_error({a, b}, [](Tape& t, auto& v) { return project(t, ad::concat_cols(v[0], ad::matmul(v[0], v[1])), 7); }) < 1e-6);
}

TEST_CASE("layer norm, embedding and row selection") {
  Rng rng(2, "test/ad2");
  const auto x = random_matrix(rng, 4, 5), g = random_matrix(rng, 1, 5), b = random_matrix(rng, 1, 5);
  CHECK(gradient_error({x, g, b}, [](Tape& t, auto& v) { return project(t, ad::layer_norm(v[0], v[1], v[2]), 8); }) < 1e-5);
  const std::vector<int> ids{2, 0, 2, 3};
  CHECK(gradient_error({x}, [&](Tape& t, auto& v) { return project(t, ad::embedding(v[0], ids), 9); }) < 1e-6);
  const std::vector<std::size_t> rows{3, 1};
  CHECK(gradient_error({x}, [&](Tape& t, auto& v) { return project(t, ad::gather_rows(v[0], rows), 10); }) < 1e-6);
  CHECK(gradient_error({x}, [&](Tape& t, auto& v) { return project(t, ad::gather_concat(v[0], rows), 11); }) < 1e-6);
  CHECK(gradient_error({x}, [](Tape& t, auto& v) { return project(t, ad::mean_rows(v[0], 1, 3), 12); }) < 1e-6);
}

TEST_CASE("attention with a mask") {
  Rng rng(3, "test/ad3");
  const auto q = random_matrix(rng, 5, 4), k = random_matrix(rng, 5, 4), v = random_matrix(rng, 5, 4);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) allowed(i, j) = std::abs(i - j) <= 1 || j == 0;
  CHECK(gradient_error({q, k, v}, [&](Tape& t, auto& x) { return project(t, ad::attention(x[0], x[1], x[2], 2, allowed), 13); }) < 1e-5);
}

TEST_CASE("cross entropy and CRF nll") {
  Rng rng(4, "test/ad4");
  const auto logits = random_matrix(rng, 3, 6);
  const std::vector<int> targets{5, 0, 2};
  CHECK(gradient_error({logits}, [&](Tape&, auto& v) { return ad::cross_entropy(v[0], targets); }) < 1e-6);

  const auto mask = crf::TransitionTable::bio(2);
  const auto e = random_matrix(rng, 4, 5), tr = random_matrix(rng, 5, 5);
  const auto st = random_matrix(rng, 1, 5), en = random_matrix(rng, 1, 5);
  const BioSequence gold{1, 2, 0, 3};
  CHECK(gradient_error({e, tr, st, en}, [&](Tape&, auto& v) { return ad::crf_nll(v[0], v[1], v[2], v[3], mask, gold); }) < 1e-6);
}

TEST_CASE("sum of scalars and constants carry no gradient") {
  Parameter p("p", Matrix::Constant(1, 1, 2.0));
  Tape tape;
  Var a = tape.parameter(p);
  Var c = tape.constant(Matrix::Constant(1, 1, 5.0));
  std::vector<Var> parts{ad::scale(a, 3.0), c, a};
  Var s = ad::sum_all(parts);
  CHECK(s.scalar() == doctest::Approx(13.0));
  tape.backward(s);
  CHECK(p.grad(0, 0) == doctest::Approx(4.0));
}
