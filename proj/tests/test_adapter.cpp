// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "loranoise/adapter.hpp"
#include "loranoise/matrix.hpp"
#include "loranoise/rng.hpp"
#include "loranoise/stats.hpp"

#ifdef LORANOISE_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace loranoise;

namespace {

// Mirrors the factor initialisation: the adapter consumes the handed
// stream directly, A ~ N(0, 1/r)^(r x m) and B = 0.
Matrix expected_a0(RngStream rng, std::size_t rank, std::size_t m) {
  return sample_gaussian_matrix(rng, rank, m, 1.0 / std::sqrt(static_cast<double>(rank)));
}

}  // namespace

TEST_SUITE("adapter") {

TEST_CASE("initial factor shapes and zero offset at paper-scale dims") {
  RngStream rng(1);
  const AdapterLayer layer = init_adapter(rng, 2304, 768, 16);
  CHECK(layer.b().rows() == 2304);
  CHECK(layer.b().cols() == 16);
  CHECK(layer.a().rows() == 16);
  CHECK(layer.a().cols() == 768);
  CHECK(max_abs(layer.b()) == 0.0);
  CHECK(layer.effective_weight() == layer.pretrained());
}

TEST_CASE("factor A matches the documented stream derivation") {
  RngStream rng(91);
  const AdapterLayer layer = init_adapter(rng, 12, 20, 4);
  CHECK(layer.a() == expected_a0(rng.substream(1), 4, 20));
  CHECK(layer.pretrained() == sample_gaussian_matrix(rng.substream(0), 12, 20, 1.0));
}

TEST_CASE("factor A variance concentrates on 1/r") {
  const std::size_t r = 4, m = 1024;
  std::vector<double> entries;
  entries.reserve(10 * r * m);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AdapterLayer layer = init_adapter(RngStream(100 + seed), 4, m, r);
    const auto span = layer.a().data();
    entries.insert(entries.end(), span.begin(), span.end());
  }
  const Moments mom = compute_moments(entries);
  CHECK(std::abs(mom.variance / 0.25 - 1.0) <= 0.05);
}

TEST_CASE("rank is bounded by min(n, m) and must be positive") {
  RngStream rng(2);
  CHECK_THROWS_AS(init_adapter(rng, 8, 6, 7), std::invalid_argument);
  CHECK_THROWS_AS(init_adapter(rng, 8, 6, 0), std::invalid_argument);
  CHECK_NOTHROW(init_adapter(rng, 8, 6, 6));
}

TEST_CASE("forward pass equals the effective weight applied to the input") {
  RngStream rng(3);
  AdapterLayer layer = init_adapter(rng, 10, 14, 3, false, 0.05);
  const Matrix x = sample_gaussian_matrix(rng.substream(7), 14, 5, 1.0);

  // Fresh adapter: B = 0, so forward is exactly the frozen weight path.
  CHECK(layer.forward(x) == matmul(layer.pretrained(), x));

  const Matrix g = sample_gaussian_matrix(rng.substream(8), 10, 14, 1.0);
  layer.sgd_step(g);
  layer.sgd_step(g);
  const Matrix via_forward = layer.forward(x);
  const Matrix via_weight = matmul(layer.effective_weight(), x);
  CHECK(max_abs_diff(via_forward, via_weight) <= 1e-10 * std::max(1.0, max_abs(via_weight)));

  CHECK(max_abs(layer.forward(Matrix(14, 5))) == 0.0);
}

TEST_CASE("factor gradients: fresh B kills grad_a, zero grad kills both") {
  RngStream rng(4);
  const AdapterLayer layer = init_adapter(rng, 6, 9, 2);
  const Matrix g = sample_gaussian_matrix(rng.substream(5), 6, 9, 1.0);

  const GradientRecord rec = lora_gradients(layer, g);
  CHECK(max_abs(rec.grad_a) == 0.0);  // B^T G with B = 0
  CHECK(rec.grad_b == matmul(g, transpose(layer.a())));

  const GradientRecord zero = lora_gradients(layer, Matrix(6, 9));
  CHECK(max_abs(zero.grad_a) == 0.0);
  CHECK(max_abs(zero.grad_b) == 0.0);

  CHECK_THROWS_AS(lora_gradients(layer, Matrix(9, 6)), ShapeError);
}

TEST_CASE("factor gradients satisfy the chain-rule adjoint identity") {
  RngStream rng(5);
  AdapterLayer layer = init_adapter(rng, 7, 11, 3, false, 0.02);
  // Step once so B is non-trivial and both factor gradients are exercised.
  layer.sgd_step(sample_gaussian_matrix(rng.substream(6), 7, 11, 1.0));

  const Matrix g = sample_gaussian_matrix(rng.substream(7), 7, 11, 1.0);
  const GradientRecord rec = lora_gradients(layer, g);

  // <grad_b, U> == <grad_w, U a> for any direction U (and the transposed
  // pairing for A), i.e. the factor gradients are the adjoints of the
  // bilinear map (B, A) -> B A.
  const Matrix u = sample_gaussian_matrix(rng.substream(8), 7, 3, 1.0);
  const double lhs_b = frobenius_inner(rec.grad_b, u);
  const double rhs_b = frobenius_inner(g, matmul(u, layer.a()));
  CHECK(lhs_b == doctest::Approx(rhs_b).epsilon(1e-9));

  const Matrix v = sample_gaussian_matrix(rng.substream(9), 3, 11, 1.0);
  const double lhs_a = frobenius_inner(rec.grad_a, v);
  const double rhs_a = frobenius_inner(g, matmul(layer.b(), v));
  CHECK(lhs_a == doctest::Approx(rhs_a).epsilon(1e-9));
}

TEST_CASE("one step from fresh factors lands on the projected update") {
  RngStream rng(6);
  AdapterLayer layer = init_adapter(rng, 9, 13, 4, false, 0.01);
  const Matrix a0 = layer.a();
  const Matrix w0 = layer.pretrained();
  const Matrix g = sample_gaussian_matrix(rng.substream(3), 9, 13, 1.0);

  layer.sgd_step(g);

  // B was zero, so A is untouched and the step is exactly
  // W0 - eta (G a0^T) a0, reproduced here in the same operation order.
  CHECK(layer.a() == a0);
  Matrix gb = matmul(g, transpose(a0));
  gb *= 0.01;
  const Matrix expected = w0 - matmul(gb, a0);
  CHECK(layer.effective_weight() == expected);
}

TEST_CASE("a zero gradient leaves the adapter bitwise unchanged") {
  RngStream rng(7);
  AdapterLayer layer = init_adapter(rng, 5, 8, 2, false, 0.1);
  layer.sgd_step(sample_gaussian_matrix(rng.substream(4), 5, 8, 1.0));
  const Matrix a_before = layer.a();
  const Matrix b_before = layer.b();
  layer.sgd_step(Matrix(5, 8));
  CHECK(layer.a() == a_before);
  CHECK(layer.b() == b_before);
}

TEST_CASE("frozen-A accumulation over a constant gradient") {
  const double eta = 0.03;
  RngStream rng(8);
  AdapterLayer layer = init_adapter(rng, 6, 10, 3, true, eta);
  const Matrix a0 = layer.a();
  const Matrix g = sample_gaussian_matrix(rng.substream(2), 6, 10, 1.0);
  for (int t = 0; t < 3; ++t) layer.sgd_step(g);

  const Matrix expected_b = (-3.0 * eta) * matmul(g, transpose(a0));
  CHECK(max_abs_diff(layer.b(), expected_b) <= 1e-12 * std::max(1.0, max_abs(expected_b)));
  CHECK(layer.a() == a0);
}

TEST_CASE("one trainable step coincides bitwise with one frozen step") {
  const RngStream rng(9);
  AdapterLayer trainable = init_adapter(rng, 8, 12, 3, false, 0.05);
  AdapterLayer frozen = init_adapter(rng, 8, 12, 3, true, 0.05);
  REQUIRE(trainable.a() == frozen.a());

  const Matrix g = sample_gaussian_matrix(RngStream(10), 8, 12, 1.0);
  trainable.sgd_step(g);
  frozen.sgd_step(g);
  CHECK(trainable.a() == frozen.a());
  CHECK(trainable.b() == frozen.b());
  CHECK(trainable.effective_weight() == frozen.effective_weight());
}

TEST_CASE("the base weight is immutable under training") {
  RngStream rng(11);
  AdapterLayer layer = init_adapter(rng, 6, 6, 2, false, 0.2);
  const Matrix w0 = layer.pretrained();
  for (std::uint64_t t = 0; t < 5; ++t)
    layer.sgd_step(sample_gaussian_matrix(rng.substream(20 + t), 6, 6, 1.0));
  CHECK(layer.pretrained() == w0);
}

TEST_CASE("projected update reference degenerate cases") {
  RngStream rng(12);
  const Matrix w0 = sample_gaussian_matrix(rng.substream(0), 5, 7, 1.0);
  const Matrix g = sample_gaussian_matrix(rng.substream(1), 5, 7, 1.0);
  const Matrix a0 = expected_a0(rng.substream(2), 3, 7);

  CHECK(projected_update_reference(w0, {}, a0, 0.1) == w0);

  // Orthonormal rows spanning everything (r = m): the projection is the
  // identity and the update collapses to plain SGD.
  const Matrix eye = Matrix::identity(7);
  const std::vector<Matrix> grads{g};
  const Matrix stepped = projected_update_reference(w0, grads, eye, 0.1);
  Matrix plain = g;
  plain *= 0.1;
  plain = w0 - plain;
  CHECK(stepped == plain);
}

TEST_CASE("frozen trajectory equals the accumulated projected update") {
  const std::size_t n = 32, m = 24, r = 4, steps = 50;
  const double eta = 0.02;
  RngStream rng(13);
  AdapterLayer layer = init_adapter(rng, n, m, r, true, eta);
  const Matrix w0 = layer.pretrained();
  const Matrix a0 = layer.a();

  std::vector<Matrix> grads;
  for (std::size_t t = 0; t < steps; ++t) {
    grads.push_back(sample_gaussian_matrix(rng.substream(100 + t), n, m, 1.0));
    layer.sgd_step(grads.back());
    const Matrix reference = projected_update_reference(w0, grads, a0, eta);
    const Matrix actual = layer.effective_weight();
    const double scale = std::max(1.0, max_abs(reference));
    CHECK(max_abs_diff(actual, reference) <= 1e-10 * scale);
  }
}

#ifdef LORANOISE_HAVE_EIGEN
TEST_CASE("the trained offset never leaves the rank-r manifold") {
  const std::size_t n = 20, m = 26, r = 5;
  RngStream rng(14);
  AdapterLayer layer = init_adapter(rng, n, m, r, false, 0.03);
  for (std::uint64_t t = 0; t < 4; ++t)
    layer.sgd_step(sample_gaussian_matrix(rng.substream(50 + t), n, m, 1.0));

  const Matrix offset = layer.effective_weight() - layer.pretrained();
  Eigen::MatrixXd e(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) e(static_cast<int>(i), static_cast<int>(j)) = offset(i, j);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues();
  REQUIRE(sv.size() == static_cast<int>(n));
  CHECK(sv(0) > 0.0);
  for (int i = static_cast<int>(r); i < sv.size(); ++i) CHECK(sv(i) <= 1e-9 * sv(0));
}
#endif

TEST_CASE("frozen-vs-trainable drift vanishes in the degenerate limits") {
  RngStream rng(15);
  const LeastSquaresProblem p = LeastSquaresProblem::random(RngStream(16), 12, 12, 8, 0.2);
  CHECK(frozen_a_approximation_error(rng, 12, 12, 3, 0.001, 1, p.gradient_fn()) == 0.0);
  CHECK(frozen_a_approximation_error(rng, 12, 12, 3, 0.0, 40, p.gradient_fn()) == 0.0);
}

TEST_CASE("frozen-vs-trainable drift stays small in the slow-rate regime") {
  const std::size_t n = 64, m = 64, r = 8, steps = 100;
  RngStream rng(17);
  const Matrix w0 = sample_gaussian_matrix(rng.substream(0), n, m, 1.0);
  const LeastSquaresProblem p = LeastSquaresProblem::random(RngStream(18), n, m, 64, 0.125);
  const double eta = 1.0 / (100.0 * frobenius_norm(p.gradient(w0)));
  const double ratio = frozen_a_approximation_error(rng, n, m, r, eta, steps, p.gradient_fn());
  CHECK(ratio > 0.0);
  CHECK(ratio < 0.1);
}

TEST_CASE("least-squares oracle: interpolating weights have zero gradient") {
  RngStream rng(19);
  const Matrix w_star = sample_gaussian_matrix(rng.substream(0), 6, 9, 1.0);
  LeastSquaresProblem p;
  p.inputs = sample_gaussian_matrix(rng.substream(1), 9, 4, 1.0);
  p.targets = matmul(w_star, p.inputs);
  CHECK(max_abs(p.gradient(w_star)) == 0.0);
  CHECK(p.loss(w_star) == 0.0);
  CHECK(p.loss(2.0 * w_star) > 0.0);
}

}  // TEST_SUITE("adapter")
