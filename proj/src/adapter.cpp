// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace loranoise {

AdapterLayer::AdapterLayer(Matrix w0, RngStream rng, std::size_t rank, bool frozen_a,
                           double eta)
    : frozen_a_(frozen_a), eta_(eta) {
  if (w0.empty()) throw std::invalid_argument("adapter needs a non-empty base weight");
  if (rank == 0 || rank > std::min(w0.rows(), w0.cols())) {
    throw std::invalid_argument("adapter rank " + std::to_string(rank) +
                                " out of range [1, min(n, m)] for " +
                                std::to_string(w0.rows()) + "x" + std::to_string(w0.cols()));
  }
  if (!(eta > 0.0)) throw std::invalid_argument("adapter learning rate must be positive");
  const std::size_t n = w0.rows(), m = w0.cols();
  w0_ = std::make_shared<const Matrix>(std::move(w0));
  a_ = sample_gaussian_matrix(rng, rank, m, 1.0 / std::sqrt(static_cast<double>(rank)));
  b_ = Matrix(n, rank);
}

Matrix AdapterLayer::forward(const Matrix& x) const {
  return matmul(*w0_, x) + matmul(b_, matmul(a_, x));
}

void AdapterLayer::sgd_step(const Matrix& grad_w) {
  if (grad_w.rows() != n() || grad_w.cols() != m()) {
    throw ShapeError("adapter step: grad_w must be " + std::to_string(n()) + "x" +
                     std::to_string(m()));
  }
  // Factor gradients from the pre-step factors, applied jointly.
  Matrix grad_b = matmul(grad_w, transpose(a_));
  if (!grad_b.all_finite()) throw DivergenceError("adapter step: non-finite B gradient");
  if (!frozen_a_) {
    Matrix grad_a = matmul(transpose(b_), grad_w);
    if (!grad_a.all_finite()) throw DivergenceError("adapter step: non-finite A gradient");
    grad_a *= eta_;
    a_ -= grad_a;
  }
  grad_b *= eta_;
  b_ -= grad_b;
}

Matrix AdapterLayer::effective_weight() const { return *w0_ + matmul(b_, a_); }

GradientRecord lora_gradients(const AdapterLayer& layer, Matrix grad_w, int step) {
  if (grad_w.rows() != layer.n() || grad_w.cols() != layer.m()) {
    throw ShapeError("lora_gradients: grad_w must be " + std::to_string(layer.n()) + "x" +
                     std::to_string(layer.m()));
  }
  GradientRecord rec;
  rec.step = step;
  rec.grad_a = matmul(transpose(layer.b()), grad_w);
  rec.grad_b = matmul(grad_w, transpose(layer.a()));
  rec.grad_w = std::move(grad_w);
  return rec;
}

AdapterLayer init_adapter(RngStream rng, std::size_t n, std::size_t m, std::size_t rank,
                          bool frozen_a, double eta) {
  Matrix w0 = sample_gaussian_matrix(rng.substream(0), n, m, 1.0);
  return AdapterLayer(std::move(w0), rng.substream(1), rank, frozen_a, eta);
}

Matrix projected_update_reference(const Matrix& w0, std::span<const Matrix> grads,
                                  const Matrix& a0, double eta) {
  if (a0.cols() != w0.cols()) {
    throw ShapeError("projected_update_reference: a0 columns must match w0 columns");
  }
  const Matrix a0t = transpose(a0);
  Matrix w = w0;
  for (const Matrix& g : grads) {
    if (g.rows() != w0.rows() || g.cols() != w0.cols()) {
      throw ShapeError("projected_update_reference: gradient shape mismatch");
    }
    Matrix step = matmul(matmul(g, a0t), a0);
    step *= eta;
    w -= step;
  }
  return w;
}

double frozen_a_approximation_error(RngStream rng, std::size_t n, std::size_t m,
                                    std::size_t rank, double eta, std::size_t steps,
                                    const GradientFn& grad_fn) {
  if (eta < 0.0) throw std::invalid_argument("learning rate must be non-negative");
  if (eta == 0.0) return 0.0;

  // Same stream value twice -> bitwise-identical W0 and A0 for both runs.
  AdapterLayer trainable = init_adapter(rng, n, m, rank, /*frozen_a=*/false, eta);
  AdapterLayer frozen = init_adapter(rng, n, m, rank, /*frozen_a=*/true, eta);
  const Matrix w0 = trainable.pretrained();

  for (std::size_t t = 0; t < steps; ++t) {
    Matrix g_trainable = grad_fn(trainable.effective_weight());
    Matrix g_frozen = grad_fn(frozen.effective_weight());
    if (!g_trainable.all_finite() || !g_frozen.all_finite()) {
      throw DivergenceError("frozen_a_approximation_error: non-finite gradient at step " +
                            std::to_string(t));
    }
    trainable.sgd_step(g_trainable);
    frozen.sgd_step(g_frozen);
  }

  const Matrix w_trainable = trainable.effective_weight();
  const Matrix w_frozen = frozen.effective_weight();
  if (!w_trainable.all_finite() || !w_frozen.all_finite()) {
    throw DivergenceError("frozen_a_approximation_error: trajectory diverged");
  }
  const double drift = frobenius_norm(w_trainable - w_frozen);
  const double moved = frobenius_norm(w_frozen - w0);
  return moved > 0.0 ? drift / moved : 0.0;
}

LeastSquaresProblem LeastSquaresProblem::random(RngStream rng, std::size_t n, std::size_t m,
                                                std::size_t k, double scale) {
  LeastSquaresProblem p;
  p.inputs = sample_gaussian_matrix(rng.substream(0), m, k, scale);
  p.targets = sample_gaussian_matrix(rng.substream(1), n, k, scale);
  return p;
}

Matrix LeastSquaresProblem::gradient(const Matrix& w_eff) const {
  return matmul(matmul(w_eff, inputs) - targets, transpose(inputs));
}

double LeastSquaresProblem::loss(const Matrix& w_eff) const {
  const double r = frobenius_norm(matmul(w_eff, inputs) - targets);
  return 0.5 * r * r;
}

GradientFn LeastSquaresProblem::gradient_fn() const {
  return [problem = *this](const Matrix& w) { return problem.gradient(w); };
}

}  // namespace loranoise
