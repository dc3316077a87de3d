// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "loranoise/matrix.hpp"

namespace loranoise {

// Counter-keyed pseudo-random stream: xoshiro256++ seeded from a
// splitmix64 hash of (seed, stream_id).
//
// Design constraints, all load-bearing for reproducibility:
//  * a (seed, stream_id) pair fully determines the sequence;
//  * substream(i) derives an independent child stream, so parallel
//    workers can be handed disjoint streams that do not depend on how
//    work is scheduled;
//  * every sampler consumes a fixed number of raw 64-bit draws per
//    output (normal pairs use exactly two), so interleaving experiments
//    cannot silently shift downstream samples;
//  * streams are cheap values - pass them by value, and a replay of the
//    same value yields bitwise-identical output.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent child stream; deterministic in (seed, stream_id, child).
  RngStream substream(std::uint64_t child) const;

  // Raw 64-bit output.
  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits; one raw draw.
  double next_uniform();

  // Standard normal via Box-Muller; consumes exactly two raw draws and
  // keeps no cached spare, so the draw count per call is constant.
  double next_normal();

  // Fills `out` with iid N(0, std^2); consumes 2*ceil(n/2) raw draws.
  void fill_normal(std::span<double> out, double std_dev = 1.0);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

// rows x cols matrix of iid N(0, std^2) entries, row-major fill order.
// The stream is taken by value: calling twice with the same stream value
// returns bitwise-identical matrices.
Matrix sample_gaussian_matrix(RngStream rng, std::size_t rows, std::size_t cols,
                              double std_dev);

}  // namespace loranoise
