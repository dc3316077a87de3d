// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace loranoise {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  // splitmix64 chain keyed by both identifiers; xoshiro256++ requires a
  // not-all-zero state, which the chain makes astronomically unlikely,
  // but guard anyway.
  std::uint64_t x = mix64(seed + kGolden) ^ mix64(stream_id + 2 * kGolden);
  for (auto& word : state_) {
    x += kGolden;
    word = mix64(x);
  }
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = kGolden;
}

RngStream RngStream::substream(std::uint64_t child) const {
  return RngStream(seed_, mix64(stream_id_ + kGolden) ^ (child + 1));
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++ (Blackman, Vigna 2018).
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_normal() {
  // Box-Muller, cosine branch only: fixed two-draw cost, no cached spare.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void RngStream::fill_normal(std::span<double> out, double std_dev) {
  if (!(std_dev >= 0.0)) throw std::invalid_argument("fill_normal: std_dev must be >= 0");
  std::size_t i = 0;
  // Both Box-Muller branches per draw pair; exactly 2*ceil(n/2) raw draws.
  for (; i + 1 < out.size(); i += 2) {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double radius = std_dev * std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    out[i] = radius * std::cos(angle);
    out[i + 1] = radius * std::sin(angle);
  }
  if (i < out.size()) out[i] = std_dev * next_normal();
}

Matrix sample_gaussian_matrix(RngStream rng, std::size_t rows, std::size_t cols,
                              double std_dev) {
  if (!(std_dev > 0.0)) {
    throw std::invalid_argument("sample_gaussian_matrix: std_dev must be positive");
  }
  Matrix m(rows, cols);
  rng.fill_normal(m.data(), std_dev);
  return m;
}

}  // namespace loranoise
