// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace loranoise {

// Shortest decimal string that round-trips the double (std::to_chars).
// Keeps CSV/JSON output byte-stable across runs and locales.
inline std::string double_to_string(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace loranoise
