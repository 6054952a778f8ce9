// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/common.hpp"

#include <vector>

namespace rankformer {

/// Rotary position transform over 2-channel pairs using each row's original
/// position id. Pass inverse=true to rotate back (the exact adjoint, used in
/// the backward pass). Requires an even number of columns.
inline Mat rope_apply(const Mat& x, const std::vector<int>& position_ids,
                      double theta_base, bool inverse = false) {
  const auto dim = x.cols();
  if (dim % 2 != 0) throw ConfigError("rope_apply: head dim must be even");
  if (static_cast<Eigen::Index>(position_ids.size()) != x.rows()) {
    throw ConfigError("rope_apply: one position id per row required");
  }
  Mat out(x.rows(), dim);
  const auto n_pairs = dim / 2;
  std::vector<double> freq(static_cast<size_t>(n_pairs));
  for (Eigen::Index j = 0; j < n_pairs; ++j) {
    freq[static_cast<size_t>(j)] =
        std::pow(theta_base, -2.0 * static_cast<double>(j) / static_cast<double>(dim));
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double p = static_cast<double>(position_ids[static_cast<size_t>(r)]);
    for (Eigen::Index j = 0; j < n_pairs; ++j) {
      const double angle = (inverse ? -p : p) * freq[static_cast<size_t>(j)];
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double x0 = x(r, 2 * j);
      const double x1 = x(r, 2 * j + 1);
      out(r, 2 * j) = c * x0 - s * x1;
      out(r, 2 * j + 1) = s * x0 + c * x1;
    }
  }
  return out;
}

}  // namespace rankformer
