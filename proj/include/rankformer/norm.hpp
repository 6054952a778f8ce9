// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/common.hpp"

namespace rankformer {

constexpr double kRmsEps = 1e-6;

struct RmsNormCache {
  Mat x;        // pre-norm input
  Vec inv_rms;  // 1/rms per row
};

/// Row-wise RMS normalization with a learned gain: y = (x / rms(x)) .* gain.
/// gain is 1 x cols. The eps guard makes the all-zero row map to zero.
inline Mat rmsnorm_forward(const Mat& x, const Mat& gain, RmsNormCache& cache) {
  const auto cols = x.cols();
  cache.x = x;
  cache.inv_rms.resize(x.rows());
  Mat y(x.rows(), cols);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double ms = x.row(r).squaredNorm() / static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(ms + kRmsEps);
    cache.inv_rms(r) = inv;
    y.row(r) = (x.row(r) * inv).cwiseProduct(gain.row(0));
  }
  return y;
}

/// Backward for rmsnorm_forward. Accumulates into dgain, returns dx.
inline Mat rmsnorm_backward(const Mat& dy, const RmsNormCache& cache, const Mat& gain,
                            Mat& dgain) {
  const auto cols = cache.x.cols();
  Mat dx(cache.x.rows(), cols);
  for (Eigen::Index r = 0; r < cache.x.rows(); ++r) {
    const double inv = cache.inv_rms(r);
    const Eigen::RowVectorXd xhat = cache.x.row(r) * inv;
    dgain.row(0) += dy.row(r).cwiseProduct(xhat);
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.row(0));
    const double proj = dxhat.dot(xhat) / static_cast<double>(cols);
    dx.row(r) = (dxhat - proj * xhat) * inv;
  }
  return dx;
}

}  // namespace rankformer
