// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace rankformer {

template <typename Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct BlockAttentionResult {
  MatT<Scalar> output;
  int64_t skipped_blocks = 0;
  int64_t total_blocks = 0;

  double skipped_fraction() const {
    return total_blocks == 0
               ? 0.0
               : static_cast<double>(skipped_blocks) / static_cast<double>(total_blocks);
  }
};

/// Reference masked attention: softmax((Q K^T)/sqrt(d_k) + mask) V, row-wise
/// max-subtracted softmax. Mask entries are 0 (visible) or -inf.
template <typename Scalar>
MatT<Scalar> dense_masked_attention(const MatT<Scalar>& q, const MatT<Scalar>& k,
                                    const MatT<Scalar>& v, const MatT<Scalar>& mask) {
  const auto l_q = q.rows();
  const auto l_kv = k.rows();
  if (v.rows() != l_kv || mask.rows() != l_q || mask.cols() != l_kv) {
    throw std::invalid_argument("dense_masked_attention: shape mismatch");
  }
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  MatT<Scalar> s = (q * k.transpose()) * scale + mask;
  MatT<Scalar> out(l_q, v.cols());
  for (Eigen::Index r = 0; r < l_q; ++r) {
    const Scalar m = s.row(r).maxCoeff();
    if (!(m > -std::numeric_limits<Scalar>::infinity())) {
      throw std::invalid_argument("dense_masked_attention: fully masked query row");
    }
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e = (s.row(r).array() - m).exp();
    const Scalar denom = e.sum();
    out.row(r) = (e.matrix() / denom) * v;
  }
  return out;
}

/// Block-wise masked attention with streaming-softmax accumulation across
/// key blocks. Fully masked B x B tiles are detected up front and skipped
/// before any score computation; the result matches the dense path.
template <typename Scalar>
BlockAttentionResult<Scalar> blockwise_masked_attention(const MatT<Scalar>& q,
                                                        const MatT<Scalar>& k,
                                                        const MatT<Scalar>& v,
                                                        const MatT<Scalar>& mask,
                                                        int block = 16) {
  const auto l_q = q.rows();
  const auto l_kv = k.rows();
  const auto d_v = v.cols();
  if (block < 1) throw std::invalid_argument("blockwise_masked_attention: block >= 1");
  if (v.rows() != l_kv || mask.rows() != l_q || mask.cols() != l_kv) {
    throw std::invalid_argument("blockwise_masked_attention: shape mismatch");
  }
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));

  BlockAttentionResult<Scalar> res;
  res.output.setZero(l_q, d_v);

  using ArrX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  for (Eigen::Index q0 = 0; q0 < l_q; q0 += block) {
    const Eigen::Index qn = std::min<Eigen::Index>(block, l_q - q0);
    ArrX row_max = ArrX::Constant(qn, kNegInf);
    ArrX row_sum = ArrX::Zero(qn);
    MatT<Scalar> acc = MatT<Scalar>::Zero(qn, d_v);

    for (Eigen::Index k0 = 0; k0 < l_kv; k0 += block) {
      const Eigen::Index kn = std::min<Eigen::Index>(block, l_kv - k0);
      ++res.total_blocks;
      // Mask preload + validation: skip tiles with no visible entry.
      bool any_visible = false;
      for (Eigen::Index r = 0; r < qn && !any_visible; ++r) {
        for (Eigen::Index c = 0; c < kn; ++c) {
          if (mask(q0 + r, k0 + c) == Scalar(0)) {
            any_visible = true;
            break;
          }
        }
      }
      if (!any_visible) {
        ++res.skipped_blocks;
        continue;
      }

      MatT<Scalar> s = (q.middleRows(q0, qn) * k.middleRows(k0, kn).transpose()) * scale;
      s += mask.block(q0, k0, qn, kn);

      MatT<Scalar> p(qn, kn);
      for (Eigen::Index r = 0; r < qn; ++r) {
        const Scalar tile_max = s.row(r).maxCoeff();
        if (!(tile_max > kNegInf)) {  // row fully masked within this tile
          p.row(r).setZero();
          continue;
        }
        const Scalar new_max = std::max(row_max(r), tile_max);
        const Scalar correction =
            row_max(r) > kNegInf ? std::exp(row_max(r) - new_max) : Scalar(0);
        row_sum(r) *= correction;
        acc.row(r) *= correction;
        for (Eigen::Index c = 0; c < kn; ++c) {
          const Scalar sv = s(r, c);
          p(r, c) = sv > kNegInf ? std::exp(sv - new_max) : Scalar(0);
        }
        row_sum(r) += p.row(r).sum();
        row_max(r) = new_max;
      }
      acc.noalias() += p * v.middleRows(k0, kn);
    }

    for (Eigen::Index r = 0; r < qn; ++r) {
      if (!(row_sum(r) > Scalar(0))) {
        throw std::invalid_argument("blockwise_masked_attention: fully masked query row");
      }
      res.output.row(q0 + r) = acc.row(r) / row_sum(r);
    }
  }
  return res;
}

}  // namespace rankformer
