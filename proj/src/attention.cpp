// SPDX-License-Identifier: Apache-2.0
#include "rankformer/attention.hpp"

#include <limits>

namespace rankformer {

namespace {

Mat gather_rows(const Mat& x, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

// Row-wise softmax over logits that already include the -inf mask.
Mat masked_softmax(const Mat& s) {
  Mat a(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    if (!(m > -std::numeric_limits<double>::infinity())) {
      throw RuntimeFailure("attention: fully masked query row");
    }
    Eigen::ArrayXd e = (s.row(r).array() - m).exp();
    a.row(r) = (e / e.sum()).matrix();
  }
  return a;
}

}  // namespace

AttentionLayer::AttentionLayer(const AttentionSettings& s, int layer_idx) : s_(s) {
  s_.validate();
  const int d = s_.model_dim;
  const std::string base = "attn." + std::to_string(layer_idx) + ".";
  wq_ = Parameter(base + "wq", d, d);
  wk_ = Parameter(base + "wk", d, d);
  wv_ = Parameter(base + "wv", d, d);
  wo_ = Parameter(base + "wo", d, d);
  if (s_.gate) wg_ = Parameter(base + "wg", d, d);
  if (s_.qknorm) {
    gain_q_ = Parameter(base + "qk_gain_q", s_.heads, s_.head_dim());
    gain_k_ = Parameter(base + "qk_gain_k", s_.heads, s_.head_dim());
  }
}

void AttentionLayer::init(RandomStream& rng, double std, double out_scale) {
  rng.fill_normal(wq_.value, std);
  rng.fill_normal(wk_.value, std);
  rng.fill_normal(wv_.value, std);
  rng.fill_normal(wo_.value, std * out_scale);
  if (s_.gate) rng.fill_normal(wg_.value, std);
  if (s_.qknorm) {
    gain_q_.value.setOnes();
    gain_k_.value.setOnes();
  }
}

ParamRefs AttentionLayer::params() {
  ParamRefs out{&wq_, &wk_, &wv_, &wo_};
  if (s_.gate) out.push_back(&wg_);
  if (s_.qknorm) {
    out.push_back(&gain_q_);
    out.push_back(&gain_k_);
  }
  return out;
}

Mat AttentionLayer::forward(const Mat& xn, const std::vector<int>& query_rows,
                            const Mat& mask, const std::vector<int>& position_ids,
                            AttentionCache& cache) const {
  const int d = s_.model_dim;
  const int h = s_.heads;
  const int dk = s_.head_dim();
  const auto l_q = static_cast<Eigen::Index>(query_rows.size());
  if (xn.cols() != d) throw RuntimeFailure("attention: input width mismatch");
  if (mask.rows() != l_q || mask.cols() != xn.rows()) {
    throw RuntimeFailure("attention: mask shape mismatch");
  }

  cache = AttentionCache{};
  cache.xn = xn;
  cache.query_rows = query_rows;
  cache.xq = gather_rows(xn, query_rows);
  cache.pos_kv = position_ids;
  cache.pos_q.resize(query_rows.size());
  for (size_t i = 0; i < query_rows.size(); ++i) {
    cache.pos_q[i] = position_ids[static_cast<size_t>(query_rows[i])];
  }

  cache.q_raw.noalias() = cache.xq * wq_.value;
  cache.k_raw.noalias() = xn * wk_.value;
  cache.v.noalias() = xn * wv_.value;

  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  cache.q_rot.resize(static_cast<size_t>(h));
  cache.k_rot.resize(static_cast<size_t>(h));
  cache.attn.resize(static_cast<size_t>(h));
  if (s_.qknorm) {
    cache.q_norm.resize(static_cast<size_t>(h));
    cache.k_norm.resize(static_cast<size_t>(h));
  }
  cache.out_pre_gate.resize(l_q, d);

  for (int i = 0; i < h; ++i) {
    const auto hi = static_cast<size_t>(i);
    Mat q = cache.q_raw.middleCols(i * dk, dk);
    Mat k = cache.k_raw.middleCols(i * dk, dk);
    if (s_.qknorm) {
      q = rmsnorm_forward(q, gain_q_.value.row(i), cache.q_norm[hi]);
      k = rmsnorm_forward(k, gain_k_.value.row(i), cache.k_norm[hi]);
    }
    cache.q_rot[hi] = rope_apply(q, cache.pos_q, s_.rope_theta);
    cache.k_rot[hi] = rope_apply(k, cache.pos_kv, s_.rope_theta);

    Mat logits = (cache.q_rot[hi] * cache.k_rot[hi].transpose()) * scale + mask;
    cache.attn[hi] = masked_softmax(logits);
    cache.out_pre_gate.middleCols(i * dk, dk).noalias() =
        cache.attn[hi] * cache.v.middleCols(i * dk, dk);
  }

  if (s_.gate) {
    cache.g_raw.noalias() = cache.xq * wg_.value;
    cache.g_sig = cache.g_raw.unaryExpr([](double x) { return sigmoid(x); });
    cache.h_concat = cache.g_sig.cwiseProduct(cache.out_pre_gate);
  } else {
    cache.h_concat = cache.out_pre_gate;
  }
  return cache.h_concat * wo_.value;
}

Mat AttentionLayer::backward(const Mat& dout, const AttentionCache& cache,
                             GradBuffer& grads, const ParamIndex& index) const {
  const int d = s_.model_dim;
  const int h = s_.heads;
  const int dk = s_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  grads[index.of(wo_)].noalias() += cache.h_concat.transpose() * dout;
  Mat dh = dout * wo_.value.transpose();

  Mat dout_pre_gate;
  if (s_.gate) {
    Mat dg_sig = dh.cwiseProduct(cache.out_pre_gate);
    dout_pre_gate = dh.cwiseProduct(cache.g_sig);
    Mat dg_raw = dg_sig.cwiseProduct(
        cache.g_sig.cwiseProduct(Mat::Ones(dh.rows(), d) - cache.g_sig));
    grads[index.of(wg_)].noalias() += cache.xq.transpose() * dg_raw;
    // d(xq) from the gate path is folded in with the query path below.
    dout_pre_gate_gate_dxq_ = dg_raw * wg_.value.transpose();
  } else {
    dout_pre_gate = dh;
  }

  Mat dq_raw = Mat::Zero(cache.xq.rows(), d);
  Mat dk_raw = Mat::Zero(cache.xn.rows(), d);
  Mat dv = Mat::Zero(cache.xn.rows(), d);

  for (int i = 0; i < h; ++i) {
    const auto hi = static_cast<size_t>(i);
    const Mat dО = dout_pre_gate.middleCols(i * dk, dk);
    const Mat& a = cache.attn[hi];
    Mat da = dО * cache.v.middleCols(i * dk, dk).transpose();
    dv.middleCols(i * dk, dk).noalias() += a.transpose() * dО;

    // Softmax backward; masked entries have a == 0 so they contribute 0.
    Mat ds(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double dot = da.row(r).dot(a.row(r));
      ds.row(r) = a.row(r).cwiseProduct(da.row(r) - Eigen::RowVectorXd::Constant(a.cols(), dot));
    }

    Mat dq_rot = (ds * cache.k_rot[hi]) * scale;
    Mat dk_rot = (ds.transpose() * cache.q_rot[hi]) * scale;
    Mat dq = rope_apply(dq_rot, cache.pos_q, s_.rope_theta, /*inverse=*/true);
    Mat dkk = rope_apply(dk_rot, cache.pos_kv, s_.rope_theta, /*inverse=*/true);
    if (s_.qknorm) {
      dq = rmsnorm_backward(dq, cache.q_norm[hi], gain_q_.value.row(i),
                            grads[index.of(gain_q_)], i);
      dkk = rmsnorm_backward(dkk, cache.k_norm[hi], gain_k_.value.row(i),
                             grads[index.of(gain_k_)], i);
    }
    dq_raw.middleCols(i * dk, dk) = dq;
    dk_raw.middleCols(i * dk, dk) = dkk;
  }

  grads[index.of(wq_)].noalias() += cache.xq.transpose() * dq_raw;
  grads[index.of(wk_)].noalias() += cache.xn.transpose() * dk_raw;
  grads[index.of(wv_)].noalias() += cache.xn.transpose() * dv;

  Mat dxq = dq_raw * wq_.value.transpose();
  if (s_.gate) dxq += dout_pre_gate_gate_dxq_;

  Mat dxn = dk_raw * wk_.value.transpose();
  dxn.noalias() += dv * wv_.value.transpose();
  for (size_t i = 0; i < cache.query_rows.size(); ++i) {
    dxn.row(cache.query_rows[i]) += dxq.row(static_cast<Eigen::Index>(i));
  }
  return dxn;
}

Mat AttentionLayer::mean_logits(const AttentionCache& cache) const {
  const int h = s_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(s_.head_dim()));
  Mat mean = Mat::Zero(cache.q_rot[0].rows(), cache.k_rot[0].rows());
  for (int i = 0; i < h; ++i) {
    const auto hi = static_cast<size_t>(i);
    mean += (cache.q_rot[hi] * cache.k_rot[hi].transpose()) * scale;
  }
  return mean / static_cast<double>(h);
}

}  // namespace rankformer
