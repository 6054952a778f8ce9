// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/mask.hpp"
#include "rankformer/norm.hpp"
#include "rankformer/params.hpp"
#include "rankformer/rope.hpp"

#include <vector>

namespace rankformer {

struct AttentionSettings {
  int model_dim = 64;
  int heads = 4;
  bool qknorm = true;
  bool gate = true;
  double rope_theta = 10000.0;

  int head_dim() const { return model_dim / heads; }
  void validate() const {
    if (heads < 1 || model_dim % heads != 0) {
      throw ConfigError("attention: model_dim must be a positive multiple of heads");
    }
    if (head_dim() % 2 != 0) {
      throw ConfigError("attention: head dim must be even for the rotary transform");
    }
  }
};

struct AttentionCache {
  Mat xn;         // layer input, l_in x d
  Mat xq;         // gathered query rows, l_q x d
  Mat q_raw, k_raw, v;  // projections, heads packed side by side
  Mat g_raw, g_sig;     // gate pre-activation and sigmoid (if gated)
  std::vector<RmsNormCache> q_norm, k_norm;  // per head (if qknorm)
  std::vector<Mat> q_rot, k_rot;             // post-norm post-rope per head
  std::vector<Mat> attn;                     // softmax weights per head
  Mat out_pre_gate;                          // concatenated head outputs A*V
  Mat h_concat;                              // gated head outputs
  std::vector<int> pos_q, pos_kv;
  std::vector<int> query_rows;
};

// One multi-head attention layer: Q/K/V/G projections on the (pruned) input,
// per-head RMS normalization of queries and keys, rotary positions, masked
// scaled dot-product, sigmoid output gate, head concat and output projection.
class AttentionLayer {
 public:
  AttentionLayer(const AttentionSettings& s, int layer_idx);

  void init(RandomStream& rng, double std, double out_scale);
  ParamRefs params();

  /// xn: normalized layer input (l_in x d). query_rows: indices into xn for
  /// the retained queries. mask: l_q x l_in. position_ids: original ids for
  /// all kv rows (query positions are gathered from it).
  Mat forward(const Mat& xn, const std::vector<int>& query_rows, const Mat& mask,
              const std::vector<int>& position_ids, AttentionCache& cache) const;

  /// Returns d(xn); accumulates parameter gradients.
  Mat backward(const Mat& dout, const AttentionCache& cache, GradBuffer& grads,
               const ParamIndex& index) const;

  /// Head-averaged scaled logits (pre-mask) for the analysis tooling.
  Mat mean_logits(const AttentionCache& cache) const;

  const AttentionSettings& settings() const { return s_; }

 private:
  AttentionSettings s_;
  Parameter wq_, wk_, wv_, wg_, wo_;
  Parameter gain_q_, gain_k_;  // heads x head_dim
};

}  // namespace rankformer
