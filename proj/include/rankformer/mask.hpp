// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/common.hpp"
#include "rankformer/tokenizer.hpp"

#include <vector>

namespace rankformer {

// Declarative description of one layer's structured attention mask:
// causal base, sliding window over history, full causal for the last
// full_suffix prefix positions and for candidates, candidate diagonal.
// Rendered entries are 0 (visible) or -inf (masked).
struct MaskSpec {
  int l_q = 0;
  int l_kv = 0;
  int local_window = -1;  // -1 means unbounded (plain causal)
  int full_suffix = 128;  // F: prefix positions near the candidates

  int prune_offset() const { return l_kv - l_q; }
  void validate() const {
    if (l_q < 1 || l_kv < l_q) {
      throw ConfigError("MaskSpec: need 1 <= l_q <= l_kv");
    }
    if (local_window != -1 && local_window < 1) {
      throw ConfigError("MaskSpec: local_window must be >= 1 or -1 (unbounded)");
    }
    if (full_suffix < 0) throw ConfigError("MaskSpec: full_suffix must be >= 0");
  }
};

/// Renders the mask for query rows `query_rows` (indices into the kv token
/// list, strictly increasing; the default suffix pruning uses the last l_q).
/// roles/position_ids describe the kv tokens and carry ORIGINAL positions.
Mat build_mask(const MaskSpec& spec, const std::vector<Role>& roles,
               const std::vector<int>& position_ids,
               const std::vector<int>& query_rows);

/// Convenience overload for suffix pruning: query rows are the last l_q.
Mat build_mask(const MaskSpec& spec, const std::vector<Role>& roles,
               const std::vector<int>& position_ids);

int64_t mask_visible_count(const Mat& mask);

// Per-layer non-candidate keep counts, monotone non-increasing; candidates
// are always kept.
struct PruneSchedule {
  std::vector<int> keep;

  void validate() const {
    for (size_t i = 0; i + 1 < keep.size(); ++i) {
      if (keep[i + 1] > keep[i]) {
        throw ConfigError("PruneSchedule: keep counts must be non-increasing");
      }
    }
    for (int k : keep) {
      if (k < 1) throw ConfigError("PruneSchedule: keep counts must be >= 1");
    }
  }
};

/// Geometric interpolation from the full prefix at the first layer down to
/// min(target, prefix_len) at the last.
PruneSchedule make_geometric_schedule(int prefix_len, int depth, int target);

/// No-op schedule (query pruning disabled).
PruneSchedule make_full_schedule(int prefix_len, int depth);

/// Extracts the last n rows of x (the paper-literal pruning function).
Mat prune_queries(const Mat& x, int n);

/// Retained kv indices for one layer: the last `keep` non-candidates plus
/// all candidates; with keep_specials, BOS/SEP rows survive as well.
std::vector<int> retained_rows(const std::vector<Role>& roles, int keep,
                               bool keep_specials);

}  // namespace rankformer
