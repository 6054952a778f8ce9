// SPDX-License-Identifier: Apache-2.0
#include "rankformer/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rankformer {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Mat build_mask(const MaskSpec& spec, const std::vector<Role>& roles,
               const std::vector<int>& position_ids,
               const std::vector<int>& query_rows) {
  spec.validate();
  const int l_kv = spec.l_kv;
  const int l_q = spec.l_q;
  if (static_cast<int>(roles.size()) != l_kv ||
      static_cast<int>(position_ids.size()) != l_kv) {
    throw ConfigError("build_mask: roles/position_ids must have l_kv entries");
  }
  if (static_cast<int>(query_rows.size()) != l_q) {
    throw ConfigError("build_mask: query_rows must have l_q entries");
  }

  // Number of non-candidate positions in the original sequence. Candidates
  // share this value as their position id; without candidates it is one
  // past the last position.
  int prefix_positions = 0;
  bool has_cand = false;
  for (int i = 0; i < l_kv; ++i) {
    if (roles[static_cast<size_t>(i)] == Role::kCand) {
      prefix_positions = position_ids[static_cast<size_t>(i)];
      has_cand = true;
      break;
    }
  }
  if (!has_cand) {
    for (int i = 0; i < l_kv; ++i) {
      prefix_positions = std::max(prefix_positions, position_ids[static_cast<size_t>(i)] + 1);
    }
  }

  Mat mask = Mat::Constant(l_q, l_kv, kNegInf);
  for (int r = 0; r < l_q; ++r) {
    const int qi = query_rows[static_cast<size_t>(r)];
    if (qi < 0 || qi >= l_kv) throw ConfigError("build_mask: query row out of range");
    const bool q_cand = roles[static_cast<size_t>(qi)] == Role::kCand;
    const int q_pos = position_ids[static_cast<size_t>(qi)];
    const bool windowed = !q_cand && spec.local_window != -1 &&
                          q_pos < prefix_positions - spec.full_suffix;
    bool any = false;
    for (int c = 0; c <= qi && c < l_kv; ++c) {
      const bool k_cand = roles[static_cast<size_t>(c)] == Role::kCand;
      if (q_cand) {
        // Candidate diagonal: the shared prefix plus itself, never another
        // candidate.
        if (k_cand && c != qi) continue;
      } else if (k_cand) {
        continue;  // causal order puts candidates last anyway
      } else if (windowed) {
        const int k_pos = position_ids[static_cast<size_t>(c)];
        if (k_pos < q_pos - spec.local_window + 1 || k_pos > q_pos) continue;
      }
      mask(r, c) = 0.0;
      any = true;
    }
    if (!any) {
      throw ConfigError("build_mask: query row " + std::to_string(r) +
                        " has no visible key");
    }
  }
  return mask;
}

Mat build_mask(const MaskSpec& spec, const std::vector<Role>& roles,
               const std::vector<int>& position_ids) {
  std::vector<int> rows(static_cast<size_t>(spec.l_q));
  for (int i = 0; i < spec.l_q; ++i) {
    rows[static_cast<size_t>(i)] = spec.prune_offset() + i;
  }
  return build_mask(spec, roles, position_ids, rows);
}

int64_t mask_visible_count(const Mat& mask) {
  int64_t n = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) == 0.0) ++n;
    }
  }
  return n;
}

PruneSchedule make_geometric_schedule(int prefix_len, int depth, int target) {
  if (depth < 1) throw ConfigError("make_geometric_schedule: depth must be >= 1");
  if (prefix_len < 1) prefix_len = 1;
  const int final_keep = std::min(target, prefix_len);
  PruneSchedule s;
  s.keep.resize(static_cast<size_t>(depth));
  if (depth == 1) {
    s.keep[0] = final_keep;
    return s;
  }
  const double ratio = static_cast<double>(final_keep) / static_cast<double>(prefix_len);
  int prev = prefix_len;
  for (int l = 0; l < depth; ++l) {
    const double t = static_cast<double>(l) / static_cast<double>(depth - 1);
    int k = static_cast<int>(std::lround(prefix_len * std::pow(ratio, t)));
    k = std::clamp(k, final_keep, prev);
    s.keep[static_cast<size_t>(l)] = k;
    prev = k;
  }
  return s;
}

PruneSchedule make_full_schedule(int prefix_len, int depth) {
  PruneSchedule s;
  s.keep.assign(static_cast<size_t>(depth), std::max(prefix_len, 1));
  return s;
}

Mat prune_queries(const Mat& x, int n) {
  if (n < 1 || n > x.rows()) {
    throw ConfigError("prune_queries: n must be in [1, rows]");
  }
  return x.bottomRows(n);
}

std::vector<int> retained_rows(const std::vector<Role>& roles, int keep,
                               bool keep_specials) {
  int non_cand = 0;
  for (Role r : roles) non_cand += (r != Role::kCand) ? 1 : 0;
  const int kept_non_cand = std::min(keep, non_cand);
  const int drop = non_cand - kept_non_cand;  // first `drop` non-candidates go
  std::vector<int> out;
  out.reserve(roles.size());
  int seen_non_cand = 0;
  for (size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] == Role::kCand) {
      out.push_back(static_cast<int>(i));
      continue;
    }
    const bool in_suffix = seen_non_cand >= drop;
    ++seen_non_cand;
    const bool special = roles[i] == Role::kBos || roles[i] == Role::kSep;
    if (in_suffix || (keep_specials && special)) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

}  // namespace rankformer
