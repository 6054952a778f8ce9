// SPDX-License-Identifier: Apache-2.0
#include "rankformer/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>

namespace rankformer {

std::optional<double> compute_auc(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("compute_auc: scores/labels length mismatch");
  }
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int y : labels) n_pos += (y > 0) ? 1u : 0u;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Sum of average ranks (1-based) over positives; ties share a rank.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] > 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> compute_gauc(const std::vector<double>& scores,
                                   const std::vector<int>& labels,
                                   const std::vector<int64_t>& request_ids) {
  if (scores.size() != labels.size() || scores.size() != request_ids.size()) {
    throw std::invalid_argument("compute_gauc: length mismatch");
  }
  std::map<int64_t, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (size_t i = 0; i < scores.size(); ++i) {
    auto& g = groups[request_ids[i]];
    g.first.push_back(scores[i]);
    g.second.push_back(labels[i]);
  }
  double sum = 0.0;
  size_t count = 0;
  for (auto& [rid, g] : groups) {
    auto auc = compute_auc(g.first, g.second);
    if (auc) {
      sum += *auc;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace rankformer
