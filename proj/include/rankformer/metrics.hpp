// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

namespace rankformer {

/// ROC AUC via the Mann-Whitney U statistic with average ranks, so ties get
/// half credit. Returns nullopt when one class is absent (AUC undefined).
std::optional<double> compute_auc(const std::vector<double>& scores,
                                  const std::vector<int>& labels);

/// Per-request AUC averaged over requests where both classes appear.
/// request_ids must align with scores/labels.
std::optional<double> compute_gauc(const std::vector<double>& scores,
                                   const std::vector<int>& labels,
                                   const std::vector<int64_t>& request_ids);

}  // namespace rankformer
