// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/data.hpp"
#include "rankformer/norm.hpp"
#include "rankformer/params.hpp"

#include <string>
#include <vector>

namespace rankformer {

enum class Role : int { kBos = 0, kHist = 1, kSep = 2, kProf = 3, kCand = 4 };

struct TokenSequence {
  Mat tokens;                        // L x d
  std::vector<int> position_ids;     // candidates share one position id
  std::vector<Role> roles;
  std::vector<int> candidate_index;  // ordinal among candidates, -1 otherwise
  int n_candidates = 0;

  int length() const { return static_cast<int>(roles.size()); }
  int prefix_len() const { return length() - n_candidates; }
};

struct SideFeatureGroup {
  std::string name;
  int width = 0;  // appended to the candidate concat before projection
};

struct TokenizerConfig {
  int model_dim = 64;
  int item_dim = 32;
  int action_dim = 8;
  int scene_dim = 8;
  int time_dim = 8;
  int profile_dim = 16;
  int n_items = 0;
  int n_actions = 3;
  int n_scenes = 4;
  int n_time_buckets = 32;
  std::vector<int> profile_vocab;  // one vocabulary size per profile field
  std::vector<SideFeatureGroup> side_groups;
  bool special_tokens = true;

  int history_concat_width() const {
    return item_dim + action_dim + scene_dim + time_dim;
  }
  int side_width() const {
    int w = 0;
    for (const auto& g : side_groups) w += g.width;
    return w;
  }
  int candidate_concat_width() const { return item_dim + side_width(); }
  void validate() const;
};

// Recency (or gap) bucketing: log2-scale durations in seconds.
int time_bucket(int64_t delta_seconds, int n_buckets);

struct TokenizerCache {
  struct Group {
    Mat concat;                   // n x concat_width, pre-projection
    RmsNormCache norm;            // over the projected rows
    std::vector<int> token_rows;  // row in the token sequence per entry
  };
  Group hist, prof, cand;
  std::vector<int> hist_item, hist_action, hist_scene, hist_time;
  std::vector<int> prof_field, prof_value;
  std::vector<int> cand_item;
  std::vector<std::pair<int, int>> specials;  // (token row, special table row)
};

// Maps a RequestSample to the model-width token sequence:
// [BOS ; history ; SEP ; profile ; SEP ; candidates], via embedding lookup,
// per-feature concatenation, linear projection and RMS normalization.
class Tokenizer {
 public:
  explicit Tokenizer(const TokenizerConfig& cfg);

  void init(RandomStream& rng, double std);
  ParamRefs params();

  TokenSequence tokenize_sample(const RequestSample& sample, TokenizerCache& cache) const;

  /// Single-item pathway, exposed for shape and purity checks.
  Eigen::RowVectorXd tokenize_history_event(const ItemEvent& ev,
                                            int64_t request_ts) const;
  Eigen::RowVectorXd tokenize_candidate(const Candidate& cand) const;

  /// Pre-training path: BOS + one token per click event, causal positions.
  /// Time buckets use the gap since the previous event.
  TokenSequence tokenize_click_sequence(const std::vector<ItemEvent>& clicks,
                                        TokenizerCache& cache) const;

  void backward(const Mat& dtokens, const TokenizerCache& cache, GradBuffer& grads,
                const ParamIndex& index) const;

  const TokenizerConfig& config() const { return cfg_; }
  Parameter& item_table() { return item_table_; }
  const Parameter& item_table() const { return item_table_; }
  const Parameter& special_table() const { return special_table_; }

 private:
  Eigen::RowVectorXd history_concat_row(const ItemEvent& ev, int64_t request_ts) const;
  Eigen::RowVectorXd candidate_concat_row(const Candidate& cand) const;

  TokenizerConfig cfg_;
  Parameter special_table_;  // rows BOS, SEP0, SEP1 at model width
  Parameter item_table_;
  Parameter action_table_;
  Parameter scene_table_;
  Parameter time_table_;
  std::vector<Parameter> profile_tables_;
  Parameter w_hist_, b_hist_, g_hist_;
  Parameter w_prof_, b_prof_, g_prof_;
  Parameter w_cand_, b_cand_, g_cand_;
};

/// Writes per-candidate side feature vectors into a copy of the sample.
/// One vector per candidate, groups concatenated in declaration order;
/// widths must sum to the declared side width.
RequestSample attach_side_features(
    const RequestSample& sample, const std::vector<SideFeatureGroup>& groups,
    const std::vector<std::vector<double>>& per_candidate_values);

/// Copies the item embedding table between tokenizers with identical item
/// vocabularies; optionally freezes the destination table.
void transfer_item_table(const Tokenizer& from, Tokenizer& to, bool freeze);

}  // namespace rankformer
