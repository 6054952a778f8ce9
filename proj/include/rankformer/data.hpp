// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/common.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace rankformer {

enum class ActionType : int { kClick = 0, kCart = 1, kPurchase = 2 };

struct ItemEvent {
  int32_t item_id = 0;
  ActionType action_type = ActionType::kClick;
  int64_t timestamp = 0;
  int32_t scene_id = 0;
};

struct Candidate {
  int32_t item_id = 0;
  std::vector<double> side_features;  // fixed-length per dataset, may be empty
  int click = 0;
  int cart = 0;
  int purchase = 0;
};

// One page request: the unit of training and inference. All candidates share
// the same history and profile.
struct RequestSample {
  int64_t request_id = 0;
  int64_t timestamp = 0;
  std::vector<int32_t> user_profile;  // one categorical value per profile field
  std::vector<ItemEvent> history;     // non-decreasing timestamps, all < timestamp
  std::vector<Candidate> candidates;  // at least one
};

struct SynthConfig {
  int n_users = 50000;
  int n_items = 5000;
  int latent_dim = 16;
  int n_requests = 200000;
  int candidates_per_request = 10;
  int history_max = 256;
  int n_days = 20;
  int n_scenes = 4;
  int n_segments = 8;
  int n_activity_buckets = 8;
  int n_regions = 8;
  double click_base = 0.10;     // marginal click rate target
  double cart_base = 0.30;      // cart rate conditional on click
  double purchase_base = 0.12;  // purchase rate conditional on click
  double affinity_scale = 9.0;  // weight on the user-item latent dot product
  double pop_scale = 0.8;       // weight on z-scored log popularity
  double noise_std = 0.5;       // per-impression logit noise
  double cand_pop_alpha = 0.7;  // candidate exposure ~ popularity^alpha
  double warm_mean = 12.0;      // mean warm-start clicks per user
  double cold_user_fraction = 0.05;
  uint64_t rng_seed = 1;

  void validate() const;
};

// Latent factors behind the synthetic log. Cart/purchase use rotated user
// vectors so the three objectives correlate without being identical.
struct SynthWorld {
  SynthConfig cfg;
  Mat user_vec;   // n_users x latent_dim
  Mat item_vec;   // n_items x latent_dim
  Mat rot_cart;   // latent_dim x latent_dim
  Mat rot_purchase;
  Vec popularity;  // long-tailed positive weights, sums to 1
  Vec pop_z;       // z-scored log popularity
  Mat segment_dirs;              // n_segments x latent_dim
  std::vector<int32_t> profile_activity;  // per user
  std::vector<int32_t> profile_segment;
  std::vector<int32_t> profile_region;
  double click_intercept = 0.0;
  double cart_intercept = 0.0;
  double purchase_intercept = 0.0;

  /// Systematic click logit (no noise, no intercept): the ground-truth score.
  double click_score(int user, int item) const {
    return cfg.affinity_scale * user_vec.row(user).dot(item_vec.row(item)) +
           cfg.pop_scale * pop_z(item);
  }
  double cart_score(int user, int item) const {
    return cfg.affinity_scale *
           (user_vec.row(user) * rot_cart).dot(item_vec.row(item));
  }
  double purchase_score(int user, int item) const {
    return cfg.affinity_scale *
           (user_vec.row(user) * rot_purchase).dot(item_vec.row(item));
  }
};

SynthWorld generate_world(const SynthConfig& cfg);

/// Simulates the request log in timestamp order; each user's history
/// accumulates their clicked items as the log advances.
std::vector<RequestSample> simulate_requests(const SynthWorld& world);

/// Timestamp of the start of the last day: the default train/eval boundary.
int64_t default_eval_boundary(const SynthConfig& cfg);

/// Splits by request timestamp: train ts < boundary, eval ts >= boundary.
std::pair<std::vector<RequestSample>, std::vector<RequestSample>> split_train_eval(
    const std::vector<RequestSample>& samples, int64_t boundary_timestamp);

/// Number of profile fields emitted by the generator.
constexpr int kProfileFields = 3;

}  // namespace rankformer
