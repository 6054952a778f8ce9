// SPDX-License-Identifier: Apache-2.0
#include "rankformer/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rankformer {

namespace {

constexpr int64_t kSecondsPerDay = 86400;

// Calibrates an intercept c so that mean(sigmoid(z + c)) over the sampled
// logits hits the target rate.
double calibrate_intercept(const std::vector<double>& logits, double target) {
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double z : logits) mean += sigmoid(z + mid);
    mean /= static_cast<double>(logits.size());
    if (mean < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Draws one item index proportional to weights^alpha using a precomputed
// cumulative table.
int32_t sample_from_cdf(const std::vector<double>& cdf, RandomStream& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  auto idx = static_cast<int32_t>(std::distance(cdf.begin(), it));
  return std::min<int32_t>(idx, static_cast<int32_t>(cdf.size()) - 1);
}

ActionType funnel_action(int cart, int purchase) {
  if (purchase) return ActionType::kPurchase;
  if (cart) return ActionType::kCart;
  return ActionType::kClick;
}

}  // namespace

void SynthConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("SynthConfig: ") + what);
  };
  need(n_users >= 1, "n_users must be >= 1");
  need(n_items >= 1, "n_items must be >= 1");
  need(latent_dim >= 1, "latent_dim must be >= 1");
  need(n_requests >= 1, "n_requests must be >= 1");
  need(candidates_per_request >= 1, "candidates_per_request must be >= 1");
  need(candidates_per_request <= n_items, "candidates_per_request must be <= n_items");
  need(history_max >= 1, "history_max must be >= 1");
  need(n_days >= 1, "n_days must be >= 1");
  need(static_cast<int64_t>(n_requests) <= static_cast<int64_t>(n_days) * 86400,
       "n_requests must not exceed one per second of the simulated window");
  need(n_scenes >= 1, "n_scenes must be >= 1");
  need(click_base > 0.0 && click_base < 1.0, "click_base must be in (0,1)");
  need(cart_base > 0.0 && cart_base < 1.0, "cart_base must be in (0,1)");
  need(purchase_base > 0.0 && purchase_base < 1.0, "purchase_base must be in (0,1)");
  need(cold_user_fraction >= 0.0 && cold_user_fraction < 1.0,
       "cold_user_fraction must be in [0,1)");
}

SynthWorld generate_world(const SynthConfig& cfg) {
  cfg.validate();
  SynthWorld w;
  w.cfg = cfg;
  RandomStream root(cfg.rng_seed);
  RandomStream rng_users = root.child(1);
  RandomStream rng_items = root.child(2);
  RandomStream rng_rot = root.child(3);
  RandomStream rng_prof = root.child(4);
  RandomStream rng_cal = root.child(5);

  const double latent_std = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  w.user_vec.resize(cfg.n_users, cfg.latent_dim);
  rng_users.fill_normal(w.user_vec, latent_std);
  w.item_vec.resize(cfg.n_items, cfg.latent_dim);
  rng_items.fill_normal(w.item_vec, latent_std);

  // Random rotations via QR of a Gaussian matrix.
  auto random_rotation = [&](RandomStream& r) {
    Mat g(cfg.latent_dim, cfg.latent_dim);
    r.fill_normal(g, 1.0);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(cfg.latent_dim, cfg.latent_dim);
    return q;
  };
  w.rot_cart = random_rotation(rng_rot);
  w.rot_purchase = random_rotation(rng_rot);

  // Long-tailed popularity: exp of a normal, normalized.
  w.popularity.resize(cfg.n_items);
  for (int i = 0; i < cfg.n_items; ++i) w.popularity(i) = std::exp(rng_items.normal());
  w.popularity /= w.popularity.sum();
  Vec logpop = w.popularity.array().log();
  const double mean = logpop.mean();
  const double sd = std::sqrt((logpop.array() - mean).square().mean());
  w.pop_z = (logpop.array() - mean) / (sd > 0 ? sd : 1.0);

  // Profile fields. Segment is the argmax affinity direction (informative),
  // activity comes later from the warm-start draw, region is pure noise.
  w.segment_dirs.resize(cfg.n_segments, cfg.latent_dim);
  rng_prof.fill_normal(w.segment_dirs, 1.0);
  w.profile_segment.resize(cfg.n_users);
  w.profile_region.resize(cfg.n_users);
  w.profile_activity.assign(cfg.n_users, 0);
  for (int u = 0; u < cfg.n_users; ++u) {
    Vec proj = w.segment_dirs * w.user_vec.row(u).transpose();
    int best = 0;
    proj.maxCoeff(&best);
    w.profile_segment[u] = best;
    w.profile_region[u] = static_cast<int32_t>(rng_prof.uniform_int(cfg.n_regions));
  }

  // Intercepts calibrated on a sample of systematic + noise logits.
  const int n_cal = 20000;
  std::vector<double> logits(n_cal);
  for (int i = 0; i < n_cal; ++i) {
    const int u = static_cast<int>(rng_cal.uniform_int(cfg.n_users));
    const int v = static_cast<int>(rng_cal.uniform_int(cfg.n_items));
    logits[i] = w.click_score(u, v) + cfg.noise_std * rng_cal.normal();
  }
  w.click_intercept = calibrate_intercept(logits, cfg.click_base);
  for (int i = 0; i < n_cal; ++i) {
    const int u = static_cast<int>(rng_cal.uniform_int(cfg.n_users));
    const int v = static_cast<int>(rng_cal.uniform_int(cfg.n_items));
    logits[i] = w.cart_score(u, v) + cfg.noise_std * rng_cal.normal();
  }
  w.cart_intercept = calibrate_intercept(logits, cfg.cart_base);
  for (int i = 0; i < n_cal; ++i) {
    const int u = static_cast<int>(rng_cal.uniform_int(cfg.n_users));
    const int v = static_cast<int>(rng_cal.uniform_int(cfg.n_items));
    logits[i] = w.purchase_score(u, v) + cfg.noise_std * rng_cal.normal();
  }
  w.purchase_intercept = calibrate_intercept(logits, cfg.purchase_base);
  return w;
}

namespace {

struct Labeler {
  const SynthWorld& w;
  RandomStream& rng;

  // Returns (click, cart, purchase) for one impression; funnel holds by
  // construction because cart/purchase are only drawn after a click.
  std::array<int, 3> draw(int user, int item) {
    const auto& cfg = w.cfg;
    const double zc =
        w.click_score(user, item) + w.click_intercept + cfg.noise_std * rng.normal();
    const int click = rng.uniform() < sigmoid(zc) ? 1 : 0;
    int cart = 0, purchase = 0;
    if (click) {
      const double za =
          w.cart_score(user, item) + w.cart_intercept + cfg.noise_std * rng.normal();
      cart = rng.uniform() < sigmoid(za) ? 1 : 0;
      const double zp = w.purchase_score(user, item) + w.purchase_intercept +
                        cfg.noise_std * rng.normal();
      purchase = rng.uniform() < sigmoid(zp) ? 1 : 0;
    }
    return {click, cart, purchase};
  }
};

}  // namespace

std::vector<RequestSample> simulate_requests(const SynthWorld& world) {
  const SynthConfig& cfg = world.cfg;
  RandomStream root(splitmix64(cfg.rng_seed ^ 0x5eedf00dULL));
  RandomStream rng_warm = root.child(11);
  RandomStream rng_req = root.child(12);
  Labeler warm_labeler{world, rng_warm};
  Labeler req_labeler{world, rng_req};

  // Exposure CDF over popularity^alpha.
  std::vector<double> cdf(cfg.n_items);
  double acc = 0.0;
  for (int i = 0; i < cfg.n_items; ++i) {
    acc += std::pow(world.popularity(i), cfg.cand_pop_alpha);
    cdf[i] = acc;
  }

  const int64_t t0 = kSecondsPerDay;  // log starts at day 1
  const int64_t span = static_cast<int64_t>(cfg.n_days) * kSecondsPerDay;

  // Warm-start histories: browse sessions before the logged window. Clicked
  // items enter the history with the same label model as the log itself.
  std::vector<std::vector<ItemEvent>> history(cfg.n_users);
  std::vector<int32_t> activity(cfg.n_users, 0);
  const int max_exposures = 400;
  for (int u = 0; u < cfg.n_users; ++u) {
    if (rng_warm.uniform() < cfg.cold_user_fraction) continue;
    const int want = rng_warm.poisson(cfg.warm_mean);
    int got = 0;
    for (int e = 0; e < max_exposures && got < want; ++e) {
      const int32_t item = sample_from_cdf(cdf, rng_warm);
      const auto y = warm_labeler.draw(u, item);
      if (!y[0]) continue;
      ItemEvent ev;
      ev.item_id = item;
      ev.action_type = funnel_action(y[1], y[2]);
      ev.scene_id = static_cast<int32_t>(rng_warm.uniform_int(cfg.n_scenes));
      ev.timestamp = 0;  // placed before t0 below
      history[u].push_back(ev);
      ++got;
    }
    activity[u] = got;
  }
  // Spread warm events over the 30 days before the log, oldest first.
  for (int u = 0; u < cfg.n_users; ++u) {
    const auto n = static_cast<int64_t>(history[u].size());
    for (int64_t k = 0; k < n; ++k) {
      history[u][static_cast<size_t>(k)].timestamp =
          t0 - 30 * kSecondsPerDay + (k + 1) * (30 * kSecondsPerDay) / (n + 1);
    }
  }
  int max_activity = 1;
  for (int u = 0; u < cfg.n_users; ++u) max_activity = std::max(max_activity, activity[u]);

  std::vector<RequestSample> out;
  out.reserve(static_cast<size_t>(cfg.n_requests));
  for (int r = 0; r < cfg.n_requests; ++r) {
    const int user = static_cast<int>(rng_req.uniform_int(cfg.n_users));
    const int64_t ts = t0 + span * static_cast<int64_t>(r) / cfg.n_requests;

    RequestSample s;
    s.request_id = r;
    s.timestamp = ts;
    const int act_bucket = std::min(
        cfg.n_activity_buckets - 1,
        static_cast<int>(activity[user] * cfg.n_activity_buckets / (max_activity + 1)));
    s.user_profile = {act_bucket, world.profile_segment[user],
                      world.profile_region[user]};

    const auto& h = history[user];
    const size_t keep = std::min<size_t>(h.size(), static_cast<size_t>(cfg.history_max));
    s.history.assign(h.end() - static_cast<std::ptrdiff_t>(keep), h.end());

    const int32_t scene = static_cast<int32_t>(rng_req.uniform_int(cfg.n_scenes));
    s.candidates.reserve(static_cast<size_t>(cfg.candidates_per_request));
    std::vector<int32_t> chosen;
    while (static_cast<int>(chosen.size()) < cfg.candidates_per_request) {
      const int32_t item = sample_from_cdf(cdf, rng_req);
      if (std::find(chosen.begin(), chosen.end(), item) != chosen.end()) continue;
      chosen.push_back(item);
    }
    for (int32_t item : chosen) {
      const auto y = req_labeler.draw(user, item);
      Candidate c;
      c.item_id = item;
      c.click = y[0];
      c.cart = y[1];
      c.purchase = y[2];
      s.candidates.push_back(c);
    }
    out.push_back(std::move(s));

    // Append this request's clicks to the user's running history.
    for (const Candidate& c : out.back().candidates) {
      if (!c.click) continue;
      ItemEvent ev;
      ev.item_id = c.item_id;
      ev.action_type = funnel_action(c.cart, c.purchase);
      ev.scene_id = scene;
      ev.timestamp = ts;
      history[user].push_back(ev);
    }
  }
  return out;
}

int64_t default_eval_boundary(const SynthConfig& cfg) {
  return kSecondsPerDay + static_cast<int64_t>(cfg.n_days - 1) * kSecondsPerDay;
}

std::pair<std::vector<RequestSample>, std::vector<RequestSample>> split_train_eval(
    const std::vector<RequestSample>& samples, int64_t boundary_timestamp) {
  if (samples.empty()) {
    throw ConfigError("split_train_eval: empty sample set");
  }
  std::vector<RequestSample> train, eval;
  for (const auto& s : samples) {
    if (s.timestamp < boundary_timestamp) {
      train.push_back(s);
    } else {
      eval.push_back(s);
    }
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace rankformer
