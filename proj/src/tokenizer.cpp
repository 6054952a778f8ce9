// SPDX-License-Identifier: Apache-2.0
#include "rankformer/tokenizer.hpp"

#include <algorithm>
#include <cmath>

namespace rankformer {

namespace {
constexpr int kBosRow = 0;
constexpr int kSep0Row = 1;
constexpr int kSep1Row = 2;

void check_id(int id, int vocab, const char* what) {
  if (id < 0 || id >= vocab) {
    throw ConfigError(std::string("tokenizer: ") + what + " id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(vocab));
  }
}
}  // namespace

void TokenizerConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("TokenizerConfig: ") + what);
  };
  need(model_dim >= 1, "model_dim must be >= 1");
  need(item_dim >= 1, "item_dim must be >= 1");
  need(action_dim >= 1 && scene_dim >= 1 && time_dim >= 1 && profile_dim >= 1,
       "feature dims must be >= 1");
  need(n_items >= 1, "n_items must be >= 1");
  need(n_time_buckets >= 2, "n_time_buckets must be >= 2");
  for (int v : profile_vocab) need(v >= 1, "profile vocab sizes must be >= 1");
  for (const auto& g : side_groups) need(g.width >= 1, "side group width must be >= 1");
}

int time_bucket(int64_t delta_seconds, int n_buckets) {
  const int64_t d = std::max<int64_t>(delta_seconds, 0);
  const int b = static_cast<int>(std::floor(std::log2(1.0 + static_cast<double>(d))));
  return std::min(b, n_buckets - 1);
}

Tokenizer::Tokenizer(const TokenizerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.model_dim;
  special_table_ = Parameter("tok.special", 3, d);
  item_table_ = Parameter("tok.item_table", cfg_.n_items, cfg_.item_dim);
  action_table_ = Parameter("tok.action_table", cfg_.n_actions, cfg_.action_dim);
  scene_table_ = Parameter("tok.scene_table", cfg_.n_scenes, cfg_.scene_dim);
  time_table_ = Parameter("tok.time_table", cfg_.n_time_buckets, cfg_.time_dim);
  profile_tables_.reserve(cfg_.profile_vocab.size());
  for (size_t f = 0; f < cfg_.profile_vocab.size(); ++f) {
    profile_tables_.emplace_back("tok.profile_table." + std::to_string(f),
                                 cfg_.profile_vocab[f], cfg_.profile_dim);
  }
  w_hist_ = Parameter("tok.w_hist", cfg_.history_concat_width(), d);
  b_hist_ = Parameter("tok.b_hist", 1, d);
  g_hist_ = Parameter("tok.g_hist", 1, d);
  w_prof_ = Parameter("tok.w_prof", cfg_.profile_dim, d);
  b_prof_ = Parameter("tok.b_prof", 1, d);
  g_prof_ = Parameter("tok.g_prof", 1, d);
  w_cand_ = Parameter("tok.w_cand", cfg_.candidate_concat_width(), d);
  b_cand_ = Parameter("tok.b_cand", 1, d);
  g_cand_ = Parameter("tok.g_cand", 1, d);
}

void Tokenizer::init(RandomStream& rng, double std) {
  rng.fill_normal(special_table_.value, std);
  rng.fill_normal(item_table_.value, std);
  rng.fill_normal(action_table_.value, std);
  rng.fill_normal(scene_table_.value, std);
  rng.fill_normal(time_table_.value, std);
  for (auto& t : profile_tables_) rng.fill_normal(t.value, std);
  rng.fill_normal(w_hist_.value, std);
  rng.fill_normal(w_prof_.value, std);
  rng.fill_normal(w_cand_.value, std);
  b_hist_.value.setZero();
  b_prof_.value.setZero();
  b_cand_.value.setZero();
  g_hist_.value.setOnes();
  g_prof_.value.setOnes();
  g_cand_.value.setOnes();
}

ParamRefs Tokenizer::params() {
  ParamRefs out{&special_table_, &item_table_, &action_table_, &scene_table_,
                &time_table_};
  for (auto& t : profile_tables_) out.push_back(&t);
  for (Parameter* p : {&w_hist_, &b_hist_, &g_hist_, &w_prof_, &b_prof_, &g_prof_,
                       &w_cand_, &b_cand_, &g_cand_}) {
    out.push_back(p);
  }
  return out;
}

Eigen::RowVectorXd Tokenizer::history_concat_row(const ItemEvent& ev,
                                                 int64_t request_ts) const {
  check_id(ev.item_id, cfg_.n_items, "item");
  check_id(static_cast<int>(ev.action_type), cfg_.n_actions, "action");
  check_id(ev.scene_id, cfg_.n_scenes, "scene");
  Eigen::RowVectorXd row(cfg_.history_concat_width());
  int off = 0;
  row.segment(off, cfg_.item_dim) = item_table_.value.row(ev.item_id);
  off += cfg_.item_dim;
  row.segment(off, cfg_.action_dim) =
      action_table_.value.row(static_cast<int>(ev.action_type));
  off += cfg_.action_dim;
  row.segment(off, cfg_.scene_dim) = scene_table_.value.row(ev.scene_id);
  off += cfg_.scene_dim;
  const int tb = time_bucket(request_ts - ev.timestamp, cfg_.n_time_buckets);
  row.segment(off, cfg_.time_dim) = time_table_.value.row(tb);
  return row;
}

Eigen::RowVectorXd Tokenizer::candidate_concat_row(const Candidate& cand) const {
  check_id(cand.item_id, cfg_.n_items, "item");
  if (static_cast<int>(cand.side_features.size()) != cfg_.side_width()) {
    throw ConfigError("tokenizer: candidate side feature width " +
                      std::to_string(cand.side_features.size()) + " != configured " +
                      std::to_string(cfg_.side_width()));
  }
  Eigen::RowVectorXd row(cfg_.candidate_concat_width());
  row.segment(0, cfg_.item_dim) = item_table_.value.row(cand.item_id);
  for (size_t i = 0; i < cand.side_features.size(); ++i) {
    row(cfg_.item_dim + static_cast<Eigen::Index>(i)) = cand.side_features[i];
  }
  return row;
}

Eigen::RowVectorXd Tokenizer::tokenize_history_event(const ItemEvent& ev,
                                                     int64_t request_ts) const {
  Eigen::RowVectorXd concat = history_concat_row(ev, request_ts);
  Mat proj = concat * w_hist_.value + b_hist_.value;
  RmsNormCache nc;
  return rmsnorm_forward(proj, g_hist_.value, nc).row(0);
}

Eigen::RowVectorXd Tokenizer::tokenize_candidate(const Candidate& cand) const {
  Eigen::RowVectorXd concat = candidate_concat_row(cand);
  Mat proj = concat * w_cand_.value + b_cand_.value;
  RmsNormCache nc;
  return rmsnorm_forward(proj, g_cand_.value, nc).row(0);
}

TokenSequence Tokenizer::tokenize_sample(const RequestSample& sample,
                                         TokenizerCache& cache) const {
  if (sample.candidates.empty()) {
    throw ConfigError("tokenizer: sample has zero candidates");
  }
  if (sample.user_profile.size() != cfg_.profile_vocab.size()) {
    throw ConfigError("tokenizer: profile has " +
                      std::to_string(sample.user_profile.size()) + " fields, expected " +
                      std::to_string(cfg_.profile_vocab.size()));
  }
  const bool st = cfg_.special_tokens;
  const int n_hist = static_cast<int>(sample.history.size());
  const int n_prof = static_cast<int>(sample.user_profile.size());
  const int n_cand = static_cast<int>(sample.candidates.size());
  const int n_special = st ? 3 : 0;
  const int total = n_special + n_hist + n_prof + n_cand;
  const int d = cfg_.model_dim;

  TokenSequence seq;
  seq.tokens.resize(total, d);
  seq.position_ids.resize(total);
  seq.roles.resize(total);
  seq.candidate_index.assign(total, -1);
  seq.n_candidates = n_cand;
  cache = TokenizerCache{};

  int row = 0;
  auto put_special = [&](int special_row, Role role) {
    seq.tokens.row(row) = special_table_.value.row(special_row);
    seq.roles[row] = role;
    cache.specials.emplace_back(row, special_row);
    ++row;
  };

  if (st) put_special(kBosRow, Role::kBos);

  cache.hist.concat.resize(n_hist, cfg_.history_concat_width());
  for (int i = 0; i < n_hist; ++i) {
    cache.hist.concat.row(i) = history_concat_row(sample.history[i], sample.timestamp);
    cache.hist.token_rows.push_back(row);
    cache.hist_item.push_back(sample.history[i].item_id);
    cache.hist_action.push_back(static_cast<int>(sample.history[i].action_type));
    cache.hist_scene.push_back(sample.history[i].scene_id);
    cache.hist_time.push_back(
        time_bucket(sample.timestamp - sample.history[i].timestamp, cfg_.n_time_buckets));
    seq.roles[row] = Role::kHist;
    ++row;
  }

  if (st) put_special(kSep0Row, Role::kSep);

  cache.prof.concat.resize(n_prof, cfg_.profile_dim);
  for (int f = 0; f < n_prof; ++f) {
    const int v = sample.user_profile[f];
    check_id(v, cfg_.profile_vocab[f], "profile");
    cache.prof.concat.row(f) = profile_tables_[f].value.row(v);
    cache.prof.token_rows.push_back(row);
    cache.prof_field.push_back(f);
    cache.prof_value.push_back(v);
    seq.roles[row] = Role::kProf;
    ++row;
  }

  if (st) put_special(kSep1Row, Role::kSep);

  cache.cand.concat.resize(n_cand, cfg_.candidate_concat_width());
  for (int c = 0; c < n_cand; ++c) {
    cache.cand.concat.row(c) = candidate_concat_row(sample.candidates[c]);
    cache.cand.token_rows.push_back(row);
    cache.cand_item.push_back(sample.candidates[c].item_id);
    seq.roles[row] = Role::kCand;
    seq.candidate_index[row] = c;
    ++row;
  }

  // Project and normalize each group, then place rows in sequence order.
  auto emit_group = [&](TokenizerCache::Group& g, const Parameter& w, const Parameter& b,
                        const Parameter& gain) {
    if (g.concat.rows() == 0) return;
    Mat proj = g.concat * w.value;
    proj.rowwise() += b.value.row(0);
    Mat y = rmsnorm_forward(proj, gain.value, g.norm);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      seq.tokens.row(g.token_rows[static_cast<size_t>(i)]) = y.row(i);
    }
  };
  emit_group(cache.hist, w_hist_, b_hist_, g_hist_);
  emit_group(cache.prof, w_prof_, b_prof_, g_prof_);
  emit_group(cache.cand, w_cand_, b_cand_, g_cand_);

  const int prefix = total - n_cand;
  for (int i = 0; i < prefix; ++i) seq.position_ids[i] = i;
  for (int i = prefix; i < total; ++i) seq.position_ids[i] = prefix;
  return seq;
}

TokenSequence Tokenizer::tokenize_click_sequence(const std::vector<ItemEvent>& clicks,
                                                 TokenizerCache& cache) const {
  const int n = static_cast<int>(clicks.size());
  const int d = cfg_.model_dim;
  const int total = 1 + n;  // BOS + one token per click
  TokenSequence seq;
  seq.tokens.resize(total, d);
  seq.position_ids.resize(total);
  seq.roles.assign(total, Role::kHist);
  seq.candidate_index.assign(total, -1);
  seq.n_candidates = 0;
  cache = TokenizerCache{};

  seq.tokens.row(0) = special_table_.value.row(kBosRow);
  seq.roles[0] = Role::kBos;
  cache.specials.emplace_back(0, kBosRow);

  cache.hist.concat.resize(n, cfg_.history_concat_width());
  for (int i = 0; i < n; ++i) {
    // Gap to the previous event; the first event gets the max bucket.
    const int64_t gap =
        i == 0 ? std::numeric_limits<int64_t>::max() / 4
               : clicks[static_cast<size_t>(i)].timestamp -
                     clicks[static_cast<size_t>(i - 1)].timestamp;
    ItemEvent ev = clicks[static_cast<size_t>(i)];
    cache.hist.concat.row(i) = history_concat_row(ev, ev.timestamp + 0);
    // Overwrite the recency slice with the gap bucket.
    const int tb = time_bucket(gap, cfg_.n_time_buckets);
    const int off = cfg_.item_dim + cfg_.action_dim + cfg_.scene_dim;
    cache.hist.concat.row(i).segment(off, cfg_.time_dim) = time_table_.value.row(tb);
    cache.hist.token_rows.push_back(1 + i);
    cache.hist_item.push_back(ev.item_id);
    cache.hist_action.push_back(static_cast<int>(ev.action_type));
    cache.hist_scene.push_back(ev.scene_id);
    cache.hist_time.push_back(tb);
  }
  if (n > 0) {
    Mat proj = cache.hist.concat * w_hist_.value;
    proj.rowwise() += b_hist_.value.row(0);
    Mat y = rmsnorm_forward(proj, g_hist_.value, cache.hist.norm);
    for (int i = 0; i < n; ++i) seq.tokens.row(1 + i) = y.row(i);
  }
  for (int i = 0; i < total; ++i) seq.position_ids[i] = i;
  return seq;
}

void Tokenizer::backward(const Mat& dtokens, const TokenizerCache& cache,
                         GradBuffer& grads, const ParamIndex& index) const {
  for (const auto& [token_row, special_row] : cache.specials) {
    if (!special_table_.frozen) {
      grads[index.of(special_table_)].row(special_row) += dtokens.row(token_row);
    }
  }

  auto group_backward = [&](const TokenizerCache::Group& g, const Parameter& w,
                            const Parameter& b, const Parameter& gain) -> Mat {
    Mat dy(g.concat.rows(), cfg_.model_dim);
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      dy.row(i) = dtokens.row(g.token_rows[static_cast<size_t>(i)]);
    }
    Mat dproj = rmsnorm_backward(dy, g.norm, gain.value, grads[index.of(gain)]);
    grads[index.of(w)].noalias() += g.concat.transpose() * dproj;
    grads[index.of(b)].row(0) += dproj.colwise().sum();
    return dproj * w.value.transpose();  // d(concat)
  };

  if (cache.hist.concat.rows() > 0) {
    Mat dc = group_backward(cache.hist, w_hist_, b_hist_, g_hist_);
    Mat& ditem = grads[index.of(item_table_)];
    Mat& daction = grads[index.of(action_table_)];
    Mat& dscene = grads[index.of(scene_table_)];
    Mat& dtime = grads[index.of(time_table_)];
    for (Eigen::Index i = 0; i < dc.rows(); ++i) {
      const auto k = static_cast<size_t>(i);
      int off = 0;
      if (!item_table_.frozen) {
        ditem.row(cache.hist_item[k]) += dc.row(i).segment(off, cfg_.item_dim);
      }
      off += cfg_.item_dim;
      if (!action_table_.frozen) {
        daction.row(cache.hist_action[k]) += dc.row(i).segment(off, cfg_.action_dim);
      }
      off += cfg_.action_dim;
      if (!scene_table_.frozen) {
        dscene.row(cache.hist_scene[k]) += dc.row(i).segment(off, cfg_.scene_dim);
      }
      off += cfg_.scene_dim;
      if (!time_table_.frozen) {
        dtime.row(cache.hist_time[k]) += dc.row(i).segment(off, cfg_.time_dim);
      }
    }
  }

  if (cache.prof.concat.rows() > 0) {
    Mat dc = group_backward(cache.prof, w_prof_, b_prof_, g_prof_);
    for (Eigen::Index i = 0; i < dc.rows(); ++i) {
      const auto k = static_cast<size_t>(i);
      const Parameter& table = profile_tables_[static_cast<size_t>(cache.prof_field[k])];
      if (!table.frozen) {
        grads[index.of(table)].row(cache.prof_value[k]) += dc.row(i);
      }
    }
  }

  if (cache.cand.concat.rows() > 0) {
    Mat dc = group_backward(cache.cand, w_cand_, b_cand_, g_cand_);
    if (!item_table_.frozen) {
      Mat& ditem = grads[index.of(item_table_)];
      for (Eigen::Index i = 0; i < dc.rows(); ++i) {
        ditem.row(cache.cand_item[static_cast<size_t>(i)]) +=
            dc.row(i).segment(0, cfg_.item_dim);
      }
    }
  }
}

RequestSample attach_side_features(
    const RequestSample& sample, const std::vector<SideFeatureGroup>& groups,
    const std::vector<std::vector<double>>& per_candidate_values) {
  int width = 0;
  for (const auto& g : groups) width += g.width;
  if (per_candidate_values.size() != sample.candidates.size()) {
    throw ConfigError("attach_side_features: need one vector per candidate");
  }
  RequestSample out = sample;
  for (size_t c = 0; c < out.candidates.size(); ++c) {
    if (static_cast<int>(per_candidate_values[c].size()) != width) {
      throw ConfigError("attach_side_features: candidate " + std::to_string(c) +
                        " has width " + std::to_string(per_candidate_values[c].size()) +
                        ", declared groups sum to " + std::to_string(width));
    }
    out.candidates[c].side_features = per_candidate_values[c];
  }
  return out;
}

void transfer_item_table(const Tokenizer& from, Tokenizer& to, bool freeze) {
  if (from.item_table().value.rows() != to.item_table().value.rows() ||
      from.item_table().value.cols() != to.item_table().value.cols()) {
    throw ConfigError("transfer_item_table: item vocabulary/dim mismatch");
  }
  to.item_table().value = from.item_table().value;
  to.item_table().frozen = freeze;
}

}  // namespace rankformer
