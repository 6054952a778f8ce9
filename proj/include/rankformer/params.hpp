// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rankformer/common.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace rankformer {

// One named trainable tensor. Gradients live outside the parameter (in
// GradBuffer) so forward/backward stay pure and batch items can run on
// separate threads against shared const parameters.
struct Parameter {
  std::string name;
  Mat value;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
};

using ParamRefs = std::vector<Parameter*>;

// Stable position of each parameter within a registry, for gradient lookup.
class ParamIndex {
 public:
  ParamIndex() = default;
  explicit ParamIndex(const ParamRefs& params) {
    for (size_t i = 0; i < params.size(); ++i) map_.emplace(params[i], i);
  }
  size_t of(const Parameter& p) const { return map_.at(&p); }

 private:
  std::unordered_map<const Parameter*, size_t> map_;
};

// Per-worker gradient storage aligned with a parameter registry.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamRefs& params) { reset_shapes(params); }

  void reset_shapes(const ParamRefs& params) {
    grads_.clear();
    grads_.reserve(params.size());
    for (const Parameter* p : params) {
      grads_.emplace_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }

  Mat& operator[](size_t i) { return grads_[i]; }
  const Mat& operator[](size_t i) const { return grads_[i]; }
  size_t size() const { return grads_.size(); }

  void add(const GradBuffer& other) {
    for (size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  }

 private:
  std::vector<Mat> grads_;
};

}  // namespace rankformer
