// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/rng.hpp"

namespace fwqa {

/// A named learnable tensor with its gradient accumulator. rank is 1 for
/// vectors (stored n x 1) and 2 for matrices; it only affects serialization.
template <typename Scalar>
struct Parameter {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
  int rank = 2;
};

/// Ordered, non-owning view of all parameters of a model. Order is the
/// registration order and fixes the RNG draw order at init, the checkpoint
/// layout, and the Adam state alignment.
template <typename Scalar>
class ParamRegistry {
 public:
  void add(Parameter<Scalar>& p) { items_.push_back(&p); }

  std::size_t size() const { return items_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *items_[i]; }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  Parameter<Scalar>* find(const std::string& name) {
    for (auto* p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grads() {
    for (auto* p : items_) p->grad = Mat<Scalar>::Zero(p->value.rows(), p->value.cols());
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (auto* p : items_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  std::vector<Mat<Scalar>> snapshot_values() const {
    std::vector<Mat<Scalar>> out;
    out.reserve(items_.size());
    for (auto* p : items_) out.push_back(p->value);
    return out;
  }

  void restore_values(const std::vector<Mat<Scalar>>& vals) {
    if (vals.size() != items_.size())
      throw ArgumentError("restore_values: snapshot size mismatch");
    for (std::size_t i = 0; i < items_.size(); ++i) items_[i]->value = vals[i];
  }

 private:
  std::vector<Parameter<Scalar>*> items_;
};

/// Uniform Glorot fill: limit = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void glorot_fill(Mat<Scalar>& m, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
}

}  // namespace fwqa
