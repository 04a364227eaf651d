#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppn/error.hpp"

namespace ppn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Named dense tensor of rank 1 or 2, stored row-major. Rank-1 tensors are
/// viewed as a single row.
template <class T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    data.assign(size, T(0));
  }

  int rows() const { return shape.size() == 1 ? 1 : shape[0]; }
  int cols() const { return shape.size() == 1 ? shape[0] : shape[1]; }
  std::size_t size() const { return data.size(); }

  MatMap<T> mat() { return MatMap<T>(data.data(), rows(), cols()); }
  ConstMatMap<T> mat() const { return ConstMatMap<T>(data.data(), rows(), cols()); }
  Eigen::Map<RowVec<T>> row() { return Eigen::Map<RowVec<T>>(data.data(), static_cast<Eigen::Index>(size())); }
  Eigen::Map<const RowVec<T>> row() const {
    return Eigen::Map<const RowVec<T>>(data.data(), static_cast<Eigen::Index>(size()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered collection of named tensors. The order is fixed by the model
/// configuration and is the serialization order of checkpoints.
template <class T>
struct ParamSet {
  std::vector<Tensor<T>> tensors;

  Tensor<T>& operator[](std::size_t i) { return tensors[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t count() const { return tensors.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& t : tensors) out.tensors.emplace_back(t.name, t.shape);
    return out;
  }

  void set_zero() {
    for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), T(0));
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors) {
      Tensor<U> u(t.name, t.shape);
      for (std::size_t i = 0; i < t.size(); ++i) u.data[i] = static_cast<U>(t.data[i]);
      out.tensors.push_back(std::move(u));
    }
    return out;
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

}  // namespace ppn
