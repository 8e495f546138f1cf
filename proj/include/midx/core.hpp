// Copyright 2026 The midx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MIDX_CORE_HPP
#define MIDX_CORE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace midx {

using Vec = std::vector<double>;

// Shape/argument mismatches between caller-supplied objects.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid values (negative weights, empty inputs, bad flags).
struct value_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent files.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite results, diverging iterations.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. All numeric state in the library is
// held in doubles even when files store 32-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw dimension_error("dot: length mismatch " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// max(v) + log sum exp(v - max); stable for |v_i| up to ~1e308 / 700-scale
// inputs. Raw exp over unshifted values is never used in this library.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw value_error("log_sum_exp: empty input");
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline Vec softmax(std::span<const double> o) {
  if (o.empty()) throw value_error("softmax: empty input");
  double m = o[0];
  for (double x : o) m = std::max(m, x);
  Vec p(o.size());
  double z = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    p[i] = std::exp(o[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

}  // namespace midx

#endif  // MIDX_CORE_HPP
