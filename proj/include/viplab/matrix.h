// Copyright 2026 The viplab Authors
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

#ifndef VIPLAB_MATRIX_H_
#define VIPLAB_MATRIX_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace viplab {

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      throw std::invalid_argument("Matrix: " + std::to_string(r) + "x" +
                                  std::to_string(c) + " needs " +
                                  std::to_string(r * c) + " values, got " +
                                  std::to_string(data.size()));
    }
  }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  bool empty() const { return rows == 0; }

  void append_row(std::span<const double> values) {
    if (rows == 0 && cols == 0) cols = values.size();
    if (values.size() != cols) {
      throw std::invalid_argument("Matrix::append_row: expected " +
                                  std::to_string(cols) + " columns, got " +
                                  std::to_string(values.size()));
    }
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace viplab

#endif  // VIPLAB_MATRIX_H_
