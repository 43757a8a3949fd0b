#pragma once

#include <cstddef>
#include <vector>

namespace csisense {

// Dense row-major real matrix used at module boundaries (feature tables,
// series batches); heavier lifting happens on linear-algebra views inside
// the implementation files.
struct RealMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

}  // namespace csisense
