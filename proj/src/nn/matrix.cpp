#include "nilm/nn/matrix.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

namespace nilm::nn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("matrix {}x{} given {} values", rows, cols, data_.size()));
    }
}

Matrix column(std::span<const double> xs) {
    return Matrix(xs.size(), 1, std::vector<double>(xs.begin(), xs.end()));
}

}  // namespace nilm::nn
