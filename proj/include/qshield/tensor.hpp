#pragma once

#include <cstddef>
#include <vector>

namespace qshield {

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);

    std::size_t size() const { return data.size(); }

    /// Throws std::invalid_argument unless product(shape) == data.size(),
    /// all dimensions are positive, and every entry is finite.
    void validate() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

} // namespace qshield
