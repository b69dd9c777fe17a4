#include "qshield/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qshield {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    validate();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.data.assign(shape_product(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

void Tensor::validate() const {
    if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero dimension");
    }
    if (shape_product(shape) != data.size()) {
        throw std::invalid_argument("tensor: shape product " +
                                    std::to_string(shape_product(shape)) +
                                    " != data length " + std::to_string(data.size()));
    }
    for (double v : data) {
        if (!std::isfinite(v)) throw std::invalid_argument("tensor: non-finite entry");
    }
}

} // namespace qshield
