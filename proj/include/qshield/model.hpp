#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "qshield/tensor.hpp"

namespace qshield {

enum class Activation { none, relu };

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Tensor weight; // [out x in]
    Tensor bias;   // [out]
    Activation activation = Activation::none;
};

struct Conv2dLayer {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    Tensor weight; // [out_ch x in_ch x k x k]
    Tensor bias;   // [out_ch]
    Activation activation = Activation::none;
};

using LayerSpec = std::variant<DenseLayer, Conv2dLayer>;

/// Feed-forward stack of Dense/Conv2d layers; classification is argmax over
/// the last layer's outputs.
struct Model {
    std::vector<LayerSpec> layers;

    /// Checks weight/bias tensors against declared dims and that statically
    /// checkable adjacent layers compose (dense->dense, conv->conv).
    void validate() const;

    std::size_t num_classes() const;

    /// Weight tensors in declaration order (the arrays quantization and
    /// protection operate on; biases are not included).
    std::vector<const Tensor*> weight_tensors() const;
    std::vector<Tensor*> weight_tensors();
};

struct Dataset {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;
    std::string name;

    std::size_t size() const { return inputs.size(); }

    /// |inputs| == |labels| and, when num_classes > 0, every label < num_classes.
    void validate(std::size_t num_classes = 0) const;
};

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

} // namespace qshield
