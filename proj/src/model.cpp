#include "qshield/model.hpp"

#include <stdexcept>
#include <string>

namespace qshield {

const char* to_string(Activation a) {
    return a == Activation::relu ? "relu" : "none";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "none") return Activation::none;
    throw std::invalid_argument("unknown activation: " + s);
}

namespace {

void validate_dense(const DenseLayer& l, std::size_t idx) {
    const std::string where = "layer " + std::to_string(idx) + " (dense): ";
    if (l.in == 0 || l.out == 0) throw std::invalid_argument(where + "zero dims");
    l.weight.validate();
    l.bias.validate();
    if (l.weight.shape != std::vector<std::size_t>{l.out, l.in}) {
        throw std::invalid_argument(where + "weight shape does not match declared out x in");
    }
    if (l.bias.shape != std::vector<std::size_t>{l.out}) {
        throw std::invalid_argument(where + "bias shape does not match declared out");
    }
}

void validate_conv(const Conv2dLayer& l, std::size_t idx) {
    const std::string where = "layer " + std::to_string(idx) + " (conv2d): ";
    if (l.in_ch == 0 || l.out_ch == 0 || l.kernel == 0) {
        throw std::invalid_argument(where + "zero dims");
    }
    if (l.stride == 0) throw std::invalid_argument(where + "stride must be >= 1");
    l.weight.validate();
    l.bias.validate();
    if (l.weight.shape != std::vector<std::size_t>{l.out_ch, l.in_ch, l.kernel, l.kernel}) {
        throw std::invalid_argument(where + "weight shape does not match out_ch x in_ch x k x k");
    }
    if (l.bias.shape != std::vector<std::size_t>{l.out_ch}) {
        throw std::invalid_argument(where + "bias shape does not match out_ch");
    }
}

} // namespace

void Model::validate() const {
    if (layers.empty()) throw std::invalid_argument("model: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (const auto* d = std::get_if<DenseLayer>(&layers[i])) {
            validate_dense(*d, i);
        } else {
            validate_conv(std::get<Conv2dLayer>(layers[i]), i);
        }
        // Statically checkable composition; conv->dense depends on the input
        // image size and is checked during forward.
        if (i + 1 < layers.size()) {
            const auto* d0 = std::get_if<DenseLayer>(&layers[i]);
            const auto* d1 = std::get_if<DenseLayer>(&layers[i + 1]);
            const auto* c0 = std::get_if<Conv2dLayer>(&layers[i]);
            const auto* c1 = std::get_if<Conv2dLayer>(&layers[i + 1]);
            if (d0 && d1 && d0->out != d1->in) {
                throw std::invalid_argument("model: layer " + std::to_string(i) +
                                            " out != layer " + std::to_string(i + 1) + " in");
            }
            if (c0 && c1 && c0->out_ch != c1->in_ch) {
                throw std::invalid_argument("model: layer " + std::to_string(i) +
                                            " out_ch != layer " + std::to_string(i + 1) + " in_ch");
            }
            if (d0 && c1) {
                throw std::invalid_argument("model: dense -> conv2d is not supported");
            }
        }
    }
}

std::size_t Model::num_classes() const {
    if (layers.empty()) return 0;
    if (const auto* d = std::get_if<DenseLayer>(&layers.back())) return d->out;
    return std::get<Conv2dLayer>(layers.back()).out_ch;
}

std::vector<const Tensor*> Model::weight_tensors() const {
    std::vector<const Tensor*> out;
    out.reserve(layers.size());
    for (const auto& layer : layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            out.push_back(&d->weight);
        } else {
            out.push_back(&std::get<Conv2dLayer>(layer).weight);
        }
    }
    return out;
}

std::vector<Tensor*> Model::weight_tensors() {
    std::vector<Tensor*> out;
    out.reserve(layers.size());
    for (auto& layer : layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            out.push_back(&d->weight);
        } else {
            out.push_back(&std::get<Conv2dLayer>(layer).weight);
        }
    }
    return out;
}

void Dataset::validate(std::size_t num_classes) const {
    if (inputs.size() != labels.size()) {
        throw std::invalid_argument("dataset: " + std::to_string(inputs.size()) +
                                    " inputs vs " + std::to_string(labels.size()) + " labels");
    }
    for (const auto& t : inputs) t.validate();
    if (num_classes > 0) {
        for (std::size_t l : labels) {
            if (l >= num_classes) {
                throw std::invalid_argument("dataset: label " + std::to_string(l) +
                                            " >= num_classes " + std::to_string(num_classes));
            }
        }
    }
}

} // namespace qshield
