#include "qshield/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "qshield/rng.hpp"

namespace qshield {

namespace {

// Accumulation is ascending-index everywhere so results are bit-identical
// across runs; the bias seeds the accumulator.
Tensor dense_forward(const DenseLayer& l, const Tensor& input) {
    if (input.size() != l.in) {
        throw std::invalid_argument("dense: input size " + std::to_string(input.size()) +
                                    " != declared in " + std::to_string(l.in));
    }
    Tensor out = Tensor::zeros({l.out});
    const double* w = l.weight.data.data();
    const double* x = input.data.data();
    for (std::size_t o = 0; o < l.out; ++o) {
        double acc = l.bias.data[o];
        const double* row = w + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * x[i];
        out.data[o] = (l.activation == Activation::relu && acc < 0.0) ? 0.0 : acc;
    }
    return out;
}

Tensor conv_forward(const Conv2dLayer& l, const Tensor& input) {
    std::size_t in_ch, h, w;
    if (input.shape.size() == 3) {
        in_ch = input.shape[0];
        h = input.shape[1];
        w = input.shape[2];
    } else if (input.shape.size() == 2 && l.in_ch == 1) {
        in_ch = 1;
        h = input.shape[0];
        w = input.shape[1];
    } else {
        throw std::invalid_argument("conv2d: expected [C,H,W] input (or [H,W] for 1 channel)");
    }
    if (in_ch != l.in_ch) {
        throw std::invalid_argument("conv2d: input channels " + std::to_string(in_ch) +
                                    " != declared in_ch " + std::to_string(l.in_ch));
    }
    if (h < l.kernel || w < l.kernel) {
        throw std::invalid_argument("conv2d: input " + std::to_string(h) + "x" +
                                    std::to_string(w) + " smaller than kernel " +
                                    std::to_string(l.kernel));
    }
    const std::size_t oh = (h - l.kernel) / l.stride + 1;
    const std::size_t ow = (w - l.kernel) / l.stride + 1;
    Tensor out = Tensor::zeros({l.out_ch, oh, ow});
    const double* wt = l.weight.data.data();
    const double* x = input.data.data();
    for (std::size_t oc = 0; oc < l.out_ch; ++oc) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = l.bias.data[oc];
                for (std::size_t ic = 0; ic < l.in_ch; ++ic) {
                    for (std::size_t ky = 0; ky < l.kernel; ++ky) {
                        const double* xrow =
                            x + (ic * h + oy * l.stride + ky) * w + ox * l.stride;
                        const double* wrow =
                            wt + ((oc * l.in_ch + ic) * l.kernel + ky) * l.kernel;
                        for (std::size_t kx = 0; kx < l.kernel; ++kx) {
                            acc += wrow[kx] * xrow[kx];
                        }
                    }
                }
                if (l.activation == Activation::relu && acc < 0.0) acc = 0.0;
                out.data[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

} // namespace

Tensor forward(const Model& model, const Tensor& input) {
    if (model.layers.empty()) throw std::invalid_argument("forward: model has no layers");
    input.validate();
    Tensor cur = input;
    for (const auto& layer : model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            // Dense flattens whatever comes in (row-major), so conv -> dense
            // composes without an explicit flatten layer.
            if (cur.shape.size() != 1) cur.shape = {cur.size()};
            cur = dense_forward(*d, cur);
        } else {
            cur = conv_forward(std::get<Conv2dLayer>(layer), cur);
        }
    }
    if (cur.shape.size() != 1) cur.shape = {cur.size()};
    return cur;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax: empty span");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i; // ties keep the lowest index
    }
    return best;
}

double evaluate(const Model& model, const Dataset& dataset) {
    if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Tensor logits = forward(model, dataset.inputs[i]);
        if (argmax(logits.data) == dataset.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double evaluate_subset(const Model& model, const Dataset& dataset,
                       std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("evaluate_subset: empty subset");
    std::size_t hits = 0;
    for (std::size_t idx : indices) {
        if (idx >= dataset.size()) {
            throw std::invalid_argument("evaluate_subset: index out of range");
        }
        const Tensor logits = forward(model, dataset.inputs[idx]);
        if (argmax(logits.data) == dataset.labels[idx]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

std::vector<std::size_t> sample_subset(std::size_t n, std::size_t count,
                                       std::uint64_t seed) {
    if (count > n) throw std::invalid_argument("sample_subset: count > population");
    if (count == 0 || count == n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    // Partial Fisher-Yates, then ascending for cache-friendly evaluation.
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    Rng rng(seed);
    std::vector<std::size_t> picked(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
        picked[i] = pool[i];
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace qshield
