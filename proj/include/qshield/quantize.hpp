#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qshield/model.hpp"

namespace qshield {

/// Symmetric per-tensor weight quantization, rounding half away from zero.
/// Biases stay in full precision.
struct QuantSpec {
    int bitwidth = 8; // b in [2,16]

    void validate() const; // throws std::invalid_argument outside [2,16]
};

/// Largest magnitude representable at bitwidth b: 2^(b-1) - 1. The symmetric
/// range excludes -2^(b-1) so negation is closed. Valid for b in [2,32].
std::int64_t quant_max(int bitwidth);

struct QuantizedTensor {
    std::vector<std::int32_t> q; // two's complement values in [-qmax, qmax]
    double scale = 1.0;          // > 0
};

struct QuantizedModel {
    Model skeleton; // originating model (topology, biases, float weights)
    std::vector<QuantizedTensor> tensors; // one per weight tensor, in order
    int bitwidth = 8;

    std::size_t param_count() const;
    void validate() const;
};

/// s = max|w| / (2^(b-1)-1) per weight tensor; s = 1 for an all-zero tensor.
std::vector<double> calibrate_scales(const Model& model, const QuantSpec& spec);

/// q = clamp(round(w/s), -qmax, qmax). Enforces QuantSpec's [2,16] range.
QuantizedModel quantize_model(const Model& model, const QuantSpec& spec);

/// Width-generic kernel behind quantize_model; accepts b in [2,32] so the
/// explorer can evaluate wide design points up to the 32-bit baseline.
QuantizedModel quantize_model_any_width(const Model& model, int bitwidth);

/// Single-tensor kernel: returns (q, scale) for b in [2,32].
QuantizedTensor quantize_tensor(std::span<const double> values, int bitwidth);

/// Model with weights reconstructed as q*s (biases copied through).
Model dequantize(const QuantizedModel& qmodel);

/// evaluate() on the reconstructed model.
double quantized_accuracy(const QuantizedModel& qmodel, const Dataset& dataset);

// Serialized form: JSON header (bitwidth, per-tensor scales and counts) plus
// a packed little-endian int16 blob in weight-declaration order.
void save_quantized(const QuantizedModel& qmodel, const std::string& json_path,
                    const std::string& blob_path);
QuantizedModel load_quantized(const Model& skeleton, const std::string& json_path,
                              const std::string& blob_path);

} // namespace qshield
