#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qshield/model.hpp"

namespace qshield {

/// Runs the model on one input and returns the last-layer pre-softmax
/// outputs. Pure and deterministic: accumulation is in ascending index
/// order and the library is compiled without FP contraction, so repeated
/// calls are bit-identical. Throws std::invalid_argument on shape mismatch.
Tensor forward(const Model& model, const Tensor& input);

/// argmax over values, ties broken by lowest index.
std::size_t argmax(std::span<const double> values);

/// Top-1 accuracy in [0,1]. Throws std::invalid_argument on an empty dataset.
double evaluate(const Model& model, const Dataset& dataset);

/// Accuracy restricted to the given sample indices (campaign eval subsets).
double evaluate_subset(const Model& model, const Dataset& dataset,
                       std::span<const std::size_t> indices);

/// Deterministic choice of `count` distinct indices from [0, n), ascending.
std::vector<std::size_t> sample_subset(std::size_t n, std::size_t count,
                                       std::uint64_t seed);

} // namespace qshield
