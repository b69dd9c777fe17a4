#pragma once

#include <string>
#include <utility>

#include "qshield/model.hpp"

namespace qshield {

// Model topology JSON: {"layers":[{"type":"dense","in":N,"out":M,
// "activation":"relu"}, {"type":"conv2d","in_ch":..,"out_ch":..,"k":..,
// "stride":..,"activation":".."}, ...]}
Model load_model_json(const std::string& path);
void save_model_json(const Model& model, const std::string& path);

// Weights blob: little-endian float64, concatenated per layer in declaration
// order (weight then bias), row-major. Fills the tensors of `model` in place.
void load_weights_blob(Model& model, const std::string& path);
void save_weights_blob(const Model& model, const std::string& path);

// IDX: big-endian magic 0x00000803 (u8 images, dims N x H x W) and
// 0x00000801 (u8 labels, dims N). Pixels are scaled to [0,1] (px/255).
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& name = "");
void save_idx(const Dataset& dataset, const std::string& images_path,
              const std::string& labels_path);

// CSV fallback: one sample per row, real-valued features, label last.
Dataset load_csv(const std::string& path, const std::string& name = "");
void save_csv(const Dataset& dataset, const std::string& path);

/// Loads and validates a (model, dataset) pair. `dataset_path` ending in
/// .csv selects the CSV fallback; otherwise it names the IDX images file and
/// the labels file is its sibling with the last "images" replaced by
/// "labels" (MNIST naming).
std::pair<Model, Dataset> load_bundle(const std::string& model_path,
                                      const std::string& weights_path,
                                      const std::string& dataset_path);

} // namespace qshield
