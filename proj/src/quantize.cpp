#include "qshield/quantize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qshield/engine.hpp"
#include "qshield/errors.hpp"

namespace qshield {

using nlohmann::json;

void QuantSpec::validate() const {
    if (bitwidth < 2 || bitwidth > 16) {
        throw std::invalid_argument("quant spec: bitwidth " + std::to_string(bitwidth) +
                                    " outside [2,16]");
    }
}

std::int64_t quant_max(int bitwidth) {
    if (bitwidth < 2 || bitwidth > 32) {
        throw std::invalid_argument("quant_max: bitwidth outside [2,32]");
    }
    return (std::int64_t{1} << (bitwidth - 1)) - 1;
}

namespace {

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
}

double tensor_scale(std::span<const double> values, int bitwidth) {
    const double m = max_abs(values);
    if (m == 0.0) return 1.0; // degenerate all-zero tensor
    return m / static_cast<double>(quant_max(bitwidth));
}

} // namespace

std::vector<double> calibrate_scales(const Model& model, const QuantSpec& spec) {
    spec.validate();
    model.validate();
    std::vector<double> scales;
    for (const Tensor* w : model.weight_tensors()) {
        scales.push_back(tensor_scale(w->data, spec.bitwidth));
    }
    return scales;
}

QuantizedTensor quantize_tensor(std::span<const double> values, int bitwidth) {
    const double qmax = static_cast<double>(quant_max(bitwidth));
    QuantizedTensor out;
    out.scale = tensor_scale(values, bitwidth);
    out.q.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        // round half away from zero, then clamp to the symmetric range
        const double r = std::round(values[i] / out.scale);
        out.q[i] = static_cast<std::int32_t>(std::clamp(r, -qmax, qmax));
    }
    return out;
}

QuantizedModel quantize_model_any_width(const Model& model, int bitwidth) {
    if (bitwidth < 2 || bitwidth > 32) {
        throw std::invalid_argument("quantize: bitwidth outside [2,32]");
    }
    model.validate();
    QuantizedModel qm;
    qm.skeleton = model;
    qm.bitwidth = bitwidth;
    for (const Tensor* w : model.weight_tensors()) {
        qm.tensors.push_back(quantize_tensor(w->data, bitwidth));
    }
    return qm;
}

QuantizedModel quantize_model(const Model& model, const QuantSpec& spec) {
    spec.validate();
    return quantize_model_any_width(model, spec.bitwidth);
}

std::size_t QuantizedModel::param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.q.size();
    return n;
}

void QuantizedModel::validate() const {
    skeleton.validate();
    const auto weights = skeleton.weight_tensors();
    if (weights.size() != tensors.size()) {
        throw std::invalid_argument("quantized model: tensor count mismatch");
    }
    const std::int64_t qmax = quant_max(bitwidth);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].q.size() != weights[i]->size()) {
            throw std::invalid_argument("quantized model: tensor " + std::to_string(i) +
                                        " length mismatch");
        }
        if (!(tensors[i].scale > 0.0)) {
            throw std::invalid_argument("quantized model: non-positive scale");
        }
        for (std::int32_t q : tensors[i].q) {
            if (q < -qmax || q > qmax) {
                throw std::invalid_argument("quantized model: q outside symmetric range");
            }
        }
    }
}

Model dequantize(const QuantizedModel& qmodel) {
    Model out = qmodel.skeleton;
    auto weights = out.weight_tensors();
    for (std::size_t t = 0; t < weights.size(); ++t) {
        const auto& qt = qmodel.tensors[t];
        for (std::size_t i = 0; i < qt.q.size(); ++i) {
            weights[t]->data[i] = static_cast<double>(qt.q[i]) * qt.scale;
        }
    }
    return out;
}

double quantized_accuracy(const QuantizedModel& qmodel, const Dataset& dataset) {
    return evaluate(dequantize(qmodel), dataset);
}

void save_quantized(const QuantizedModel& qmodel, const std::string& json_path,
                    const std::string& blob_path) {
    qmodel.validate();
    if (qmodel.bitwidth > 16) {
        throw std::invalid_argument("save_quantized: int16 blob holds bitwidths <= 16 only");
    }
    json header;
    header["bitwidth"] = qmodel.bitwidth;
    json scales = json::array();
    json counts = json::array();
    for (const auto& t : qmodel.tensors) {
        scales.push_back(t.scale);
        counts.push_back(t.q.size());
    }
    header["scales"] = std::move(scales);
    header["counts"] = std::move(counts);
    std::ofstream jout(json_path, std::ios::binary);
    if (!jout) throw io_error(io_errc::bad_format, "cannot write " + json_path);
    jout << header.dump(2) << "\n";

    std::ofstream bout(blob_path, std::ios::binary);
    if (!bout) throw io_error(io_errc::bad_format, "cannot write " + blob_path);
    for (const auto& t : qmodel.tensors) {
        for (std::int32_t q : t.q) {
            const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
            bout.put(static_cast<char>(u & 0xff));
            bout.put(static_cast<char>((u >> 8) & 0xff));
        }
    }
}

QuantizedModel load_quantized(const Model& skeleton, const std::string& json_path,
                              const std::string& blob_path) {
    std::ifstream jin(json_path, std::ios::binary);
    if (!jin) throw io_error(io_errc::bad_format, "cannot open " + json_path);
    json header = json::parse(jin, nullptr, false);
    if (header.is_discarded() || !header.contains("bitwidth") || !header.contains("scales") ||
        !header.contains("counts")) {
        throw io_error(io_errc::bad_format, json_path + ": invalid quantized-model header");
    }

    QuantizedModel qm;
    qm.skeleton = skeleton;
    qm.bitwidth = header["bitwidth"].get<int>();
    const auto& scales = header["scales"];
    const auto& counts = header["counts"];
    if (scales.size() != counts.size()) {
        throw io_error(io_errc::shape_mismatch, json_path + ": scales/counts length mismatch");
    }

    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw io_error(io_errc::bad_format, "cannot open " + blob_path);
    std::ostringstream ss;
    ss << bin.rdbuf();
    const std::string bytes = ss.str();

    std::size_t total = 0;
    for (const auto& c : counts) total += c.get<std::size_t>();
    if (bytes.size() < total * 2) {
        throw io_error(io_errc::truncated, blob_path + ": blob shorter than declared counts");
    }
    if (bytes.size() > total * 2) {
        throw io_error(io_errc::shape_mismatch, blob_path + ": blob larger than declared counts");
    }

    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t offset = 0;
    for (std::size_t t = 0; t < scales.size(); ++t) {
        QuantizedTensor qt;
        qt.scale = scales[t].get<double>();
        const std::size_t n = counts[t].get<std::size_t>();
        qt.q.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto u = static_cast<std::uint16_t>(p[offset] | (p[offset + 1] << 8));
            qt.q[i] = static_cast<std::int16_t>(u);
            offset += 2;
        }
        qm.tensors.push_back(std::move(qt));
    }
    qm.validate();
    return qm;
}

} // namespace qshield
