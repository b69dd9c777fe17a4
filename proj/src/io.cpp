#include "qshield/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qshield/errors.hpp"

namespace qshield {

using nlohmann::json;

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803; // u8 payload, 3 dims
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801; // u8 payload, 1 dim

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(io_errc::bad_format, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::string& path) {
    const std::string text = read_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw io_error(io_errc::bad_format, "invalid JSON in " + path);
    return j;
}

std::uint32_t read_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

double read_le_f64(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | p[i];
    return std::bit_cast<double>(u);
}

void write_le_f64(std::ostream& out, double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::size_t require_uint(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number_unsigned() || j[key].get<std::uint64_t>() == 0) {
        throw io_error(io_errc::bad_format, where + ": missing or non-positive \"" + key + "\"");
    }
    return j[key].get<std::size_t>();
}

} // namespace

Model load_model_json(const std::string& path) {
    const json j = parse_json_file(path);
    if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
        throw io_error(io_errc::bad_format, path + ": missing non-empty \"layers\" array");
    }
    Model model;
    std::size_t idx = 0;
    for (const auto& lj : j["layers"]) {
        const std::string where = path + ": layers[" + std::to_string(idx) + "]";
        const std::string type = lj.value("type", "");
        const std::string act = lj.value("activation", "none");
        if (type == "dense") {
            DenseLayer l;
            l.in = require_uint(lj, "in", where);
            l.out = require_uint(lj, "out", where);
            l.activation = activation_from_string(act);
            l.weight = Tensor::zeros({l.out, l.in});
            l.bias = Tensor::zeros({l.out});
            model.layers.emplace_back(std::move(l));
        } else if (type == "conv2d") {
            Conv2dLayer l;
            l.in_ch = require_uint(lj, "in_ch", where);
            l.out_ch = require_uint(lj, "out_ch", where);
            l.kernel = require_uint(lj, "k", where);
            l.stride = lj.value("stride", 1u);
            if (l.stride == 0) throw io_error(io_errc::bad_format, where + ": stride must be >= 1");
            l.activation = activation_from_string(act);
            l.weight = Tensor::zeros({l.out_ch, l.in_ch, l.kernel, l.kernel});
            l.bias = Tensor::zeros({l.out_ch});
            model.layers.emplace_back(std::move(l));
        } else {
            throw io_error(io_errc::bad_format, where + ": unknown layer type \"" + type + "\"");
        }
        ++idx;
    }
    model.validate();
    return model;
}

void save_model_json(const Model& model, const std::string& path) {
    json layers = json::array();
    for (const auto& layer : model.layers) {
        json lj;
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            lj = {{"type", "dense"},
                  {"in", d->in},
                  {"out", d->out},
                  {"activation", to_string(d->activation)}};
        } else {
            const auto& c = std::get<Conv2dLayer>(layer);
            lj = {{"type", "conv2d"},   {"in_ch", c.in_ch}, {"out_ch", c.out_ch},
                  {"k", c.kernel},      {"stride", c.stride},
                  {"activation", to_string(c.activation)}};
        }
        layers.push_back(std::move(lj));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error(io_errc::bad_format, "cannot write " + path);
    out << json{{"layers", layers}}.dump(2) << "\n";
}

void load_weights_blob(Model& model, const std::string& path) {
    const std::string bytes = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t offset = 0;

    auto take = [&](Tensor& t) {
        const std::size_t need = t.size() * 8;
        if (offset + need > bytes.size()) {
            throw io_error(io_errc::truncated,
                           path + ": truncated, need " + std::to_string(offset + need) +
                               " bytes but file has " + std::to_string(bytes.size()));
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.data[i] = read_le_f64(p + offset + i * 8);
        }
        offset += need;
    };

    for (auto& layer : model.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            take(d->weight);
            take(d->bias);
        } else {
            auto& c = std::get<Conv2dLayer>(layer);
            take(c.weight);
            take(c.bias);
        }
    }
    if (offset != bytes.size()) {
        throw io_error(io_errc::shape_mismatch,
                       path + ": " + std::to_string(bytes.size() - offset) +
                           " trailing bytes beyond declared shapes");
    }
    model.validate();
}

void save_weights_blob(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error(io_errc::bad_format, "cannot write " + path);
    auto put = [&](const Tensor& t) {
        for (double v : t.data) write_le_f64(out, v);
    };
    for (const auto& layer : model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            put(d->weight);
            put(d->bias);
        } else {
            const auto& c = std::get<Conv2dLayer>(layer);
            put(c.weight);
            put(c.bias);
        }
    }
}

namespace {

struct IdxPayload {
    std::vector<std::size_t> dims;
    const unsigned char* data = nullptr;
    std::size_t count = 0;
    std::string bytes;
};

IdxPayload read_idx(const std::string& path, std::uint32_t expected_magic) {
    IdxPayload out;
    out.bytes = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(out.bytes.data());
    if (out.bytes.size() < 4) throw io_error(io_errc::truncated, path + ": shorter than magic");
    const std::uint32_t magic = read_be32(p);
    if (magic != expected_magic) {
        std::ostringstream ss;
        ss << path << ": bad magic 0x" << std::hex << magic;
        throw io_error(io_errc::bad_magic, ss.str());
    }
    const std::size_t ndim = magic & 0xff;
    if (out.bytes.size() < 4 + 4 * ndim) {
        throw io_error(io_errc::truncated, path + ": truncated dimension header");
    }
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
        const std::size_t dim = read_be32(p + 4 + 4 * d);
        if (dim == 0) throw io_error(io_errc::shape_mismatch, path + ": zero dimension");
        out.dims.push_back(dim);
        total *= dim;
    }
    const std::size_t header = 4 + 4 * ndim;
    if (out.bytes.size() < header + total) {
        throw io_error(io_errc::truncated,
                       path + ": payload shorter than declared dims (" +
                           std::to_string(out.bytes.size() - header) + " < " +
                           std::to_string(total) + ")");
    }
    if (out.bytes.size() > header + total) {
        throw io_error(io_errc::shape_mismatch, path + ": payload larger than declared dims");
    }
    out.data = p + header;
    out.count = total;
    return out;
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& name) {
    const IdxPayload images = read_idx(images_path, kIdxImagesMagic);
    const IdxPayload labels = read_idx(labels_path, kIdxLabelsMagic);
    const std::size_t n = images.dims[0];
    const std::size_t h = images.dims[1];
    const std::size_t w = images.dims[2];
    if (labels.dims[0] != n) {
        throw io_error(io_errc::shape_mismatch,
                       images_path + ": " + std::to_string(n) + " images vs " +
                           std::to_string(labels.dims[0]) + " labels");
    }
    Dataset ds;
    ds.name = name.empty() ? images_path : name;
    ds.inputs.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor t = Tensor::zeros({h, w});
        const unsigned char* px = images.data + i * h * w;
        for (std::size_t k = 0; k < h * w; ++k) {
            t.data[k] = static_cast<double>(px[k]) / 255.0;
        }
        ds.inputs.push_back(std::move(t));
        ds.labels.push_back(labels.data[i]);
    }
    ds.validate();
    return ds;
}

void save_idx(const Dataset& dataset, const std::string& images_path,
              const std::string& labels_path) {
    dataset.validate();
    if (dataset.size() == 0) throw io_error(io_errc::bad_format, "empty dataset");
    const auto& shape = dataset.inputs[0].shape;
    if (shape.size() != 2) throw io_error(io_errc::bad_format, "save_idx expects [H,W] inputs");

    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw io_error(io_errc::bad_format, "cannot write " + images_path);
    write_be32(imgs, kIdxImagesMagic);
    write_be32(imgs, static_cast<std::uint32_t>(dataset.size()));
    write_be32(imgs, static_cast<std::uint32_t>(shape[0]));
    write_be32(imgs, static_cast<std::uint32_t>(shape[1]));
    for (const auto& t : dataset.inputs) {
        if (t.shape != shape) {
            throw io_error(io_errc::shape_mismatch, "save_idx: ragged image shapes");
        }
        for (double v : t.data) {
            const double scaled = v * 255.0;
            const long px = std::lround(scaled < 0 ? 0 : (scaled > 255 ? 255 : scaled));
            imgs.put(static_cast<char>(static_cast<unsigned char>(px)));
        }
    }

    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw io_error(io_errc::bad_format, "cannot write " + labels_path);
    write_be32(lbls, kIdxLabelsMagic);
    write_be32(lbls, static_cast<std::uint32_t>(dataset.size()));
    for (std::size_t l : dataset.labels) lbls.put(static_cast<char>(l));
}

Dataset load_csv(const std::string& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw io_error(io_errc::bad_format, "cannot open " + path);
    Dataset ds;
    ds.name = name.empty() ? path : name;
    std::string line;
    std::size_t width = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument("trailing junk");
                fields.push_back(v);
            } catch (const std::exception&) {
                throw io_error(io_errc::bad_format, path + ":" + std::to_string(line_no) +
                                                        ": non-numeric field \"" + cell + "\"");
            }
        }
        if (fields.size() < 2) {
            throw io_error(io_errc::bad_format,
                           path + ":" + std::to_string(line_no) + ": need >= 1 feature + label");
        }
        if (width == 0) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw io_error(io_errc::shape_mismatch,
                           path + ":" + std::to_string(line_no) + ": ragged row");
        }
        const double label = fields.back();
        fields.pop_back();
        if (label < 0 || label != static_cast<double>(static_cast<std::size_t>(label))) {
            throw io_error(io_errc::bad_format, path + ":" + std::to_string(line_no) +
                                                    ": label must be a non-negative integer");
        }
        ds.inputs.emplace_back(std::vector<std::size_t>{fields.size()}, std::move(fields));
        ds.labels.push_back(static_cast<std::size_t>(label));
    }
    if (ds.size() == 0) throw io_error(io_errc::bad_format, path + ": no samples");
    ds.validate();
    return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error(io_errc::bad_format, "cannot write " + path);
    out.precision(17);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (double v : dataset.inputs[i].data) out << v << ',';
        out << dataset.labels[i] << '\n';
    }
}

std::pair<Model, Dataset> load_bundle(const std::string& model_path,
                                      const std::string& weights_path,
                                      const std::string& dataset_path) {
    Model model = load_model_json(model_path);
    load_weights_blob(model, weights_path);
    Dataset ds;
    if (dataset_path.size() >= 4 &&
        dataset_path.compare(dataset_path.size() - 4, 4, ".csv") == 0) {
        ds = load_csv(dataset_path);
    } else {
        const std::size_t at = dataset_path.rfind("images");
        if (at == std::string::npos) {
            throw io_error(io_errc::bad_format,
                           dataset_path +
                               ": IDX dataset path must contain \"images\" so the labels "
                               "sibling can be located (or pass a .csv)");
        }
        std::string labels_path = dataset_path;
        labels_path.replace(at, 6, "labels");
        ds = load_idx(dataset_path, labels_path);
    }
    ds.validate(model.num_classes());
    return {std::move(model), std::move(ds)};
}

} // namespace qshield
