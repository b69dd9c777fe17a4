#include "qshield/wordpack.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qshield/errors.hpp"

namespace qshield {

using nlohmann::json;

namespace {

constexpr std::uint32_t bit_mask(int bits) {
    return bits >= 32 ? 0xffffffffu : ((std::uint32_t{1} << bits) - 1u);
}

const char* check_layout(const WordLayout& l) {
    if (l.word_width != 8 && l.word_width != 16 && l.word_width != 32)
        return "word width must be 8, 16, or 32";
    if (l.value_bits < 2 || l.value_bits > 32) return "value bits outside [2,32]";
    if (l.protected_bits < 0 || l.copies < 0) return "negative J or R";
    if (l.protected_bits > l.value_bits) return "J exceeds value bits";
    if (l.value_bits + l.protected_bits * l.copies > l.word_width)
        return "b + J*R exceeds word width";
    if (l.copies > 0 && l.protected_bits < 1) return "copies without protected bits";
    if (l.protected_bits > 0 && l.copies < 1) return "protected bits without copies";
    switch (l.policy) {
    case ProtectionPolicy::none:
        if (l.copies != 0) return "policy none requires R = 0";
        break;
    case ProtectionPolicy::majority:
        if (l.copies < 2 || l.copies % 2 != 0)
            return "majority requires even R >= 2 (odd total votes)";
        break;
    case ProtectionPolicy::detect_zero:
    case ProtectionPolicy::detect_trust_copy:
        if (l.copies != 1) return "detect policies require R = 1";
        break;
    }
    return nullptr;
}

} // namespace

bool WordLayout::is_valid() const noexcept { return check_layout(*this) == nullptr; }

void WordLayout::validate() const {
    if (const char* why = check_layout(*this)) {
        throw std::invalid_argument(std::string("word layout: ") + why);
    }
}

std::uint32_t encode(std::int32_t q, const WordLayout& layout) {
    layout.validate();
    const std::int64_t qmax = quant_max(layout.value_bits);
    if (q < -qmax || q > qmax) {
        throw std::invalid_argument("encode: q " + std::to_string(q) +
                                    " outside symmetric range for b=" +
                                    std::to_string(layout.value_bits));
    }
    const int b = layout.value_bits;
    const int j = layout.protected_bits;
    std::uint32_t word = static_cast<std::uint32_t>(q) & bit_mask(b);
    if (j > 0) {
        const std::uint32_t top = (word >> (b - j)) & bit_mask(j);
        for (int r = 0; r < layout.copies; ++r) {
            word |= top << (b + r * j);
        }
    }
    return word;
}

DecodeResult decode(std::uint32_t word, const WordLayout& layout) {
    layout.validate();
    const int b = layout.value_bits;
    const int j = layout.protected_bits;
    std::uint32_t value = word & bit_mask(b);
    bool corrected = false;

    if (layout.copies > 0) {
        bool zeroed = false;
        for (int pos = b - j; pos < b && !zeroed; ++pos) {
            const int slice_off = pos - (b - j);
            const std::uint32_t vbit = (value >> pos) & 1u;
            int ones = static_cast<int>(vbit);
            std::uint32_t copy0 = 0;
            bool disagree = false;
            for (int r = 0; r < layout.copies; ++r) {
                const std::uint32_t cbit = (word >> (b + r * j + slice_off)) & 1u;
                if (r == 0) copy0 = cbit;
                ones += static_cast<int>(cbit);
                if (cbit != vbit) disagree = true;
            }
            switch (layout.policy) {
            case ProtectionPolicy::majority: {
                const int votes = layout.copies + 1;
                const std::uint32_t maj = ones * 2 > votes ? 1u : 0u;
                if (disagree) corrected = true;
                value = (value & ~(1u << pos)) | (maj << pos);
                break;
            }
            case ProtectionPolicy::detect_zero:
                if (disagree) {
                    corrected = true;
                    value = 0;
                    zeroed = true; // whole parameter is dropped to zero
                }
                break;
            case ProtectionPolicy::detect_trust_copy:
                if (disagree) {
                    corrected = true;
                    value = (value & ~(1u << pos)) | (copy0 << pos);
                }
                break;
            case ProtectionPolicy::none:
                break;
            }
        }
    }

    // sign-extend b-bit two's complement
    std::int32_t q;
    if (b == 32) {
        q = static_cast<std::int32_t>(value);
    } else if (value & (1u << (b - 1))) {
        q = static_cast<std::int32_t>(value | ~bit_mask(b));
    } else {
        q = static_cast<std::int32_t>(value);
    }
    return {q, corrected};
}

std::vector<std::uint32_t> encode_words(std::span<const std::int32_t> q,
                                        const WordLayout& layout) {
    layout.validate();
    std::vector<std::uint32_t> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = encode(q[i], layout);
    return out;
}

std::vector<std::int32_t> decode_words(std::span<const std::uint32_t> words,
                                       const WordLayout& layout, DecodeStats* stats) {
    layout.validate();
    std::vector<std::int32_t> out(words.size());
    std::uint64_t corrections = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const DecodeResult r = decode(words[i], layout);
        out[i] = r.value;
        corrections += r.corrected ? 1 : 0;
    }
    if (stats) stats->corrections += corrections;
    return out;
}

Footprint footprint(const WordLayout& layout, std::uint64_t n_params, int baseline_bits) {
    layout.validate();
    if (baseline_bits <= 0) throw std::invalid_argument("footprint: baseline must be positive");
    Footprint f;
    f.bits_per_param = layout.payload_bits();
    f.total_bits = n_params * static_cast<std::uint64_t>(layout.word_width);
    f.overhead_fraction = (static_cast<double>(f.bits_per_param) - baseline_bits) /
                          static_cast<double>(baseline_bits);
    return f;
}

int decode_cost(const WordLayout& layout) {
    layout.validate();
    const int votes = layout.copies > 0 ? layout.protected_bits : 0;
    return 1 + layout.copies * layout.protected_bits + votes;
}

const char* to_string(ProtectionPolicy p) {
    switch (p) {
    case ProtectionPolicy::none: return "none";
    case ProtectionPolicy::majority: return "majority";
    case ProtectionPolicy::detect_zero: return "detect_zero";
    case ProtectionPolicy::detect_trust_copy: return "detect_trust_copy";
    }
    return "none";
}

ProtectionPolicy policy_from_string(const std::string& s) {
    if (s == "none") return ProtectionPolicy::none;
    if (s == "majority") return ProtectionPolicy::majority;
    if (s == "detect_zero") return ProtectionPolicy::detect_zero;
    if (s == "detect_trust_copy") return ProtectionPolicy::detect_trust_copy;
    throw std::invalid_argument("unknown protection policy: " + s);
}

ProtectedImage encode_model(const QuantizedModel& qmodel, const WordLayout& layout) {
    layout.validate();
    if (layout.value_bits != qmodel.bitwidth) {
        throw std::invalid_argument("encode_model: layout b " +
                                    std::to_string(layout.value_bits) +
                                    " != quantized bitwidth " + std::to_string(qmodel.bitwidth));
    }
    ProtectedImage img;
    img.layout = layout;
    for (const auto& t : qmodel.tensors) {
        img.scales.push_back(t.scale);
        img.counts.push_back(t.q.size());
        const auto words = encode_words(t.q, layout);
        img.words.insert(img.words.end(), words.begin(), words.end());
    }
    return img;
}

std::vector<QuantizedTensor> decode_image(const ProtectedImage& image, DecodeStats* stats) {
    std::vector<QuantizedTensor> out;
    std::size_t offset = 0;
    for (std::size_t t = 0; t < image.counts.size(); ++t) {
        QuantizedTensor qt;
        qt.scale = image.scales[t];
        const std::size_t n = image.counts[t];
        if (offset + n > image.words.size()) {
            throw std::invalid_argument("protected image: counts exceed stored words");
        }
        qt.q = decode_words({image.words.data() + offset, n}, image.layout, stats);
        offset += n;
        out.push_back(std::move(qt));
    }
    return out;
}

void save_image(const ProtectedImage& image, const std::string& json_path,
                const std::string& blob_path) {
    image.layout.validate();
    json header;
    header["word_width"] = image.layout.word_width;
    header["value_bits"] = image.layout.value_bits;
    header["protected_bits"] = image.layout.protected_bits;
    header["copies"] = image.layout.copies;
    header["policy"] = to_string(image.layout.policy);
    header["scales"] = image.scales;
    header["counts"] = image.counts;
    std::ofstream jout(json_path, std::ios::binary);
    if (!jout) throw io_error(io_errc::bad_format, "cannot write " + json_path);
    jout << header.dump(2) << "\n";

    std::ofstream bout(blob_path, std::ios::binary);
    if (!bout) throw io_error(io_errc::bad_format, "cannot write " + blob_path);
    const int bytes = image.layout.word_width / 8;
    for (std::uint32_t w : image.words) {
        for (int i = 0; i < bytes; ++i) bout.put(static_cast<char>((w >> (8 * i)) & 0xff));
    }
}

ProtectedImage load_image(const std::string& json_path, const std::string& blob_path) {
    std::ifstream jin(json_path, std::ios::binary);
    if (!jin) throw io_error(io_errc::bad_format, "cannot open " + json_path);
    json header = json::parse(jin, nullptr, false);
    if (header.is_discarded()) {
        throw io_error(io_errc::bad_format, json_path + ": invalid JSON");
    }
    for (const char* key : {"word_width", "value_bits", "protected_bits", "copies",
                            "policy", "scales", "counts"}) {
        if (!header.contains(key)) {
            throw io_error(io_errc::bad_format,
                           json_path + ": missing \"" + std::string(key) + "\"");
        }
    }

    ProtectedImage img;
    img.layout.word_width = header["word_width"].get<int>();
    img.layout.value_bits = header["value_bits"].get<int>();
    img.layout.protected_bits = header["protected_bits"].get<int>();
    img.layout.copies = header["copies"].get<int>();
    img.layout.policy = policy_from_string(header["policy"].get<std::string>());
    img.layout.validate();
    img.scales = header["scales"].get<std::vector<double>>();
    img.counts = header["counts"].get<std::vector<std::uint64_t>>();
    if (img.scales.size() != img.counts.size()) {
        throw io_error(io_errc::shape_mismatch, json_path + ": scales/counts length mismatch");
    }

    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw io_error(io_errc::bad_format, "cannot open " + blob_path);
    std::ostringstream ss;
    ss << bin.rdbuf();
    const std::string bytes = ss.str();

    std::uint64_t total = 0;
    for (std::uint64_t c : img.counts) total += c;
    const std::size_t word_bytes = static_cast<std::size_t>(img.layout.word_width / 8);
    if (bytes.size() < total * word_bytes) {
        throw io_error(io_errc::truncated, blob_path + ": blob shorter than declared counts");
    }
    if (bytes.size() > total * word_bytes) {
        throw io_error(io_errc::shape_mismatch, blob_path + ": blob larger than declared counts");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    img.words.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) {
        std::uint32_t w = 0;
        for (std::size_t k = 0; k < word_bytes; ++k) {
            w |= static_cast<std::uint32_t>(p[i * word_bytes + k]) << (8 * k);
        }
        img.words[i] = w;
    }
    return img;
}

} // namespace qshield
