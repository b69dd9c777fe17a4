#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qshield/quantize.hpp"

namespace qshield {

/// How disagreement between a value bit and its stored copies is resolved.
enum class ProtectionPolicy {
    none,             // R == 0, no redundancy
    majority,         // R even; vote over the value bit plus R copies
    detect_zero,      // R == 1; on mismatch zero the whole parameter
    detect_trust_copy // R == 1; on mismatch take the copy's bit
};

/// Bit packing of one parameter into a stored memory word.
///
///   bits [0, b)                   two's-complement value
///   bits [b + r*J, b + (r+1)*J)   copy r of the value's top J bits
///   bits [b + J*R, W)             zero padding
///
/// Copies sit immediately above the value so every mask is computable from
/// (b, J, R) alone. Fault injection targets the full stored word width W,
/// padding included; padding faults are masked at decode by construction.
struct WordLayout {
    int word_width = 32;     // W in {8,16,32}
    int value_bits = 8;      // b
    int protected_bits = 0;  // J, top J bits of the value get copies
    int copies = 0;          // R
    ProtectionPolicy policy = ProtectionPolicy::none;

    int payload_bits() const { return value_bits + protected_bits * copies; }

    bool is_valid() const noexcept;
    void validate() const; // throws std::invalid_argument with the violated rule
};

struct DecodeResult {
    std::int32_t value = 0;
    bool corrected = false; // any vote-group disagreement seen
};

/// Packs q per the layout. q must be inside the quantizer range for b.
std::uint32_t encode(std::int32_t q, const WordLayout& layout);

/// Reverses encode, applying the layout's policy per protected bit.
/// Every W-bit pattern is decodable; faulted words may decode to
/// -2^(b-1), which the encoder's symmetric range never produces.
DecodeResult decode(std::uint32_t word, const WordLayout& layout);

std::vector<std::uint32_t> encode_words(std::span<const std::int32_t> q,
                                        const WordLayout& layout);

struct DecodeStats {
    std::uint64_t corrections = 0; // words whose decode flagged a disagreement
};

std::vector<std::int32_t> decode_words(std::span<const std::uint32_t> words,
                                       const WordLayout& layout,
                                       DecodeStats* stats = nullptr);

struct Footprint {
    int bits_per_param = 0;         // b + J*R
    std::uint64_t total_bits = 0;   // n_params * W, the stored-word footprint
    double overhead_fraction = 0.0; // (bits_per_param - baseline) / baseline
};

Footprint footprint(const WordLayout& layout, std::uint64_t n_params,
                    int baseline_bits = 32);

/// Abstract decode cost: 1 value extract + R*J copy extracts + J votes when
/// protected. The explorer's performance proxy.
int decode_cost(const WordLayout& layout);

const char* to_string(ProtectionPolicy p);
ProtectionPolicy policy_from_string(const std::string& s);

/// Protected parameter image: every weight tensor of a quantized model
/// encoded into stored words, blob in weight-declaration order.
struct ProtectedImage {
    WordLayout layout;
    std::vector<double> scales;       // per weight tensor
    std::vector<std::uint64_t> counts; // per weight tensor
    std::vector<std::uint32_t> words;  // concatenated
};

ProtectedImage encode_model(const QuantizedModel& qmodel, const WordLayout& layout);

/// Decoded q arrays per tensor; adds correction events to *stats if given.
std::vector<QuantizedTensor> decode_image(const ProtectedImage& image,
                                          DecodeStats* stats = nullptr);

// Header JSON {W, b, J, R, policy, scales, counts} + blob of little-endian
// words, W bits each.
void save_image(const ProtectedImage& image, const std::string& json_path,
                const std::string& blob_path);
ProtectedImage load_image(const std::string& json_path, const std::string& blob_path);

} // namespace qshield
