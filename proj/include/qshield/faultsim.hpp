#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qshield/wordpack.hpp"

namespace qshield {

enum class FaultMode { bernoulli, exact_k };

/// Which stored bits the injector may flip.
enum class TargetMask {
    whole_word,           // all W bits, padding included
    value_bits_only,      // [0, b)
    protection_bits_only, // [b, b + J*R)
    msb_group_only        // the top value bit and its R copies
};

struct FaultModel {
    FaultMode mode = FaultMode::bernoulli;
    double ber = 0.0;           // bernoulli: per-bit flip probability per run
    std::uint64_t flips = 0;    // exact_k: flips per run, without replacement
    TargetMask target = TargetMask::whole_word;
    std::uint64_t master_seed = 0;

    void validate() const;
};

/// Bit positions within one word that `target` selects, ascending.
std::vector<int> target_bit_positions(const WordLayout& layout, TargetMask target);

struct InjectResult {
    std::vector<std::uint32_t> words;
    std::uint64_t flipped_bits = 0;
};

/// Returns a faulted copy; the input is never touched. The run's RNG stream
/// is derive_seed(master_seed, run_index), so runs reproduce independently
/// of execution order. Throws std::invalid_argument when exact_k asks for
/// more flips than there are targeted bits.
InjectResult inject(std::span<const std::uint32_t> words, const WordLayout& layout,
                    const FaultModel& fm, std::uint64_t run_index);

struct Campaign {
    std::uint64_t n_runs = 30;
    FaultModel fault;
    std::size_t eval_subset_size = 0; // 0 = whole dataset
    bool record_per_run = true;
    double sdc_delta = 0.005; // accuracy drop counting as silent corruption

    void validate(std::size_t dataset_size) const;
};

struct RunRecord {
    std::uint64_t run_index = 0;
    double accuracy = 0.0;
    std::uint64_t flips = 0;
    std::uint64_t corrections = 0;
};

struct CampaignResult {
    std::uint64_t n_runs = 0;
    std::uint64_t master_seed = 0;
    double clean_accuracy = 0.0; // fault-free accuracy on the same subset
    double mean = 0.0;
    double stddev = 0.0;           // sample std (n-1), 0 when n == 1
    double ci95_half_width = 0.0;  // 1.96 * stddev / sqrt(n)
    std::uint64_t correction_events = 0;
    double sdc_rate = 0.0; // runs with accuracy < clean - sdc_delta
    double sdc_delta = 0.005;
    std::vector<RunRecord> runs; // per-run records, index order
};

/// One full campaign: per run inject -> decode -> reconstruct -> evaluate on
/// a seed-fixed subset. Deterministic for a given (master_seed, config) at
/// any worker count: runs are keyed by index and aggregated in index order.
CampaignResult run_campaign(const QuantizedModel& qmodel, const WordLayout& layout,
                            const Campaign& campaign, const Dataset& dataset,
                            int jobs = 1);

/// P(majority-voted bit is wrong) when each of `votes` independent copies
/// flips with probability p: sum_{j>=ceil(votes/2)} C(votes,j) p^j (1-p)^(votes-j).
/// For votes=3 this is 3p^2 - 2p^3. `votes` must be odd.
double analytic_msb_error_prob(double p, int votes);

// Result JSON + per-run CSV (columns run_index, accuracy, flips, corrections).
void save_campaign_result(const CampaignResult& result, const WordLayout& layout,
                          const FaultModel& fm, const std::string& json_path,
                          const std::string& csv_path);

} // namespace qshield
