#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qshield/faultsim.hpp"

namespace qshield {

/// User-defined design thresholds. Absent members impose no constraint.
struct Thresholds {
    std::optional<double> min_clean_accuracy;
    struct RateFloor {
        double rate = 0.0;
        double min_mean_accuracy = 0.0;
    };
    std::vector<RateFloor> rate_floors;
    std::optional<int> max_bits_per_param;
    std::optional<int> max_decode_cost;

    void validate() const;
};

/// One (b, J, R, policy) configuration at a stored word width W.
struct DesignPoint {
    int value_bits = 8;
    int protected_bits = 0;
    int copies = 0;
    ProtectionPolicy policy = ProtectionPolicy::none;
    int word_width = 32;

    WordLayout layout() const;
    std::string label() const; // e.g. "b8_J1_R2_majority_W16"
};

struct RateStats {
    double rate = 0.0;
    double mean = 0.0;
    double ci95_half_width = 0.0;
    double stddev = 0.0;
    std::uint64_t correction_events = 0;
    double sdc_rate = 0.0;
};

struct EvaluatedPoint {
    DesignPoint point;
    bool valid = true;
    std::string invalid_reason;
    double clean_accuracy = 0.0;
    std::vector<RateStats> per_rate; // ascending rate, one campaign each
    /// min mean accuracy over thresholded rates (all rates when none are
    /// thresholded; clean accuracy when no campaigns ran) — the reliability
    /// objective.
    double worst_faulty_accuracy = 0.0;
    int bits_per_param = 0;
    double overhead_fraction = 0.0;
    int decode_cost = 0;
    std::uint64_t campaign_seed = 0;
    std::uint64_t n_runs = 0;
};

struct GridSpec {
    std::vector<int> value_bits;        // b candidates
    std::vector<int> protected_bits;    // J candidates
    std::vector<int> copies;            // R candidates
    std::vector<ProtectionPolicy> policies;
    int word_width = 32;
};

struct Grid {
    std::vector<DesignPoint> points;
    std::optional<std::string> warning; // set when no valid combination exists
};

/// All valid (b, J, R, policy) combinations in lexicographic order. The
/// unprotected corner (J=0, R=0) is emitted once with policy none whatever
/// the policy list says; protected combinations pair with each listed
/// compatible policy.
Grid enumerate_grid(const GridSpec& spec);

struct ExploreConfig {
    GridSpec grid;
    std::vector<double> rates; // BERs to campaign at (union'd with threshold rates)
    Thresholds thresholds;
    Campaign campaign_template; // mode/mask/n_runs/subset; ber filled per rate
    std::uint64_t master_seed = 0;
};

/// Quantize -> encode -> one campaign per rate; metrics filled. Campaign
/// seeds are shared across design points (derived from master_seed and the
/// rate index only) so protected-vs-unprotected comparisons are paired.
/// Clean accuracy (full-dataset, fault-free) depends only on b; pass the
/// cached value as a hint to avoid recomputing it per point.
EvaluatedPoint evaluate_point(const DesignPoint& dp, const QuantizedModel& qmodel,
                              const Dataset& dataset, const ExploreConfig& cfg,
                              std::optional<double> clean_accuracy_hint = {});

/// Grid sweep; quantized models are cached across points sharing b.
/// Deterministic at any `jobs` count (results keyed by grid index).
std::vector<EvaluatedPoint> evaluate_grid(const std::vector<DesignPoint>& points,
                                          const Model& model, const Dataset& dataset,
                                          const ExploreConfig& cfg, int jobs = 1);

/// Keep iff clean accuracy, every (rate, floor) pair, bits/param and decode
/// cost all satisfy `thr`. Invalid points never survive.
std::vector<EvaluatedPoint> filter_thresholds(const std::vector<EvaluatedPoint>& points,
                                              const Thresholds& thr);

/// Non-dominated set under (maximize worst faulty accuracy, minimize
/// bits/param, minimize decode cost). Ties kept; sorted by bits_per_param,
/// then accuracy descending, then decode cost.
std::vector<EvaluatedPoint> pareto_front(const std::vector<EvaluatedPoint>& points);

bool dominates(const EvaluatedPoint& a, const EvaluatedPoint& b);

} // namespace qshield
