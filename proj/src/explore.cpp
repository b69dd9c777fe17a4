#include "qshield/explore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qshield/rng.hpp"

namespace qshield {

void Thresholds::validate() const {
    if (min_clean_accuracy && !(*min_clean_accuracy >= 0.0 && *min_clean_accuracy <= 1.0)) {
        throw std::invalid_argument("thresholds: min clean accuracy outside [0,1]");
    }
    for (const auto& rf : rate_floors) {
        if (!(rf.rate >= 0.0 && rf.rate <= 1.0)) {
            throw std::invalid_argument("thresholds: rate outside [0,1]");
        }
        if (!(rf.min_mean_accuracy >= 0.0 && rf.min_mean_accuracy <= 1.0)) {
            throw std::invalid_argument("thresholds: accuracy floor outside [0,1]");
        }
    }
    if (max_bits_per_param && *max_bits_per_param <= 0) {
        throw std::invalid_argument("thresholds: max bits per param must be positive");
    }
    if (max_decode_cost && *max_decode_cost <= 0) {
        throw std::invalid_argument("thresholds: max decode cost must be positive");
    }
}

WordLayout DesignPoint::layout() const {
    WordLayout l;
    l.word_width = word_width;
    l.value_bits = value_bits;
    l.protected_bits = protected_bits;
    l.copies = copies;
    l.policy = policy;
    return l;
}

std::string DesignPoint::label() const {
    std::ostringstream ss;
    ss << "b" << value_bits << "_J" << protected_bits << "_R" << copies << "_"
       << to_string(policy) << "_W" << word_width;
    return ss.str();
}

Grid enumerate_grid(const GridSpec& spec) {
    if (spec.value_bits.empty() || spec.protected_bits.empty() || spec.copies.empty()) {
        throw std::invalid_argument("grid: empty b/J/R range");
    }
    auto sorted_unique = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    const std::vector<int> bs = sorted_unique(spec.value_bits);
    const std::vector<int> js = sorted_unique(spec.protected_bits);
    const std::vector<int> rs = sorted_unique(spec.copies);
    std::vector<ProtectionPolicy> policies;
    for (ProtectionPolicy p : spec.policies) {
        if (p != ProtectionPolicy::none &&
            std::find(policies.begin(), policies.end(), p) == policies.end()) {
            policies.push_back(p);
        }
    }

    Grid grid;
    for (int b : bs) {
        for (int j : js) {
            for (int r : rs) {
                if (j == 0 && r == 0) {
                    // the unprotected corner always pairs with policy none
                    DesignPoint dp{b, 0, 0, ProtectionPolicy::none, spec.word_width};
                    if (dp.layout().is_valid()) grid.points.push_back(dp);
                    continue;
                }
                for (ProtectionPolicy p : policies) {
                    DesignPoint dp{b, j, r, p, spec.word_width};
                    if (dp.layout().is_valid()) grid.points.push_back(dp);
                }
            }
        }
    }
    if (grid.points.empty()) {
        grid.warning = "no valid design point in the requested ranges";
    }
    return grid;
}

namespace {

// Rates the reliability objective and the campaigns run at: thresholded
// rates joined with the config's explicit list, ascending.
std::vector<double> campaign_rates(const ExploreConfig& cfg) {
    std::set<double> rates(cfg.rates.begin(), cfg.rates.end());
    for (const auto& rf : cfg.thresholds.rate_floors) rates.insert(rf.rate);
    return {rates.begin(), rates.end()};
}

void run_indexed(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = static_cast<int>(std::min<std::size_t>(n, jobs));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

EvaluatedPoint evaluate_point(const DesignPoint& dp, const QuantizedModel& qmodel,
                              const Dataset& dataset, const ExploreConfig& cfg,
                              std::optional<double> clean_accuracy_hint) {
    EvaluatedPoint ep;
    ep.point = dp;
    const WordLayout layout = dp.layout();
    try {
        layout.validate();
        const Footprint fp = footprint(layout, qmodel.param_count());
        ep.bits_per_param = fp.bits_per_param;
        ep.overhead_fraction = fp.overhead_fraction;
        ep.decode_cost = qshield::decode_cost(layout);
        ep.campaign_seed = cfg.master_seed;
        ep.n_runs = cfg.campaign_template.n_runs;
        ep.clean_accuracy = clean_accuracy_hint ? *clean_accuracy_hint
                                                : quantized_accuracy(qmodel, dataset);

        const std::vector<double> rates = campaign_rates(cfg);
        for (std::size_t i = 0; i < rates.size(); ++i) {
            Campaign c = cfg.campaign_template;
            c.fault.mode = FaultMode::bernoulli;
            c.fault.ber = rates[i];
            // seed depends on the rate index only, so points are paired
            c.fault.master_seed = derive_seed(cfg.master_seed, i);
            const CampaignResult r = run_campaign(qmodel, layout, c, dataset, 1);
            RateStats rs;
            rs.rate = rates[i];
            rs.mean = r.mean;
            rs.ci95_half_width = r.ci95_half_width;
            rs.stddev = r.stddev;
            rs.correction_events = r.correction_events;
            rs.sdc_rate = r.sdc_rate;
            ep.per_rate.push_back(rs);
        }

        // worst constrained faulty accuracy: min over thresholded rates,
        // falling back to all evaluated rates, then to clean accuracy
        std::set<double> constrained;
        for (const auto& rf : cfg.thresholds.rate_floors) constrained.insert(rf.rate);
        double worst = ep.clean_accuracy;
        bool found = false;
        for (const auto& rs : ep.per_rate) {
            if (!constrained.empty() && !constrained.count(rs.rate)) continue;
            worst = found ? std::min(worst, rs.mean) : rs.mean;
            found = true;
        }
        if (!found && !ep.per_rate.empty()) {
            worst = ep.per_rate.front().mean;
            for (const auto& rs : ep.per_rate) worst = std::min(worst, rs.mean);
        }
        ep.worst_faulty_accuracy = worst;
    } catch (const std::exception& e) {
        ep.valid = false;
        ep.invalid_reason = e.what();
    }
    return ep;
}

std::vector<EvaluatedPoint> evaluate_grid(const std::vector<DesignPoint>& points,
                                          const Model& model, const Dataset& dataset,
                                          const ExploreConfig& cfg, int jobs) {
    cfg.thresholds.validate();
    // quantized models and their clean accuracy cached per distinct
    // bitwidth (clean accuracy only depends on b)
    std::map<int, QuantizedModel> cache;
    std::map<int, double> clean;
    for (const auto& dp : points) {
        if (!cache.count(dp.value_bits)) {
            cache.emplace(dp.value_bits, quantize_model_any_width(model, dp.value_bits));
            clean.emplace(dp.value_bits,
                          quantized_accuracy(cache.at(dp.value_bits), dataset));
        }
    }
    std::vector<EvaluatedPoint> out(points.size());
    run_indexed(points.size(), jobs, [&](std::size_t i) {
        out[i] = evaluate_point(points[i], cache.at(points[i].value_bits), dataset, cfg,
                                clean.at(points[i].value_bits));
    });
    return out;
}

std::vector<EvaluatedPoint> filter_thresholds(const std::vector<EvaluatedPoint>& points,
                                              const Thresholds& thr) {
    thr.validate();
    std::vector<EvaluatedPoint> out;
    for (const auto& ep : points) {
        if (!ep.valid) continue;
        if (thr.min_clean_accuracy && ep.clean_accuracy < *thr.min_clean_accuracy) continue;
        bool ok = true;
        for (const auto& rf : thr.rate_floors) {
            bool rate_seen = false;
            for (const auto& rs : ep.per_rate) {
                if (rs.rate == rf.rate) {
                    rate_seen = true;
                    if (rs.mean < rf.min_mean_accuracy) ok = false;
                    break;
                }
            }
            if (!rate_seen) ok = false; // unevaluated constraint cannot pass
            if (!ok) break;
        }
        if (!ok) continue;
        if (thr.max_bits_per_param && ep.bits_per_param > *thr.max_bits_per_param) continue;
        if (thr.max_decode_cost && ep.decode_cost > *thr.max_decode_cost) continue;
        out.push_back(ep);
    }
    return out;
}

bool dominates(const EvaluatedPoint& a, const EvaluatedPoint& b) {
    // minimize (-worst accuracy, bits per param, decode cost)
    const bool ge_all = a.worst_faulty_accuracy >= b.worst_faulty_accuracy &&
                        a.bits_per_param <= b.bits_per_param && a.decode_cost <= b.decode_cost;
    const bool strict = a.worst_faulty_accuracy > b.worst_faulty_accuracy ||
                        a.bits_per_param < b.bits_per_param || a.decode_cost < b.decode_cost;
    return ge_all && strict;
}

std::vector<EvaluatedPoint> pareto_front(const std::vector<EvaluatedPoint>& points) {
    std::vector<EvaluatedPoint> front;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t k = 0; k < points.size(); ++k) {
            if (k != i && dominates(points[k], points[i])) {
                dominated = true;
                break;
            }
        }
        if (!dominated) front.push_back(points[i]);
    }
    std::stable_sort(front.begin(), front.end(),
                     [](const EvaluatedPoint& a, const EvaluatedPoint& b) {
                         if (a.bits_per_param != b.bits_per_param)
                             return a.bits_per_param < b.bits_per_param;
                         if (a.worst_faulty_accuracy != b.worst_faulty_accuracy)
                             return a.worst_faulty_accuracy > b.worst_faulty_accuracy;
                         return a.decode_cost < b.decode_cost;
                     });
    return front;
}

} // namespace qshield
