#include "qshield/faultsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "qshield/engine.hpp"
#include "qshield/errors.hpp"
#include "qshield/report.hpp"
#include "qshield/rng.hpp"

namespace qshield {

using nlohmann::json;

namespace {

// Stream tag for the campaign's eval-subset choice, distinct from any run index.
constexpr std::uint64_t kSubsetStream = 0xffffffffffffffffull;

} // namespace

void FaultModel::validate() const {
    if (mode == FaultMode::bernoulli) {
        if (!(ber >= 0.0 && ber <= 1.0)) {
            throw std::invalid_argument("fault model: bit error rate outside [0,1]");
        }
    }
}

std::vector<int> target_bit_positions(const WordLayout& layout, TargetMask target) {
    layout.validate();
    const int b = layout.value_bits;
    const int j = layout.protected_bits;
    std::vector<int> bits;
    switch (target) {
    case TargetMask::whole_word:
        for (int i = 0; i < layout.word_width; ++i) bits.push_back(i);
        break;
    case TargetMask::value_bits_only:
        for (int i = 0; i < b; ++i) bits.push_back(i);
        break;
    case TargetMask::protection_bits_only:
        for (int i = b; i < b + j * layout.copies; ++i) bits.push_back(i);
        break;
    case TargetMask::msb_group_only:
        bits.push_back(b - 1);
        // the top value bit's copy sits at the top of each copy slice
        for (int r = 0; r < layout.copies; ++r) bits.push_back(b + (r + 1) * j - 1);
        break;
    }
    return bits;
}

InjectResult inject(std::span<const std::uint32_t> words, const WordLayout& layout,
                    const FaultModel& fm, std::uint64_t run_index) {
    fm.validate();
    const std::vector<int> positions = target_bit_positions(layout, fm.target);

    InjectResult out;
    out.words.assign(words.begin(), words.end());
    if (positions.empty()) return out;

    Rng rng(derive_seed(fm.master_seed, run_index));
    const std::uint64_t per_word = positions.size();
    const std::uint64_t total = per_word * words.size();

    if (fm.mode == FaultMode::bernoulli) {
        if (fm.ber == 0.0) return out;
        // fixed draw order: word index ascending, mask position ascending
        for (std::size_t w = 0; w < out.words.size(); ++w) {
            for (int pos : positions) {
                if (rng.next_unit() < fm.ber) {
                    out.words[w] ^= (1u << pos);
                    ++out.flipped_bits;
                }
            }
        }
        return out;
    }

    // exact_k: k distinct targeted bits over the whole array (Floyd's sampling)
    if (fm.flips > total) {
        throw std::invalid_argument("inject: k=" + std::to_string(fm.flips) +
                                    " exceeds " + std::to_string(total) + " targeted bits");
    }
    std::set<std::uint64_t> chosen;
    for (std::uint64_t i = total - fm.flips; i < total; ++i) {
        const std::uint64_t pick = rng.next_below(i + 1);
        if (!chosen.insert(pick).second) chosen.insert(i);
    }
    for (std::uint64_t flat : chosen) {
        const std::size_t w = static_cast<std::size_t>(flat / per_word);
        const int pos = positions[static_cast<std::size_t>(flat % per_word)];
        out.words[w] ^= (1u << pos);
        ++out.flipped_bits;
    }
    return out;
}

void Campaign::validate(std::size_t dataset_size) const {
    if (n_runs < 1) throw std::invalid_argument("campaign: n_runs must be >= 1");
    if (eval_subset_size > dataset_size) {
        throw std::invalid_argument("campaign: eval subset " +
                                    std::to_string(eval_subset_size) + " exceeds dataset size " +
                                    std::to_string(dataset_size));
    }
    if (sdc_delta < 0.0) throw std::invalid_argument("campaign: negative sdc delta");
    fault.validate();
}

namespace {

void run_indexed(std::uint64_t n, int jobs, const std::function<void(std::uint64_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::uint64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    const int workers = static_cast<int>(std::min<std::uint64_t>(n, jobs));
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::uint64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

CampaignResult run_campaign(const QuantizedModel& qmodel, const WordLayout& layout,
                            const Campaign& campaign, const Dataset& dataset, int jobs) {
    qmodel.validate();
    campaign.validate(dataset.size());
    if (dataset.size() == 0) throw std::invalid_argument("campaign: empty dataset");

    const ProtectedImage image = encode_model(qmodel, layout);
    const std::size_t subset_size =
        campaign.eval_subset_size == 0 ? dataset.size() : campaign.eval_subset_size;
    const std::vector<std::size_t> subset = sample_subset(
        dataset.size(), subset_size, derive_seed(campaign.fault.master_seed, kSubsetStream));

    CampaignResult result;
    result.n_runs = campaign.n_runs;
    result.master_seed = campaign.fault.master_seed;
    result.sdc_delta = campaign.sdc_delta;
    result.clean_accuracy = evaluate_subset(dequantize(qmodel), dataset, subset);

    result.runs.assign(campaign.n_runs, RunRecord{});
    run_indexed(campaign.n_runs, jobs, [&](std::uint64_t run) {
        const InjectResult faulted = inject(image.words, layout, campaign.fault, run);
        ProtectedImage run_image = image;
        run_image.words = std::move(faulted.words);
        DecodeStats stats;
        const std::vector<QuantizedTensor> decoded = decode_image(run_image, &stats);

        QuantizedModel run_model;
        run_model.skeleton = qmodel.skeleton;
        run_model.bitwidth = qmodel.bitwidth;
        run_model.tensors = decoded;
        // faulted words may decode outside the encoder's range; rebuild
        // weights directly rather than revalidating the symmetric invariant
        Model reconstructed = run_model.skeleton;
        auto weights = reconstructed.weight_tensors();
        for (std::size_t t = 0; t < weights.size(); ++t) {
            for (std::size_t i = 0; i < decoded[t].q.size(); ++i) {
                weights[t]->data[i] = static_cast<double>(decoded[t].q[i]) * decoded[t].scale;
            }
        }

        RunRecord rec;
        rec.run_index = run;
        rec.flips = faulted.flipped_bits;
        rec.corrections = stats.corrections;
        rec.accuracy = evaluate_subset(reconstructed, dataset, subset);
        result.runs[run] = rec;
    });

    // aggregate in index order
    double sum = 0.0;
    for (const auto& r : result.runs) {
        sum += r.accuracy;
        result.correction_events += r.corrections;
        if (r.accuracy < result.clean_accuracy - campaign.sdc_delta) {
            result.sdc_rate += 1.0;
        }
    }
    const double n = static_cast<double>(campaign.n_runs);
    result.mean = sum / n;
    result.sdc_rate /= n;
    if (campaign.n_runs > 1) {
        double ss = 0.0;
        for (const auto& r : result.runs) {
            const double d = r.accuracy - result.mean;
            ss += d * d;
        }
        result.stddev = std::sqrt(ss / (n - 1.0)); // sample std
    }
    result.ci95_half_width = 1.96 * result.stddev / std::sqrt(n);
    if (!campaign.record_per_run) result.runs.clear();
    return result;
}

double analytic_msb_error_prob(double p, int votes) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
    if (votes < 1 || votes % 2 == 0) {
        throw std::invalid_argument("vote count must be odd and positive");
    }
    double prob = 0.0;
    for (int j = (votes + 1) / 2; j <= votes; ++j) {
        double binom = 1.0;
        for (int i = 0; i < j; ++i) {
            binom = binom * static_cast<double>(votes - i) / static_cast<double>(i + 1);
        }
        prob += binom * std::pow(p, j) * std::pow(1.0 - p, votes - j);
    }
    return prob;
}

void save_campaign_result(const CampaignResult& result, const WordLayout& layout,
                          const FaultModel& fm, const std::string& json_path,
                          const std::string& csv_path) {
    json j;
    j["n_runs"] = result.n_runs;
    j["master_seed"] = result.master_seed;
    j["layout"] = {{"word_width", layout.word_width},
                   {"value_bits", layout.value_bits},
                   {"protected_bits", layout.protected_bits},
                   {"copies", layout.copies},
                   {"policy", to_string(layout.policy)}};
    j["fault"] = {{"mode", fm.mode == FaultMode::bernoulli ? "bernoulli" : "exact_k"},
                  {"target_mask", [&] {
                       switch (fm.target) {
                       case TargetMask::whole_word: return "whole_word";
                       case TargetMask::value_bits_only: return "value_bits_only";
                       case TargetMask::protection_bits_only: return "protection_bits_only";
                       case TargetMask::msb_group_only: return "msb_group_only";
                       }
                       return "whole_word";
                   }()}};
    if (fm.mode == FaultMode::bernoulli) {
        j["fault"]["ber"] = fm.ber;
    } else {
        j["fault"]["flips"] = fm.flips;
    }
    j["clean_accuracy"] = result.clean_accuracy;
    j["mean"] = result.mean;
    j["stddev"] = result.stddev;
    j["ci95_half_width"] = result.ci95_half_width;
    j["correction_events"] = result.correction_events;
    j["sdc_rate"] = result.sdc_rate;
    j["sdc_delta"] = result.sdc_delta;
    if (!result.runs.empty()) {
        json runs = json::array();
        for (const auto& r : result.runs) {
            runs.push_back({{"run_index", r.run_index},
                            {"accuracy", r.accuracy},
                            {"flips", r.flips},
                            {"corrections", r.corrections}});
        }
        j["runs"] = std::move(runs);
    }
    std::ofstream jout(json_path, std::ios::binary);
    if (!jout) throw io_error(io_errc::bad_format, "cannot write " + json_path);
    jout << j.dump(2) << "\n";

    std::ofstream cout_(csv_path, std::ios::binary);
    if (!cout_) throw io_error(io_errc::bad_format, "cannot write " + csv_path);
    cout_ << "run_index,accuracy,flips,corrections\n";
    for (const auto& r : result.runs) {
        cout_ << r.run_index << ',' << format_double(r.accuracy) << ',' << r.flips << ','
              << r.corrections << '\n';
    }
}

} // namespace qshield
