// qshield command-line tool.
//
// Subcommands: quantize, protect, inject, campaign, explore, report.
// Every subcommand reads a JSON config (--config), writes its artifacts plus
// a manifest.json into --out, and exits 0 on success. Parse/usage problems
// exit 2, config validation problems exit 3 (the offending field path is
// reported), anything else exits 1; all failures print one machine-readable
// JSON object on stderr.
//
// Seeds are mandatory in configs (or via --seed) — there is no wall-clock
// default, so a config + seed always reproduces its outputs byte for byte.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qshield/engine.hpp"
#include "qshield/errors.hpp"
#include "qshield/explore.hpp"
#include "qshield/io.hpp"
#include "qshield/manifest.hpp"
#include "qshield/quantize.hpp"
#include "qshield/report.hpp"
#include "qshield/version.hpp"
#include "qshield/wordpack.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qshield;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed_override, "override the config's master seed");
    cmd->add_option("--jobs", args.jobs, "worker threads (QSHIELD_JOBS overrides)");
}

int effective_jobs(int flag_jobs) {
    if (const char* env = std::getenv("QSHIELD_JOBS")) {
        try {
            const int j = std::stoi(env);
            if (j >= 1) return j;
        } catch (const std::exception&) {
            // fall through to the flag
        }
    }
    return flag_jobs >= 1 ? flag_jobs : 1;
}

json load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("config", "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw config_error("config", "invalid JSON in " + path);
    if (!j.is_object()) throw config_error("config", "top level must be an object");
    return j;
}

const json& require_field(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw config_error(path + "." + key, "missing required field");
    return j[key];
}

std::string require_string(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_string()) throw config_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

double require_number(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number()) throw config_error(path + "." + key, "expected a number");
    return v.get<double>();
}

std::uint64_t require_u64(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number_unsigned()) {
        throw config_error(path + "." + key, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

int require_int(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number_integer()) throw config_error(path + "." + key, "expected an integer");
    return v.get<int>();
}

Dataset dataset_from_config(const json& cfg, const std::string& path) {
    const json& d = require_field(cfg, "dataset", path);
    if (d.is_string()) {
        // same convention as load_bundle: .csv or an IDX images file
        const std::string p = d.get<std::string>();
        if (p.size() >= 4 && p.compare(p.size() - 4, 4, ".csv") == 0) return load_csv(p);
        const std::size_t at = p.rfind("images");
        if (at == std::string::npos) {
            throw config_error(path + ".dataset",
                               "IDX path must contain \"images\" (or give {images, labels})");
        }
        std::string labels = p;
        labels.replace(at, 6, "labels");
        return load_idx(p, labels);
    }
    if (!d.is_object()) throw config_error(path + ".dataset", "expected a path or object");
    if (d.contains("csv")) return load_csv(require_string(d, "csv", path + ".dataset"));
    return load_idx(require_string(d, "images", path + ".dataset"),
                    require_string(d, "labels", path + ".dataset"));
}

Model model_from_config(const json& cfg, const std::string& path) {
    Model model = load_model_json(require_string(cfg, "model", path));
    load_weights_blob(model, require_string(cfg, "weights", path));
    return model;
}

WordLayout layout_from_config(const json& cfg, int value_bits, const std::string& path) {
    const json& l = require_field(cfg, "layout", path);
    WordLayout layout;
    layout.value_bits = value_bits;
    layout.word_width = require_int(l, "word_width", path + ".layout");
    layout.protected_bits = require_int(l, "protected_bits", path + ".layout");
    layout.copies = require_int(l, "copies", path + ".layout");
    try {
        layout.policy = policy_from_string(require_string(l, "policy", path + ".layout"));
        layout.validate();
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error(path + ".layout", e.what());
    }
    return layout;
}

FaultModel fault_from_config(const json& c, std::optional<std::uint64_t> seed_override,
                             const std::string& path) {
    FaultModel fm;
    const std::string mode = require_string(c, "mode", path);
    if (mode == "bernoulli") {
        fm.mode = FaultMode::bernoulli;
        if (c.contains("p")) {
            fm.ber = require_number(c, "p", path);
        } else {
            fm.ber = require_number(c, "ber", path);
        }
    } else if (mode == "exact_k") {
        fm.mode = FaultMode::exact_k;
        if (c.contains("k")) {
            fm.flips = require_u64(c, "k", path);
        } else {
            fm.flips = require_u64(c, "flips", path);
        }
    } else {
        throw config_error(path + ".mode", "expected \"bernoulli\" or \"exact_k\"");
    }
    const std::string mask = c.value("target_mask", "whole_word");
    if (mask == "whole_word") {
        fm.target = TargetMask::whole_word;
    } else if (mask == "value_bits_only") {
        fm.target = TargetMask::value_bits_only;
    } else if (mask == "protection_bits_only") {
        fm.target = TargetMask::protection_bits_only;
    } else if (mask == "msb_group_only") {
        fm.target = TargetMask::msb_group_only;
    } else {
        throw config_error(path + ".target_mask", "unknown mask \"" + mask + "\"");
    }
    if (seed_override) {
        fm.master_seed = *seed_override;
    } else {
        fm.master_seed = require_u64(c, "master_seed", path);
    }
    try {
        fm.validate();
    } catch (const std::exception& e) {
        throw config_error(path, e.what());
    }
    return fm;
}

Campaign campaign_from_config(const json& cfg, std::optional<std::uint64_t> seed_override,
                              const std::string& path) {
    const json& c = require_field(cfg, "campaign", path);
    Campaign camp;
    camp.fault = fault_from_config(c, seed_override, path + ".campaign");
    camp.n_runs = require_u64(c, "n_runs", path + ".campaign");
    camp.eval_subset_size = c.value("eval_subset_size", 0u);
    camp.record_per_run = c.value("record_per_run", true);
    camp.sdc_delta = c.value("sdc_delta", 0.005);
    return camp;
}

RunManifest make_manifest(const std::string& subcommand, const json& effective_config,
                          std::uint64_t master_seed) {
    RunManifest m;
    m.tool_version = QSHIELD_VERSION;
    m.subcommand = subcommand;
    m.config_hash = config_hash_hex(effective_config.dump());
    m.master_seed = master_seed;
    m.created_utc = utc_timestamp_now();
    return m;
}

void finish(RunManifest m, const CommonArgs& args) {
    write_manifest(m, args.out_dir);
}

// --- subcommands -----------------------------------------------------------

int cmd_quantize(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    Model model = model_from_config(cfg, "config");
    QuantSpec spec;
    spec.bitwidth = require_int(cfg, "bitwidth", "config");
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw config_error("config.bitwidth", e.what());
    }
    fs::create_directories(args.out_dir);
    const QuantizedModel qm = quantize_model(model, spec);
    const std::string header = (fs::path(args.out_dir) / "quant.json").string();
    const std::string blob = (fs::path(args.out_dir) / "quant.bin").string();
    save_quantized(qm, header, blob);

    RunManifest m = make_manifest("quantize", cfg, 0);
    m.outputs = {header, blob};
    finish(std::move(m), args);
    return 0;
}

int cmd_protect(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    Model model = load_model_json(require_string(cfg, "model", "config"));
    const json& q = require_field(cfg, "quantized", "config");
    const QuantizedModel qm = load_quantized(model,
                                             require_string(q, "header", "config.quantized"),
                                             require_string(q, "blob", "config.quantized"));
    const WordLayout layout = layout_from_config(cfg, qm.bitwidth, "config");
    fs::create_directories(args.out_dir);
    const ProtectedImage image = encode_model(qm, layout);
    const std::string header = (fs::path(args.out_dir) / "protected.json").string();
    const std::string blob = (fs::path(args.out_dir) / "protected.bin").string();
    save_image(image, header, blob);

    RunManifest m = make_manifest("protect", cfg, 0);
    m.outputs = {header, blob};
    finish(std::move(m), args);
    return 0;
}

int cmd_inject(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const json& img_cfg = require_field(cfg, "image", "config");
    const ProtectedImage image = load_image(require_string(img_cfg, "header", "config.image"),
                                            require_string(img_cfg, "blob", "config.image"));
    const FaultModel fm = fault_from_config(require_field(cfg, "fault", "config"),
                                            args.seed_override, "config.fault");
    const std::uint64_t run_index = cfg.value("run_index", 0u);

    const InjectResult faulted = inject(image.words, image.layout, fm, run_index);
    ProtectedImage out_image = image;
    out_image.words = faulted.words;

    fs::create_directories(args.out_dir);
    const std::string header = (fs::path(args.out_dir) / "faulted.json").string();
    const std::string blob = (fs::path(args.out_dir) / "faulted.bin").string();
    save_image(out_image, header, blob);
    const std::string stats = (fs::path(args.out_dir) / "inject_stats.json").string();
    write_file_atomic(stats, json{{"flipped_bits", faulted.flipped_bits},
                                  {"run_index", run_index},
                                  {"master_seed", fm.master_seed}}
                                 .dump(2) +
                                 "\n");

    json effective = cfg;
    effective["fault"]["master_seed"] = fm.master_seed;
    RunManifest m = make_manifest("inject", effective, fm.master_seed);
    m.outputs = {header, blob, stats};
    finish(std::move(m), args);
    return 0;
}

int cmd_campaign(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    Model model = model_from_config(cfg, "config");
    const Dataset dataset = dataset_from_config(cfg, "config");
    const int bitwidth = require_int(cfg, "bitwidth", "config");
    QuantSpec spec{bitwidth};
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw config_error("config.bitwidth", e.what());
    }
    const WordLayout layout = layout_from_config(cfg, bitwidth, "config");
    Campaign camp = campaign_from_config(cfg, args.seed_override, "config");
    try {
        camp.validate(dataset.size());
    } catch (const std::exception& e) {
        throw config_error("config.campaign", e.what());
    }

    const QuantizedModel qm = quantize_model(model, spec);
    const CampaignResult result =
        run_campaign(qm, layout, camp, dataset, effective_jobs(args.jobs));

    fs::create_directories(args.out_dir);
    const std::string jpath = (fs::path(args.out_dir) / "campaign.json").string();
    const std::string cpath = (fs::path(args.out_dir) / "runs.csv").string();
    save_campaign_result(result, layout, camp.fault, jpath, cpath);

    json effective = cfg;
    effective["campaign"]["master_seed"] = camp.fault.master_seed;
    RunManifest m = make_manifest("campaign", effective, camp.fault.master_seed);
    m.outputs = {jpath, cpath};
    finish(std::move(m), args);
    return 0;
}

ExploreConfig explore_from_config(const json& cfg, std::optional<std::uint64_t> seed_override) {
    ExploreConfig ec;
    const json& g = require_field(cfg, "grid", "config");
    ec.grid.word_width = require_int(g, "word_width", "config.grid");
    auto ints = [&](const char* key) {
        const json& v = require_field(g, key, "config.grid");
        if (!v.is_array() || v.empty()) {
            throw config_error(std::string("config.grid.") + key, "expected a non-empty array");
        }
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) {
                throw config_error(std::string("config.grid.") + key, "expected integers");
            }
            out.push_back(e.get<int>());
        }
        return out;
    };
    ec.grid.value_bits = ints("b");
    ec.grid.protected_bits = ints("j");
    ec.grid.copies = ints("r");
    const json& pols = require_field(g, "policies", "config.grid");
    if (!pols.is_array()) throw config_error("config.grid.policies", "expected an array");
    for (const auto& p : pols) {
        try {
            ec.grid.policies.push_back(policy_from_string(p.get<std::string>()));
        } catch (const std::exception& e) {
            throw config_error("config.grid.policies", e.what());
        }
    }

    if (cfg.contains("rates")) {
        if (!cfg["rates"].is_array()) throw config_error("config.rates", "expected an array");
        for (const auto& r : cfg["rates"]) {
            if (!r.is_number()) throw config_error("config.rates", "expected numbers");
            ec.rates.push_back(r.get<double>());
        }
    }

    if (cfg.contains("thresholds")) {
        const json& t = cfg["thresholds"];
        if (t.contains("min_clean_accuracy")) {
            ec.thresholds.min_clean_accuracy = t["min_clean_accuracy"].get<double>();
        }
        if (t.contains("rate_floors")) {
            for (const auto& rf : t["rate_floors"]) {
                ec.thresholds.rate_floors.push_back(
                    {require_number(rf, "rate", "config.thresholds.rate_floors"),
                     require_number(rf, "min_mean_accuracy", "config.thresholds.rate_floors")});
            }
        }
        if (t.contains("max_bits_per_param")) {
            ec.thresholds.max_bits_per_param = t["max_bits_per_param"].get<int>();
        }
        if (t.contains("max_decode_cost")) {
            ec.thresholds.max_decode_cost = t["max_decode_cost"].get<int>();
        }
        try {
            ec.thresholds.validate();
        } catch (const std::exception& e) {
            throw config_error("config.thresholds", e.what());
        }
    }

    const json& c = require_field(cfg, "campaign", "config");
    ec.campaign_template.n_runs = require_u64(c, "n_runs", "config.campaign");
    ec.campaign_template.eval_subset_size = c.value("eval_subset_size", 0u);
    ec.campaign_template.record_per_run = false;
    ec.campaign_template.sdc_delta = c.value("sdc_delta", 0.005);
    const std::string mask = c.value("target_mask", "whole_word");
    json fault_cfg = c;
    fault_cfg["mode"] = "bernoulli";
    fault_cfg["p"] = 0.0;
    fault_cfg["master_seed"] = 0u;
    ec.campaign_template.fault = fault_from_config(fault_cfg, {}, "config.campaign");

    if (seed_override) {
        ec.master_seed = *seed_override;
    } else {
        ec.master_seed = require_u64(cfg, "master_seed", "config");
    }
    if (ec.rates.empty() && ec.thresholds.rate_floors.empty()) {
        throw config_error("config.rates", "no rates to campaign at (rates and rate_floors empty)");
    }
    return ec;
}

int cmd_explore(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    Model model = model_from_config(cfg, "config");
    const Dataset dataset = dataset_from_config(cfg, "config");
    ExploreConfig ec = explore_from_config(cfg, args.seed_override);
    try {
        ec.campaign_template.validate(dataset.size());
    } catch (const std::exception& e) {
        throw config_error("config.campaign", e.what());
    }

    const Grid grid = enumerate_grid(ec.grid);
    if (grid.warning) {
        std::cerr << json{{"warning", *grid.warning}}.dump() << "\n";
    }

    std::vector<double> rates(ec.rates);
    for (const auto& rf : ec.thresholds.rate_floors) rates.push_back(rf.rate);
    std::sort(rates.begin(), rates.end());
    rates.erase(std::unique(rates.begin(), rates.end()), rates.end());

    const std::vector<EvaluatedPoint> evaluated =
        evaluate_grid(grid.points, model, dataset, ec, effective_jobs(args.jobs));
    const std::vector<EvaluatedPoint> survivors = filter_thresholds(evaluated, ec.thresholds);
    const std::vector<EvaluatedPoint> front = pareto_front(survivors);

    fs::create_directories(args.out_dir);
    const std::string report_path = (fs::path(args.out_dir) / "report.csv").string();
    const std::string points_path = (fs::path(args.out_dir) / "points.json").string();
    const std::string pareto_path = (fs::path(args.out_dir) / "pareto.json").string();
    write_report_csv(evaluated, rates, report_path);
    write_points_json(evaluated, points_path);
    write_pareto_json(front, pareto_path);

    json effective = cfg;
    effective["master_seed"] = ec.master_seed;
    RunManifest m = make_manifest("explore", effective, ec.master_seed);
    m.outputs = {report_path, points_path, pareto_path};
    finish(std::move(m), args);
    return 0;
}

int cmd_report(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    fs::create_directories(args.out_dir);
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    if (cfg.contains("points")) {
        const auto points = load_points_json(require_string(cfg, "points", "config"));
        warnings = emit_plot_data(points, args.out_dir);
        outputs.push_back((fs::path(args.out_dir) / "curves_index.csv").string());
        for (const auto& ep : points) {
            outputs.push_back(
                (fs::path(args.out_dir) / ("curve_" + ep.point.label() + ".csv")).string());
        }
    } else if (cfg.contains("campaigns")) {
        const json& list = cfg["campaigns"];
        if (!list.is_array() || list.empty()) {
            throw config_error("config.campaigns", "expected a non-empty array of result files");
        }
        struct Row {
            double rate, mean, hw;
        };
        std::vector<Row> rows;
        for (const auto& item : list) {
            std::ifstream in(item.get<std::string>(), std::ios::binary);
            if (!in) throw io_error(io_errc::bad_format, "cannot open " + item.get<std::string>());
            json r = json::parse(in, nullptr, false);
            if (r.is_discarded() || !r.contains("mean") || !r.contains("fault")) {
                throw io_error(io_errc::bad_format,
                               item.get<std::string>() + ": not a campaign result");
            }
            const double rate = r["fault"].value("ber", 0.0);
            rows.push_back({rate, r["mean"].get<double>(), r["ci95_half_width"].get<double>()});
        }
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            return a.rate < b.rate;
        });
        std::ostringstream out;
        out << "rate,mean_accuracy,ci_low,ci_high\n";
        for (const auto& row : rows) {
            out << format_double(row.rate) << ',' << format_double(row.mean) << ','
                << format_double(row.mean - row.hw) << ',' << format_double(row.mean + row.hw)
                << "\n";
        }
        const std::string path = (fs::path(args.out_dir) / "curve_campaigns.csv").string();
        write_file_atomic(path, out.str());
        outputs.push_back(path);
    } else {
        throw config_error("config", "expected \"points\" or \"campaigns\"");
    }

    for (const auto& w : warnings) {
        std::cerr << json{{"warning", w}}.dump() << "\n";
    }
    RunManifest m = make_manifest("report", cfg, 0);
    m.outputs = std::move(outputs);
    finish(std::move(m), args);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qshield: weight quantization, in-word MSB protection, bit-flip "
                 "reliability campaigns, and design-space exploration"};
    app.set_version_flag("--version", QSHIELD_VERSION);
    app.require_subcommand(1);

    CommonArgs quantize_args, protect_args, inject_args, campaign_args, explore_args,
        report_args;
    add_common(app.add_subcommand("quantize", "post-training weight quantization"),
               quantize_args);
    add_common(app.add_subcommand("protect", "pack quantized weights into protected words"),
               protect_args);
    add_common(app.add_subcommand("inject", "flip bits in a protected image"), inject_args);
    add_common(app.add_subcommand("campaign", "seeded fault-injection campaign"),
               campaign_args);
    add_common(app.add_subcommand("explore", "sweep the design grid and emit the Pareto set"),
               explore_args);
    add_common(app.add_subcommand("report", "plot-ready CSV curves from results"), report_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        std::cerr << app.help() << std::flush;
        return 2;
    }

    try {
        if (app.got_subcommand("quantize")) return cmd_quantize(quantize_args);
        if (app.got_subcommand("protect")) return cmd_protect(protect_args);
        if (app.got_subcommand("inject")) return cmd_inject(inject_args);
        if (app.got_subcommand("campaign")) return cmd_campaign(campaign_args);
        if (app.got_subcommand("explore")) return cmd_explore(explore_args);
        if (app.got_subcommand("report")) return cmd_report(report_args);
    } catch (const config_error& e) {
        std::cerr << json{{"error",
                           {{"kind", "config"}, {"field", e.field()}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return 3;
    } catch (const io_error& e) {
        std::cerr << json{{"error", {{"kind", "io"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "runtime"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
    return 2;
}
