#include "qshield/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qshield/errors.hpp"
#include "qshield/manifest.hpp"

namespace qshield {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
    // shortest %.g form that parses back to the same double
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_report_csv(const std::vector<EvaluatedPoint>& points,
                      const std::vector<double>& rates, const std::string& path) {
    std::ostringstream out;
    out << "index,b,J,R,policy,W,valid,clean_accuracy,bits_per_param,overhead_fraction,"
           "decode_cost,worst_faulty_accuracy";
    for (double r : rates) {
        out << ",mean@" << format_double(r) << ",ci95@" << format_double(r);
    }
    out << "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& ep = points[i];
        out << i << ',' << ep.point.value_bits << ',' << ep.point.protected_bits << ','
            << ep.point.copies << ',' << to_string(ep.point.policy) << ','
            << ep.point.word_width << ',' << (ep.valid ? 1 : 0) << ','
            << format_double(ep.clean_accuracy) << ',' << ep.bits_per_param << ','
            << format_double(ep.overhead_fraction) << ',' << ep.decode_cost << ','
            << format_double(ep.worst_faulty_accuracy);
        for (double r : rates) {
            const RateStats* found = nullptr;
            for (const auto& rs : ep.per_rate) {
                if (rs.rate == r) {
                    found = &rs;
                    break;
                }
            }
            if (found) {
                out << ',' << format_double(found->mean) << ','
                    << format_double(found->ci95_half_width);
            } else {
                out << ",,";
            }
        }
        out << "\n";
    }
    write_file_atomic(path, out.str());
}

namespace {

json point_to_json(const EvaluatedPoint& ep) {
    json j;
    j["point"] = {{"value_bits", ep.point.value_bits},
                  {"protected_bits", ep.point.protected_bits},
                  {"copies", ep.point.copies},
                  {"policy", to_string(ep.point.policy)},
                  {"word_width", ep.point.word_width}};
    j["valid"] = ep.valid;
    if (!ep.valid) j["invalid_reason"] = ep.invalid_reason;
    j["clean_accuracy"] = ep.clean_accuracy;
    j["bits_per_param"] = ep.bits_per_param;
    j["overhead_fraction"] = ep.overhead_fraction;
    j["decode_cost"] = ep.decode_cost;
    j["worst_faulty_accuracy"] = ep.worst_faulty_accuracy;
    j["campaign_seed"] = ep.campaign_seed;
    j["n_runs"] = ep.n_runs;
    json rates = json::array();
    for (const auto& rs : ep.per_rate) {
        rates.push_back({{"rate", rs.rate},
                         {"mean", rs.mean},
                         {"ci95_half_width", rs.ci95_half_width},
                         {"stddev", rs.stddev},
                         {"correction_events", rs.correction_events},
                         {"sdc_rate", rs.sdc_rate}});
    }
    j["per_rate"] = std::move(rates);
    return j;
}

EvaluatedPoint point_from_json(const json& j) {
    EvaluatedPoint ep;
    const auto& p = j.at("point");
    ep.point.value_bits = p.at("value_bits").get<int>();
    ep.point.protected_bits = p.at("protected_bits").get<int>();
    ep.point.copies = p.at("copies").get<int>();
    ep.point.policy = policy_from_string(p.at("policy").get<std::string>());
    ep.point.word_width = p.at("word_width").get<int>();
    ep.valid = j.at("valid").get<bool>();
    if (j.contains("invalid_reason")) ep.invalid_reason = j["invalid_reason"].get<std::string>();
    ep.clean_accuracy = j.at("clean_accuracy").get<double>();
    ep.bits_per_param = j.at("bits_per_param").get<int>();
    ep.overhead_fraction = j.at("overhead_fraction").get<double>();
    ep.decode_cost = j.at("decode_cost").get<int>();
    ep.worst_faulty_accuracy = j.at("worst_faulty_accuracy").get<double>();
    ep.campaign_seed = j.at("campaign_seed").get<std::uint64_t>();
    ep.n_runs = j.at("n_runs").get<std::uint64_t>();
    for (const auto& rj : j.at("per_rate")) {
        RateStats rs;
        rs.rate = rj.at("rate").get<double>();
        rs.mean = rj.at("mean").get<double>();
        rs.ci95_half_width = rj.at("ci95_half_width").get<double>();
        rs.stddev = rj.at("stddev").get<double>();
        rs.correction_events = rj.at("correction_events").get<std::uint64_t>();
        rs.sdc_rate = rj.at("sdc_rate").get<double>();
        ep.per_rate.push_back(rs);
    }
    return ep;
}

} // namespace

void write_points_json(const std::vector<EvaluatedPoint>& points, const std::string& path) {
    json j = json::array();
    for (const auto& ep : points) j.push_back(point_to_json(ep));
    write_file_atomic(path, json{{"points", j}}.dump(2) + "\n");
}

std::vector<EvaluatedPoint> load_points_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(io_errc::bad_format, "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    const char* key = nullptr;
    if (!j.is_discarded() && j.contains("points")) key = "points";
    if (!j.is_discarded() && j.contains("pareto")) key = "pareto";
    if (key == nullptr) {
        throw io_error(io_errc::bad_format, path + ": not a points/pareto file");
    }
    std::vector<EvaluatedPoint> out;
    for (const auto& pj : j[key]) out.push_back(point_from_json(pj));
    return out;
}

void write_pareto_json(const std::vector<EvaluatedPoint>& front, const std::string& path) {
    json j = json::array();
    for (const auto& ep : front) j.push_back(point_to_json(ep));
    write_file_atomic(path, json{{"pareto", j}}.dump(2) + "\n");
}

std::vector<std::string> emit_plot_data(const std::vector<EvaluatedPoint>& points,
                                        const std::string& out_dir) {
    std::vector<std::string> warnings;
    fs::create_directories(out_dir);
    if (points.empty()) {
        warnings.push_back("no design points: nothing to plot");
        write_file_atomic((fs::path(out_dir) / "curves_index.csv").string(), "file,label\n");
        return warnings;
    }
    std::ostringstream index;
    index << "file,label\n";
    for (const auto& ep : points) {
        if (ep.per_rate.empty()) {
            throw std::invalid_argument("plot data: point " + ep.point.label() +
                                        " has no per-rate metrics");
        }
        const std::string file = "curve_" + ep.point.label() + ".csv";
        std::ostringstream out;
        out << "rate,mean_accuracy,ci_low,ci_high\n";
        for (const auto& rs : ep.per_rate) {
            out << format_double(rs.rate) << ',' << format_double(rs.mean) << ','
                << format_double(rs.mean - rs.ci95_half_width) << ','
                << format_double(rs.mean + rs.ci95_half_width) << "\n";
        }
        write_file_atomic((fs::path(out_dir) / file).string(), out.str());
        index << file << ',' << ep.point.label() << "\n";

        // a curve rising with rate beyond the joined CIs is statistically
        // suspicious; flag it
        for (std::size_t i = 0; i + 1 < ep.per_rate.size(); ++i) {
            const auto& lo = ep.per_rate[i];
            const auto& hi = ep.per_rate[i + 1];
            if (hi.mean > lo.mean + lo.ci95_half_width + hi.ci95_half_width) {
                warnings.push_back("point " + ep.point.label() + ": mean accuracy rises from rate " +
                                   format_double(lo.rate) + " to " + format_double(hi.rate) +
                                   " beyond the 95% CIs");
            }
        }
    }
    write_file_atomic((fs::path(out_dir) / "curves_index.csv").string(), index.str());
    return warnings;
}

} // namespace qshield
