#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsa/eval.hpp"

namespace dsa {

/// Shortest-safe text for a double: 17 significant digits, so a reader gets
/// back the identical value.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Column order is part of the file format. Timing is always the last column.
inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "scenario_id", "policy",     "repetition",        "slots",
        "right_idle",  "conservative", "success",         "failure",
        "decision_accuracy", "modified_decision_accuracy", "beta",
        "interference", "discounted_return", "gamma",     "status",
        "seconds_per_decision"};
    return cols;
}

inline void write_csv(const std::vector<MetricsReport>& reports, std::ostream& out) {
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : reports) {
        out << r.scenario_id << ',' << r.policy << ',' << r.repetition << ',';
        if (r.ok()) {
            out << r.slots << ',' << r.count(Situation::RightIdle) << ',' << r.count(Situation::Conservative) << ','
                << r.count(Situation::Success) << ',' << r.count(Situation::Failure) << ','
                << format_real(r.decision_accuracy()) << ',' << format_real(r.modified_decision_accuracy()) << ','
                << format_real(r.beta) << ',' << format_real(r.interference()) << ','
                << format_real(r.discounted_return) << ',' << format_real(r.gamma) << ",ok,"
                << format_real(r.seconds_per_decision);
        } else {
            out << ",,,,,,,,,,,failed,";
        }
        out << '\n';
    }
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["scenario_id"] = r.scenario_id;
    j["policy"] = r.policy;
    j["repetition"] = r.repetition;
    j["status"] = r.ok() ? "ok" : "failed";
    if (!r.ok()) {
        j["error"] = r.error;
        return j;
    }
    j["slots"] = r.slots;
    for (auto s : {Situation::RightIdle, Situation::Conservative, Situation::Success, Situation::Failure}) {
        j[situation_name(s)] = r.count(s);
    }
    j["decision_accuracy"] = r.decision_accuracy();
    j["modified_decision_accuracy"] = r.modified_decision_accuracy();
    j["beta"] = r.beta;
    j["interference"] = r.interference();
    j["discounted_return"] = r.discounted_return;
    j["gamma"] = r.gamma;
    j["seconds_per_decision"] = r.seconds_per_decision;
    if (!r.return_series.empty()) j["return_series"] = r.return_series;
    if (!r.avg_max_q_series.empty()) j["avg_max_q_series"] = r.avg_max_q_series;
    return j;
}

inline void write_json(const std::vector<MetricsReport>& reports, std::ostream& out) {
    nlohmann::json doc;
    doc["runs"] = nlohmann::json::array();
    for (const auto& r : reports) doc["runs"].push_back(report_to_json(r));
    out << doc.dump(1) << '\n';
}

enum class ReportFormat { Csv, Json, Both };

inline ReportFormat parse_format(const std::string& s) {
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    if (s == "both") return ReportFormat::Both;
    throw ConfigError("format", "expected csv, json or both");
}

/// Writes report.csv and/or report.json under `dir`; returns the files written.
inline std::vector<std::filesystem::path> emit_report(const std::vector<MetricsReport>& reports, ReportFormat format,
                                                      const std::filesystem::path& dir) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        return out;
    };
    if (format != ReportFormat::Json) {
        const auto p = dir / "report.csv";
        auto out = open(p);
        write_csv(reports, out);
        if (!out) throw std::runtime_error("write failed: " + p.string());
        written.push_back(p);
    }
    if (format != ReportFormat::Csv) {
        const auto p = dir / "report.json";
        auto out = open(p);
        write_json(reports, out);
        if (!out) throw std::runtime_error("write failed: " + p.string());
        written.push_back(p);
    }
    return written;
}

}  // namespace dsa
