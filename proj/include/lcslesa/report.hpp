#pragma once

#include <lcslesa/harness.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace lcslesa {

nlohmann::ordered_json metrics_to_json(const Metrics& m);
nlohmann::ordered_json report_to_json(const EvalReport& r);

/// "cv_<decision>_<mode>_k<k>_b<block>", the stem of every file of a run.
std::string report_stem(const EvalReport& r);

std::string summary_csv_header();
std::string summary_csv_row(const EvalReport& r);

/// Writes <stem>.json, <stem>_roc.csv, <stem>_roc.svg and <stem>_summary.csv
/// into `dir` and returns the JSON path.
std::filesystem::path write_report(const std::filesystem::path& dir, const EvalReport& r);

/// One CSV row per report, in the given order.
std::filesystem::path write_summary(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace lcslesa
