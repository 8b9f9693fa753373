#pragma once

#include <string>

#include "neos/fusion.hpp"
#include "neos/optimizer.hpp"

namespace neos::report {

inline constexpr const char* kVersion = "0.1.0";

/// RFC-4180 field quoting: fields containing separators, quotes or newlines
/// are quoted, embedded quotes doubled.
std::string csv_escape(const std::string& field);

std::string measurements_csv(const std::vector<sensor::Measurement>& measurements);
std::string truth_csv(const scene::Trajectory& truth);
std::string estimates_csv(const filter::EstimateSet& est);

std::string estimate_set_json(const filter::EstimateSet& est);
std::string task_report_json(const filter::TaskClassOutput& out);
std::string run_report_json(const harness::ScenarioSpec& spec,
                            const fusion::GroupRunResult& run,
                            const std::map<std::string, filter::TaskClassOutput>& tasks);
std::string event_log_jsonl(const std::vector<fusion::EventLogEntry>& log);
std::string sweep_csv(const fusion::SweepTable& table);
std::string optimization_report_json(const opt::OptimizationReport& report);

/// FNV-1a 64-bit; reproducibility checks hash whole output files.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace neos::report
