#pragma once

#include "mfmlmc/engine.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mfmlmc {

using CsvRow = std::vector<std::string>;

struct CsvDocument {
    std::vector<std::string> comments;  // leading "# ..." lines without the marker
    CsvRow header;
    std::vector<CsvRow> rows;
};

/// Writes comment lines, the header and the rows with '\n' endings. Throws std::runtime_error
/// naming the path on I/O failure.
void write_csv(const std::filesystem::path& path, const CsvDocument& doc);

/// Strict reader: the header must equal `expected_header` and every row must have exactly as
/// many fields. Only leading lines may be comments. Throws std::runtime_error on violations.
CsvDocument read_csv(const std::filesystem::path& path, const CsvRow& expected_header);

/// Rows (time, component_index, value) for every index and component of a series.
std::vector<CsvRow> payoff_rows(const PayoffSeries& series);

/// Inverse of payoff_rows; throws std::runtime_error on gaps or inconsistent times.
PayoffSeries parse_payoff_rows(const std::vector<CsvRow>& rows, int level = 0);

inline const CsvRow kPayoffHeader{"time", "component_index", "value"};
inline const CsvRow kLevelsHeader{"level", "dt", "n_samples", "V_level", "eps_level", "particle_steps"};
inline const CsvRow kSummaryHeader{"eps", "L", "total_particle_steps", "wall_seconds",
                                   "sampling_error_estimate"};

struct RunCsvOptions {
    double wall_seconds = 0.0;
};

/// payoff.csv, levels.csv and summary.csv for one run.
void emit_run_csv(const RunResult& result, const std::filesystem::path& dir,
                  const RunCsvOptions& options = {});

}  // namespace mfmlmc
