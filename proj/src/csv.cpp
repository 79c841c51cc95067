#include "mfmlmc/csv.hpp"

#include "mfmlmc/errors.hpp"
#include "mfmlmc/format.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfmlmc {

namespace {

std::string join(const CsvRow& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i != 0) line += ',';
        line += row[i];
    }
    return line;
}

CsvRow split(const std::string& line) {
    CsvRow fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvDocument& doc) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& c : doc.comments) out << "# " << c << '\n';
    out << join(doc.header) << '\n';
    for (const auto& row : doc.rows) {
        if (row.size() != doc.header.size()) {
            throw ContractError("write_csv: row width does not match header in " + path.string());
        }
        out << join(row) << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

CsvDocument read_csv(const std::filesystem::path& path, const CsvRow& expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvDocument doc;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!line.empty() && line.back() == '\r') {
            throw std::runtime_error(where + ": carriage return in line ending");
        }
        if (!have_header) {
            if (line.rfind("# ", 0) == 0) {
                doc.comments.push_back(line.substr(2));
                continue;
            }
            doc.header = split(line);
            if (doc.header != expected_header) {
                throw std::runtime_error(where + ": unexpected header '" + line + "'");
            }
            have_header = true;
            continue;
        }
        CsvRow row = split(line);
        if (row.size() != expected_header.size()) {
            throw std::runtime_error(where + ": expected " + std::to_string(expected_header.size()) +
                                     " fields, got " + std::to_string(row.size()));
        }
        doc.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::runtime_error(path.string() + ": missing header");
    return doc;
}

std::vector<CsvRow> payoff_rows(const PayoffSeries& series) {
    std::vector<CsvRow> rows;
    rows.reserve(series.values.size());
    for (std::size_t n = 0; n < series.points(); ++n) {
        const std::string t = format_double(static_cast<double>(n) * series.dt);
        const auto v = series.at(n);
        for (std::size_t k = 0; k < series.dim; ++k) {
            rows.push_back({t, std::to_string(k), format_double(v[k])});
        }
    }
    return rows;
}

PayoffSeries parse_payoff_rows(const std::vector<CsvRow>& rows, int level) {
    if (rows.empty()) throw std::runtime_error("payoff table is empty");
    std::size_t dim = 0;
    while (dim < rows.size() && rows[dim][0] == rows[0][0]) ++dim;
    if (rows.size() % dim != 0) throw std::runtime_error("payoff table is ragged");
    const std::size_t points = rows.size() / dim;
    const double dt = points > 1 ? parse_double(rows[dim][0]) : 0.0;
    PayoffSeries series(level, dt, dim, points);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t n = r / dim;
        const std::size_t k = r % dim;
        if (static_cast<std::size_t>(parse_integer(rows[r][1])) != k ||
            rows[r][0] != rows[n * dim][0]) {
            throw std::runtime_error("payoff table row " + std::to_string(r + 1) + " out of order");
        }
        series.values[r] = parse_double(rows[r][2]);
    }
    return series;
}

void emit_run_csv(const RunResult& result, const std::filesystem::path& dir,
                  const RunCsvOptions& options) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());

    write_csv(dir / "payoff.csv", {{}, kPayoffHeader, payoff_rows(result.final_payoff_series)});

    CsvDocument levels{{}, kLevelsHeader, {}};
    for (const auto& l : result.levels) {
        levels.rows.push_back({std::to_string(l.level), format_double(l.dt),
                               std::to_string(l.n_samples), format_double(l.level_variance),
                               format_double(l.level_diff), std::to_string(l.particle_steps)});
    }
    write_csv(dir / "levels.csv", levels);

    CsvDocument summary{{}, kSummaryHeader, {}};
    summary.rows.push_back({format_double(result.epsilon), std::to_string(result.levels_used),
                            std::to_string(result.total_particle_steps),
                            format_double(options.wall_seconds),
                            format_double(sampling_error_estimate(result.levels))});
    write_csv(dir / "summary.csv", summary);
}

}  // namespace mfmlmc
