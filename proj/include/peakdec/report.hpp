#pragma once
// Report generation: merge metric CSVs from a results directory into a single
// markdown summary, grouped by dataset, with the best method per column
// highlighted.  Lower is better for MSE and the NMAE columns, higher is
// better for SNR and TSNR; ties resolve to the lexicographically smallest
// method name so the marking is deterministic.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "peakdec/errors.hpp"
#include "peakdec/evaluate.hpp"
#include "peakdec/format.hpp"

namespace peakdec {

struct MetricRow {
    std::string dataset;
    std::string method;
    std::array<double, 12> values{};  // mean/std pairs in canonical column order
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string f64_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

// Parses one metric CSV written by write_metrics_csv.
inline std::vector<MetricRow> load_metric_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open metrics CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty metrics CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsCsvHeader)
        throw io_error("unrecognized metrics CSV header in " + path.string());
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> f = detail::split_csv_line(line);
        if (f.size() != 14)
            throw io_error("malformed metrics CSV row in " + path.string() + ": " + line);
        MetricRow r;
        r.dataset = f[0];
        r.method = f[1];
        for (std::size_t i = 0; i < 12; ++i) r.values[i] = f64_parse(f[i + 2]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// Loads every metric CSV found directly in `dir` (sorted by filename).
inline std::vector<MetricRow> load_metric_rows(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw io_error("results directory does not exist: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            std::ifstream probe(entry.path(), std::ios::binary);
            std::string first;
            if (probe && std::getline(probe, first)) {
                if (!first.empty() && first.back() == '\r') first.pop_back();
                if (first == kMetricsCsvHeader) files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<MetricRow> rows;
    for (const auto& f : files) {
        std::vector<MetricRow> part = load_metric_csv(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw io_error("no metric CSV rows found in " + dir.string());
    return rows;
}

// Renders the merged rows as markdown, one table per dataset, rows sorted by
// (dataset, method), best cell per column wrapped in ** **.
inline std::string render_report(std::vector<MetricRow> rows) {
    if (rows.empty()) throw io_error("report: no rows to render");
    std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        return a.method < b.method;
    });

    struct Column {
        const char* title;
        std::size_t mean;  // index of the mean within MetricRow::values
        bool higher_better;
    };
    constexpr std::array<Column, 6> columns{{{"mse", 0, false},
                                             {"snr (dB)", 2, true},
                                             {"tsnr (dB)", 4, true},
                                             {"nmae_h", 6, false},
                                             {"nmae_a", 8, false},
                                             {"nmae_l", 10, false}}};

    std::string md = "# Restoration metrics\n";
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].dataset == rows[i].dataset) ++j;
        md += "\n## " + rows[i].dataset + "\n\n";
        md += "| method |";
        for (const Column& c : columns) md += std::string(" ") + c.title + " |";
        md += "\n|---|";
        for (std::size_t c = 0; c < columns.size(); ++c) md += "---|";
        md += "\n";

        // Best row per column within this dataset group; ties go to the
        // lexicographically smallest method (guaranteed by the sort order and
        // strict comparison below).
        std::array<std::size_t, 6> best{};
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::size_t arg = i;
            for (std::size_t r = i + 1; r < j; ++r) {
                const double v = rows[r].values[columns[c].mean];
                const double b = rows[arg].values[columns[c].mean];
                if (columns[c].higher_better ? v > b : v < b) arg = r;
            }
            best[c] = arg;
        }
        for (std::size_t r = i; r < j; ++r) {
            md += "| " + rows[r].method + " |";
            for (std::size_t c = 0; c < columns.size(); ++c) {
                const double mean = rows[r].values[columns[c].mean];
                const double sd = rows[r].values[columns[c].mean + 1];
                std::string cell = detail::f64_short(mean) + " ± " + detail::f64_short(sd);
                if (best[c] == r) cell = "**" + cell + "**";
                md += " " + cell + " |";
            }
            md += "\n";
        }
        i = j;
    }
    return md;
}

inline std::string build_report(const std::filesystem::path& results_dir) {
    return render_report(load_metric_rows(results_dir));
}

}  // namespace peakdec
