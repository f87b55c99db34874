#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "peakdec/evaluate.hpp"
#include "peakdec/format.hpp"
#include "peakdec/report.hpp"

using namespace peakdec;
using Catch::Matchers::ContainsSubstring;

namespace {

DatasetEvaluation make_row(std::string dataset, std::string method,
                           const std::array<double, 6>& means,
                           const std::array<double, 6>& stds = {}) {
    DatasetEvaluation e;
    e.dataset = std::move(dataset);
    e.method = std::move(method);
    Aggregate* slots[6] = {&e.mse, &e.snr, &e.tsnr, &e.nmae_h, &e.nmae_a, &e.nmae_l};
    for (std::size_t i = 0; i < 6; ++i) {
        slots[i]->mean = means[i];
        slots[i]->std = stds[i];
    }
    return e;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("decimal formatting round-trips doubles exactly") {
    for (const double v : {1.0 / 3.0, 0.1, -2.5e-17, 1e300, 0.0}) {
        REQUIRE(f64_parse(f64_string(v)) == v);
    }
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE(f64_parse(f64_string(inf)) == inf);
    REQUIRE_THROWS_AS(f64_parse("abc"), io_error);
    REQUIRE_THROWS_AS(f64_parse("1.5x"), io_error);
    REQUIRE_THROWS_AS(f64_parse(""), io_error);
}

TEST_CASE("metric CSV writer and loader round-trip every value exactly") {
    testsup::TempDir tmp("report-roundtrip");
    const std::array<double, 6> means{0.25, 14.5, 1.0 / 3.0, 0.03125, 0.0625, 0.125};
    const std::array<double, 6> stds{0.5, 1.5, 2.5, 0.75, 0.25, 1e-17};
    const auto csv = tmp.path / "metrics_demo_ista.csv";
    write_metrics_csv(csv, {make_row("demo", "ista", means, stds)});

    const std::vector<MetricRow> rows = load_metric_csv(csv);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].dataset == "demo");
    REQUIRE(rows[0].method == "ista");
    for (std::size_t i = 0; i < 6; ++i) {
        REQUIRE(rows[0].values[2 * i] == means[i]);
        REQUIRE(rows[0].values[2 * i + 1] == stds[i]);
    }
}

TEST_CASE("metric CSV loader accepts CRLF line endings") {
    testsup::TempDir tmp("report-crlf");
    const auto csv = tmp.path / "metrics.csv";
    write_text(csv, std::string(kMetricsCsvHeader) +
                        "\r\nd,m,1,0,2,0,3,0,0.5,0,0.25,0,0.125,0\r\n\r\n");
    const std::vector<MetricRow> rows = load_metric_csv(csv);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].values[0] == 1.0);
    REQUIRE(rows[0].values[10] == 0.125);
}

TEST_CASE("metric CSV loader rejects bad files") {
    testsup::TempDir tmp("report-badcsv");
    const auto missing = tmp.path / "nope.csv";
    REQUIRE_THROWS_AS(load_metric_csv(missing), io_error);

    const auto empty = tmp.path / "empty.csv";
    write_text(empty, "");
    REQUIRE_THROWS_AS(load_metric_csv(empty), io_error);

    const auto badheader = tmp.path / "badheader.csv";
    write_text(badheader, "a,b,c\n1,2,3\n");
    REQUIRE_THROWS_AS(load_metric_csv(badheader), io_error);

    const auto shortrow = tmp.path / "shortrow.csv";
    write_text(shortrow, std::string(kMetricsCsvHeader) + "\nd,m,1,2,3\n");
    REQUIRE_THROWS_AS(load_metric_csv(shortrow), io_error);

    const auto badvalue = tmp.path / "badvalue.csv";
    write_text(badvalue,
               std::string(kMetricsCsvHeader) + "\nd,m,x,0,2,0,3,0,4,0,5,0,6,0\n");
    REQUIRE_THROWS_AS(load_metric_csv(badvalue), io_error);
}

TEST_CASE("directory scan keeps only canonical metric CSVs, sorted by name") {
    testsup::TempDir tmp("report-scan");
    write_metrics_csv(tmp.path / "metrics_b.csv", {make_row("d", "pd", {2, 0, 0, 0, 0, 0})});
    write_metrics_csv(tmp.path / "metrics_a.csv", {make_row("d", "ista", {1, 0, 0, 0, 0, 0})});
    // distractors: different header, wrong extension, binary junk
    write_text(tmp.path / "scatter.csv", "peak_id,true_h,est_h,overlap_ratio,overlap_class\n");
    write_text(tmp.path / "notes.txt", std::string(kMetricsCsvHeader) + "\nd,m,...\n");
    write_text(tmp.path / "junk.csv", "\x01\x02\x03");

    const std::vector<MetricRow> rows = load_metric_rows(tmp.path);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].method == "ista");  // metrics_a.csv sorts first
    REQUIRE(rows[1].method == "pd");
}

TEST_CASE("directory scan failure modes") {
    testsup::TempDir tmp("report-scanfail");
    REQUIRE_THROWS_AS(load_metric_rows(tmp.path / "does-not-exist"), io_error);
    // a directory with no recognizable rows
    REQUIRE_THROWS_AS(load_metric_rows(tmp.path), io_error);
    // a header-only CSV still yields zero rows
    write_text(tmp.path / "headeronly.csv", std::string(kMetricsCsvHeader) + "\n");
    REQUIRE_THROWS_AS(load_metric_rows(tmp.path), io_error);
    // a malformed row inside an otherwise valid file propagates
    write_text(tmp.path / "broken.csv", std::string(kMetricsCsvHeader) + "\nd,m,1\n");
    REQUIRE_THROWS_AS(load_metric_rows(tmp.path), io_error);
}

TEST_CASE("a single-method table bolds every column") {
    MetricRow r;
    r.dataset = "solo";
    r.method = "hq";
    for (std::size_t i = 0; i < 12; ++i) r.values[i] = static_cast<double>(i);
    const std::string md = render_report({r});
    REQUIRE_THAT(md, ContainsSubstring("## solo"));
    REQUIRE_THAT(md, ContainsSubstring("| hq | **0 ± 1** | **2 ± 3** | **4 ± 5** |"
                                       " **6 ± 7** | **8 ± 9** | **10 ± 11** |"));
}

TEST_CASE("best method per column is bolded with the right direction") {
    // lower is better for mse and the morphology errors, higher for snr/tsnr
    std::vector<MetricRow> rows;
    const auto push = [&](const char* method, std::array<double, 6> means) {
        MetricRow r;
        r.dataset = "demo";
        r.method = method;
        for (std::size_t i = 0; i < 6; ++i) r.values[2 * i] = means[i];
        rows.push_back(r);
    };
    push("gamma", {0.3, 15, 20, 0.3, 0.2, 0.1});  // wins all three nmae columns
    push("alpha", {0.1, 10, 12, 0.5, 0.5, 0.5});  // wins mse
    push("beta", {0.2, 20, 25, 0.4, 0.6, 0.6});   // wins snr and tsnr

    const std::string md = render_report(rows);
    REQUIRE_THAT(md, ContainsSubstring(
        "| alpha | **0.1 ± 0** | 10 ± 0 | 12 ± 0 | 0.5 ± 0 | 0.5 ± 0 | 0.5 ± 0 |"));
    REQUIRE_THAT(md, ContainsSubstring(
        "| beta | 0.2 ± 0 | **20 ± 0** | **25 ± 0** | 0.4 ± 0 | 0.6 ± 0 | 0.6 ± 0 |"));
    REQUIRE_THAT(md, ContainsSubstring(
        "| gamma | 0.3 ± 0 | 15 ± 0 | 20 ± 0 | **0.3 ± 0** | **0.2 ± 0** | **0.1 ± 0** |"));
}

TEST_CASE("ties bold the lexicographically smallest method") {
    std::vector<MetricRow> rows(2);
    rows[0].dataset = rows[1].dataset = "tie";
    rows[0].method = "m2";  // input order should not matter
    rows[1].method = "m1";
    for (std::size_t i = 0; i < 12; ++i) rows[0].values[i] = rows[1].values[i] = 1.0;
    const std::string md = render_report(rows);

    std::string m1_line, m2_line;
    std::istringstream ss(md);
    for (std::string line; std::getline(ss, line);) {
        if (line.rfind("| m1 |", 0) == 0) m1_line = line;
        if (line.rfind("| m2 |", 0) == 0) m2_line = line;
    }
    REQUIRE_FALSE(m1_line.empty());
    REQUIRE_FALSE(m2_line.empty());
    REQUIRE(m1_line.find("**") != std::string::npos);
    REQUIRE(m2_line.find("**") == std::string::npos);
    // m1 is rendered before m2 despite the input order
    REQUIRE(md.find("| m1 |") < md.find("| m2 |"));
}

TEST_CASE("datasets render as separate sorted sections with independent winners") {
    std::vector<MetricRow> rows;
    const auto push = [&](const char* ds, const char* method, double msev) {
        MetricRow r;
        r.dataset = ds;
        r.method = method;
        r.values[0] = msev;
        rows.push_back(r);
    };
    push("d1", "ista", 0.5);
    push("d0", "ista", 0.9);
    push("d0", "pd", 0.1);
    push("d1", "pd", 0.7);
    const std::string md = render_report(rows);
    REQUIRE(md.find("## d0") < md.find("## d1"));
    // pd wins mse on d0, ista wins on d1
    const std::size_t d0 = md.find("## d0"), d1 = md.find("## d1");
    const std::string sec0 = md.substr(d0, d1 - d0), sec1 = md.substr(d1);
    REQUIRE_THAT(sec0, ContainsSubstring("| pd | **0.1 ± 0**"));
    REQUIRE_THAT(sec0, ContainsSubstring("| ista | 0.9 ± 0"));
    REQUIRE_THAT(sec1, ContainsSubstring("| ista | **0.5 ± 0**"));
    REQUIRE_THAT(sec1, ContainsSubstring("| pd | 0.7 ± 0"));
}

TEST_CASE("end-to-end report build from a results directory") {
    testsup::TempDir tmp("report-e2e");
    write_metrics_csv(tmp.path / "metrics_demo_ista.csv",
                      {make_row("demo", "ista", {0.2, 8, 9, 0.4, 0.3, 0.2})});
    write_metrics_csv(tmp.path / "metrics_demo_u-hq.csv",
                      {make_row("demo", "u-hq", {0.1, 11, 13, 0.2, 0.2, 0.1})});
    const std::string md = build_report(tmp.path);
    REQUIRE_THAT(md, ContainsSubstring("# Restoration metrics"));
    REQUIRE_THAT(md, ContainsSubstring("## demo"));
    REQUIRE_THAT(md, ContainsSubstring("| ista |"));
    REQUIRE_THAT(md, ContainsSubstring("| u-hq |"));
    // u-hq wins every column here
    REQUIRE_THAT(md, ContainsSubstring("| u-hq | **0.1 ± 0** | **11 ± 0** | **13 ± 0** |"
                                       " **0.2 ± 0** | **0.2 ± 0** | **0.1 ± 0** |"));
}
