#pragma once
// Dataset-level evaluation: run a restoration method over every record of a
// split, score each restoration, and aggregate to mean and sample standard
// deviation per metric.  Emits the canonical metric CSV, a per-peak scatter
// CSV, and an optional standalone SVG scatter plot.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "peakdec/checkpoint.hpp"
#include "peakdec/dataset.hpp"
#include "peakdec/errors.hpp"
#include "peakdec/format.hpp"
#include "peakdec/metrics.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/parallel.hpp"
#include "peakdec/solvers.hpp"
#include "peakdec/unrolled.hpp"

namespace peakdec {

enum class Method { oracle, zero, ista, pd, hq, u_ista, u_pd, u_hq };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::oracle: return "oracle";
        case Method::zero: return "zero";
        case Method::ista: return "ista";
        case Method::pd: return "pd";
        case Method::hq: return "hq";
        case Method::u_ista: return "u-ista";
        case Method::u_pd: return "u-pd";
        case Method::u_hq: return "u-hq";
    }
    throw config_error("unknown method");
}

inline Method parse_method(const std::string& name) {
    if (name == "oracle") return Method::oracle;
    if (name == "zero") return Method::zero;
    if (name == "ista") return Method::ista;
    if (name == "pd") return Method::pd;
    if (name == "hq") return Method::hq;
    if (name == "u-ista") return Method::u_ista;
    if (name == "u-pd") return Method::u_pd;
    if (name == "u-hq") return Method::u_hq;
    throw config_error("unknown method: " + name);
}

inline bool is_unrolled(Method m) {
    return m == Method::u_ista || m == Method::u_pd || m == Method::u_hq;
}

inline Variant method_variant(Method m) {
    switch (m) {
        case Method::u_ista: return Variant::ista;
        case Method::u_pd: return Variant::pd;
        case Method::u_hq: return Variant::hq;
        default: throw config_error("method has no unrolled variant");
    }
}

// Forward pass without tape recording, timed.
struct InferResult {
    std::vector<double> xhat;
    std::vector<double> phat;
    double seconds = 0.0;
};

inline InferResult infer(const UnrolledModel& model, const ComposedForwardModel& fm,
                         std::span<const double> z) {
    InferResult r;
    const auto t0 = std::chrono::steady_clock::now();
    r.xhat = unrolled_forward(model, fm, z);
    const auto t1 = std::chrono::steady_clock::now();
    r.phat = fm.apply_kernel(r.xhat);
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    return r;
}

struct EvalOptions {
    MetricOptions metrics;
    IstaConfig ista;  // classical ista settings
    PdConfig pd;      // rho == 0 resolves to sigma_e * sqrt(n) of the dataset
    HqConfig hq;      // classical half-quadratic settings
    std::size_t threads = 1;
};

struct ScatterRow {
    std::size_t peak_id = 0;  // sequential across the evaluated split
    double true_h = 0.0;
    double est_h = 0.0;
    double overlap = 0.0;
    bool overlapped = false;
};

struct DatasetEvaluation {
    std::string dataset;
    std::string method;
    Aggregate mse, snr, tsnr, nmae_h, nmae_a, nmae_l;
    double mean_solve_seconds = 0.0;  // diagnostics only; not part of the CSV
    std::vector<RecordEvaluation> records;
    std::vector<ScatterRow> scatter;
};

// Restores every record of `records` with `method` and scores the results.
// Unrolled methods require `model`; its variant must match.
inline DatasetEvaluation evaluate_dataset(const ComposedForwardModel& fm, const DatasetSpec& spec,
                                          const std::vector<SignalTriple>& records, Method method,
                                          const EvalOptions& opt = {},
                                          const UnrolledModel* model = nullptr) {
    if (records.empty()) throw config_error("evaluate: empty record set");
    if (is_unrolled(method)) {
        if (model == nullptr) throw config_error("evaluate: unrolled method needs a model");
        if (model->variant != method_variant(method))
            throw compat_error("evaluate: checkpoint variant does not match requested method");
    }
    IstaConfig icfg = opt.ista;
    PdConfig pcfg = opt.pd;
    if (pcfg.rho == 0.0) pcfg.rho = default_constraint_radius(spec.sigma_e, spec.n);
    HqConfig hcfg = opt.hq;
    const bool needs_norm = method == Method::ista || method == Method::pd;
    const double op_norm = needs_norm ? fm.operator_norm() : 0.0;

    std::vector<RecordEvaluation> evals(records.size());
    std::vector<double> seconds(records.size(), 0.0);
    parallel_for(records.size(), opt.threads, [&](std::size_t i) {
        const SignalTriple& rec = records[i];
        std::vector<double> xhat;
        const auto t0 = std::chrono::steady_clock::now();
        switch (method) {
            case Method::oracle: xhat = rec.s; break;
            case Method::zero: xhat.assign(fm.dim_in(), 0.0); break;
            case Method::ista: xhat = ista_solve(fm, rec.z, op_norm, icfg).x; break;
            case Method::pd: xhat = primal_dual_solve(fm, rec.z, op_norm, pcfg).x; break;
            case Method::hq: xhat = hq_solve(fm, rec.z, hcfg).x; break;
            case Method::u_ista:
            case Method::u_pd:
            case Method::u_hq: xhat = unrolled_forward(*model, fm, rec.z); break;
        }
        const auto t1 = std::chrono::steady_clock::now();
        seconds[i] = std::chrono::duration<double>(t1 - t0).count();
        const std::vector<double> phat = fm.apply_kernel(xhat);
        evals[i] = evaluate_record(fm.peak_kernel(), rec, phat, opt.metrics);
    });

    DatasetEvaluation out;
    out.dataset = spec.name;
    out.method = method_name(method);
    std::vector<double> vmse, vsnr, vtsnr, vh, va, vl;
    std::size_t peak_id = 0;
    double total_seconds = 0.0;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        const RecordMetrics& m = evals[i].metrics;
        vmse.push_back(m.mse);
        vsnr.push_back(m.snr);
        vtsnr.push_back(m.tsnr);
        vh.push_back(m.nmae_h);
        va.push_back(m.nmae_a);
        vl.push_back(m.nmae_l);
        for (const PeakReport& pr : evals[i].peaks) {
            ScatterRow row;
            row.peak_id = peak_id++;
            row.true_h = pr.true_h;
            row.est_h = pr.est_h;
            row.overlap = pr.overlap;
            row.overlapped = pr.overlapped;
            out.scatter.push_back(row);
        }
        total_seconds += seconds[i];
    }
    out.mse = aggregate(vmse);
    out.snr = aggregate(vsnr);
    out.tsnr = aggregate(vtsnr);
    out.nmae_h = aggregate(vh);
    out.nmae_a = aggregate(va);
    out.nmae_l = aggregate(vl);
    out.mean_solve_seconds = total_seconds / static_cast<double>(records.size());
    out.records = std::move(evals);
    return out;
}

// ----------------------------------------------------------------- CSV output

inline constexpr const char* kMetricsCsvHeader =
    "dataset,method,mse_mean,mse_std,snr_mean,snr_std,tsnr_mean,tsnr_std,"
    "nmae_h_mean,nmae_h_std,nmae_a_mean,nmae_a_std,nmae_l_mean,nmae_l_std";

inline void write_metrics_csv(std::ostream& os, const std::vector<DatasetEvaluation>& evals) {
    os << kMetricsCsvHeader << '\n';
    for (const DatasetEvaluation& e : evals) {
        os << e.dataset << ',' << e.method;
        for (const Aggregate* a : {&e.mse, &e.snr, &e.tsnr, &e.nmae_h, &e.nmae_a, &e.nmae_l})
            os << ',' << f64_string(a->mean) << ',' << f64_string(a->std);
        os << '\n';
    }
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<DatasetEvaluation>& evals) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open metrics CSV for writing: " + path.string());
    write_metrics_csv(out, evals);
    if (!out) throw io_error("failed writing metrics CSV: " + path.string());
}

inline void write_scatter_csv(std::ostream& os, const std::vector<ScatterRow>& rows) {
    os << "peak_id,true_h,est_h,overlap_ratio,overlap_class\n";
    for (const ScatterRow& r : rows) {
        os << r.peak_id << ',' << f64_string(r.true_h) << ',' << f64_string(r.est_h) << ','
           << f64_string(r.overlap) << ',' << (r.overlapped ? 1 : 0) << '\n';
    }
}

inline void write_scatter_csv(const std::filesystem::path& path,
                              const std::vector<ScatterRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open scatter CSV for writing: " + path.string());
    write_scatter_csv(out, rows);
    if (!out) throw io_error("failed writing scatter CSV: " + path.string());
}

// ----------------------------------------------------------------- SVG output

// Minimal standalone scatter plot of estimated versus true peak heights,
// colored by overlap class, with the identity diagonal for reference.
inline std::string scatter_svg(const std::vector<ScatterRow>& rows, const std::string& title) {
    constexpr double size = 640.0, margin = 60.0;
    double vmax = 1e-9;
    for (const ScatterRow& r : rows) {
        vmax = std::max(vmax, std::max(r.true_h, r.est_h));
    }
    vmax *= 1.05;
    const double plot = size - 2.0 * margin;
    const auto sx = [&](double v) { return margin + plot * v / vmax; };
    const auto sy = [&](double v) { return size - margin - plot * v / vmax; };
    char buf[256];
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"0 0 640 640\">\n";
    svg += "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#888\" "
                  "stroke-dasharray=\"4 3\"/>\n",
                  sx(0.0), sy(0.0), sx(vmax), sy(vmax));
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                  margin, size - margin, size - margin, size - margin);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                  margin, size - margin, margin, margin);
    svg += buf;
    for (const ScatterRow& r : rows) {
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" fill-opacity=\"0.6\"/>\n",
                      sx(r.true_h), sy(r.est_h), r.overlapped ? "#d62728" : "#1f77b4");
        svg += buf;
    }
    svg += "<text x=\"320\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" + title + "</text>\n";
    svg += "<text x=\"320\" y=\"620\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">true height</text>\n";
    svg += "<text x=\"20\" y=\"320\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\" transform=\"rotate(-90 20 320)\">estimated height</text>\n";
    svg += "<circle cx=\"480\" cy=\"70\" r=\"4\" fill=\"#1f77b4\"/>\n";
    svg += "<text x=\"490\" y=\"74\" font-family=\"sans-serif\" font-size=\"12\">overlap &lt;= "
           "30%</text>\n";
    svg += "<circle cx=\"480\" cy=\"90\" r=\"4\" fill=\"#d62728\"/>\n";
    svg += "<text x=\"490\" y=\"94\" font-family=\"sans-serif\" font-size=\"12\">overlap &gt; "
           "30%</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace peakdec
