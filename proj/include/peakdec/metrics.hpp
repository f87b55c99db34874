#pragma once
// Restoration quality metrics.  Whole-signal scores (MSE, SNR, and a
// support-restricted TSNR) plus per-peak morphology: height, area, and
// location read off each peak's support window, aggregated as normalized
// mean absolute errors, with an overlap ratio that classifies peaks as
// isolated or overlapped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "peakdec/errors.hpp"
#include "peakdec/kernel.hpp"
#include "peakdec/simulate.hpp"

namespace peakdec {

struct MetricOptions {
    double theta = 0.05;             // support membership: contribution > theta * height
    double overlap_threshold = 0.30; // overlap ratio above which a peak counts as overlapped
    bool literal_tsnr = false;       // 20*log10 of the energy ratio instead of 10*log10
};

// ------------------------------------------------------------ signal metrics

inline double mse(std::span<const double> p, std::span<const double> phat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - phat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(p.size());
}

// 20 log10(||p|| / ||p - phat||), +infinity for an exact restoration.
inline double snr_db(std::span<const double> p, std::span<const double> phat) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - phat[i];
        num += p[i] * p[i];
        den += d * d;
    }
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(num / den);
}

// ------------------------------------------------------------- peak supports

struct PeakSupport {
    bool empty = true;
    std::size_t lo = 1, hi = 0;  // inclusive tap range, clipped to the grid
    double overlap = 0.0;        // |S_j intersect union of others| / |S_j|
};

// Support of each spike: the contiguous taps around its kernel center whose
// isolated contribution amplitude * tap exceeds theta times the isolated
// height, clipped to [0, n).  Overlap ratios are filled in a second pass.
inline std::vector<PeakSupport> extract_supports(const SampledKernel& kernel,
                                                 const std::vector<Peak>& peaks, std::size_t n,
                                                 double theta = 0.05) {
    std::vector<PeakSupport> out(peaks.size());
    std::vector<std::uint32_t> coverage(n, 0);
    const std::size_t center = kernel.peak_index;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
        const double amp = peaks[j].amplitude;
        const double height = amp * kernel.taps[center];
        const double thr = theta * height;
        if (!(amp * kernel.taps[center] > thr)) continue;  // zero-amplitude spike
        std::size_t lo_rel = center, hi_rel = center;
        while (lo_rel > 0 && amp * kernel.taps[lo_rel - 1] > thr) --lo_rel;
        while (hi_rel + 1 < kernel.taps.size() && amp * kernel.taps[hi_rel + 1] > thr) ++hi_rel;
        const std::int64_t base = static_cast<std::int64_t>(peaks[j].position) + kernel.offset;
        const std::int64_t glo = base + static_cast<std::int64_t>(lo_rel);
        const std::int64_t ghi = base + static_cast<std::int64_t>(hi_rel);
        const std::int64_t clo = std::max<std::int64_t>(glo, 0);
        const std::int64_t chi = std::min<std::int64_t>(ghi, static_cast<std::int64_t>(n) - 1);
        if (clo > chi) continue;  // support fell entirely off the grid
        out[j].empty = false;
        out[j].lo = static_cast<std::size_t>(clo);
        out[j].hi = static_cast<std::size_t>(chi);
        for (std::size_t i = out[j].lo; i <= out[j].hi; ++i) ++coverage[i];
    }
    for (PeakSupport& s : out) {
        if (s.empty) continue;
        std::size_t shared = 0;
        for (std::size_t i = s.lo; i <= s.hi; ++i) shared += coverage[i] >= 2;
        s.overlap = static_cast<double>(shared) / static_cast<double>(s.hi - s.lo + 1);
    }
    return out;
}

// Support-restricted SNR over the union of the peak supports.  The default is
// 10*log10 of the energy ratio (identical to snr_db when the union covers the
// whole grid); the literal variant doubles the decibel scale.
inline double tsnr_db(std::span<const double> p, std::span<const double> phat,
                      const std::vector<PeakSupport>& supports, bool literal = false) {
    std::vector<char> member(p.size(), 0);
    for (const PeakSupport& s : supports) {
        if (s.empty) continue;
        for (std::size_t i = s.lo; i <= s.hi; ++i) member[i] = 1;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!member[i]) continue;
        const double d = p[i] - phat[i];
        num += p[i] * p[i];
        den += d * d;
    }
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return (literal ? 20.0 : 10.0) * std::log10(num / den);
}

// --------------------------------------------------------- height/area/location

struct Hal {
    double height = 0.0;
    double area = 0.0;
    std::size_t location = 0;  // grid index of the window maximum
};

// Trapezoid area of unit-spaced samples; a single sample has zero area.
inline double trapezoid(std::span<const double> v) {
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) area += 0.5 * (v[i] + v[i + 1]);
    return area;
}

// Height / area / location read off a support window.  Ties in the maximum
// resolve to the smallest index.  Shared by the truth and estimate paths so
// a perfect restoration reproduces the truth values exactly.
inline Hal hal_from_window(std::span<const double> v, std::size_t lo) {
    if (v.empty()) throw config_error("hal_from_window: empty window");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[arg]) arg = i;
    }
    Hal h;
    h.height = v[arg];
    h.location = lo + arg;
    h.area = trapezoid(v);
    return h;
}

// Isolated contribution of one spike on its support window.
inline std::vector<double> isolated_window(const SampledKernel& kernel, const Peak& peak,
                                           const PeakSupport& s) {
    std::vector<double> v(s.hi - s.lo + 1);
    const std::int64_t base = static_cast<std::int64_t>(peak.position) + kernel.offset;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::int64_t rel = static_cast<std::int64_t>(s.lo + i) - base;
        v[i] = peak.amplitude * kernel.taps[static_cast<std::size_t>(rel)];
    }
    return v;
}

inline Hal truth_hal(const SampledKernel& kernel, const Peak& peak, const PeakSupport& s) {
    const std::vector<double> v = isolated_window(kernel, peak, s);
    return hal_from_window(v, s.lo);
}

inline Hal estimate_hal(std::span<const double> phat, const PeakSupport& s) {
    return hal_from_window(phat.subspan(s.lo, s.hi - s.lo + 1), s.lo);
}

// Normalized mean absolute error: sum |t - e| / sum |t|.
inline double nmae(std::span<const double> truth, std::span<const double> est) {
    if (truth.size() != est.size()) throw config_error("nmae: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        num += std::abs(truth[i] - est[i]);
        den += std::abs(truth[i]);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

// --------------------------------------------------------- per-record rollup

struct RecordMetrics {
    double mse = 0.0;
    double snr = 0.0;
    double tsnr = 0.0;
    double nmae_h = 0.0;
    double nmae_a = 0.0;
    double nmae_l = 0.0;
};

struct PeakReport {
    std::uint32_t position = 0;
    double true_h = 0.0, true_a = 0.0;
    double est_h = 0.0, est_a = 0.0;
    std::size_t true_l = 0, est_l = 0;
    double overlap = 0.0;
    bool overlapped = false;
};

struct RecordEvaluation {
    RecordMetrics metrics;
    std::vector<PeakReport> peaks;
};

// Scores one restored peak signal phat against the record's ground truth.
inline RecordEvaluation evaluate_record(const SampledKernel& kernel, const SignalTriple& rec,
                                        std::span<const double> phat,
                                        const MetricOptions& opt = {}) {
    if (phat.size() != rec.p.size()) throw config_error("evaluate_record: length mismatch");
    RecordEvaluation ev;
    const std::vector<PeakSupport> supports =
        extract_supports(kernel, rec.peaks, rec.p.size(), opt.theta);
    ev.metrics.mse = mse(rec.p, phat);
    ev.metrics.snr = snr_db(rec.p, phat);
    ev.metrics.tsnr = tsnr_db(rec.p, phat, supports, opt.literal_tsnr);

    std::vector<double> th, ta, tl, eh, ea, el;
    for (std::size_t j = 0; j < rec.peaks.size(); ++j) {
        if (supports[j].empty) continue;
        const Hal t = truth_hal(kernel, rec.peaks[j], supports[j]);
        const Hal e = estimate_hal(phat, supports[j]);
        th.push_back(t.height);
        ta.push_back(t.area);
        tl.push_back(static_cast<double>(t.location));
        eh.push_back(e.height);
        ea.push_back(e.area);
        el.push_back(static_cast<double>(e.location));
        PeakReport pr;
        pr.position = rec.peaks[j].position;
        pr.true_h = t.height;
        pr.true_a = t.area;
        pr.true_l = t.location;
        pr.est_h = e.height;
        pr.est_a = e.area;
        pr.est_l = e.location;
        pr.overlap = supports[j].overlap;
        pr.overlapped = supports[j].overlap > opt.overlap_threshold;
        ev.peaks.push_back(pr);
    }
    ev.metrics.nmae_h = nmae(th, eh);
    ev.metrics.nmae_a = nmae(ta, ea);
    ev.metrics.nmae_l = nmae(tl, el);
    return ev;
}

// ---------------------------------------------------------------- aggregation

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (N - 1); zero when N < 2
};

inline Aggregate aggregate(std::span<const double> v) {
    if (v.empty()) throw config_error("aggregate: empty sample");
    Aggregate a;
    for (const double x : v) a.mean += x;
    a.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double acc = 0.0;
        for (const double x : v) {
            const double d = x - a.mean;
            acc += d * d;
        }
        a.std = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
    return a;
}

}  // namespace peakdec
