#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "peakdec/errors.hpp"

namespace peakdec {

// Asymmetric peak shape on an integer sample grid. For a > 0 the shape is
// defined only for x > m - sigma_f/a and is right-skewed; a = 0 gives the
// symmetric Gaussian limit.
struct KernelSpec {
    double sigma_f = 0.5;     // peak width, grid units
    double a = 0.2;           // asymmetry coefficient, >= 0
    double m = 0.0;           // peak location, grid units
    double trunc_eps = 1e-4;  // relative amplitude at which sampling stops

    void validate() const {
        if (!(sigma_f > 0.0)) throw config_error("kernel: sigma_f must be positive");
        if (!(a >= 0.0)) throw config_error("kernel: asymmetry a must be nonnegative");
        if (!(trunc_eps > 0.0 && trunc_eps < 1.0)) throw config_error("kernel: trunc_eps must lie in (0,1)");
    }
};

// Peak-normalized taps on consecutive grid points starting at `offset`.
struct SampledKernel {
    std::vector<double> taps;
    std::int64_t offset = 0;       // grid position of taps[0]
    std::size_t peak_index = 0;    // index of the unit tap

    std::int64_t peak_position() const { return offset + static_cast<std::int64_t>(peak_index); }
    double tap_sum() const {
        double s = 0.0;
        for (double t : taps) s += t;
        return s;
    }
};

// Shape value at a real coordinate, normalized to sup 1 at x = m.
// Outside the admissible domain the value is 0. Asymmetry below 1e-8 is
// evaluated in the Gaussian limit to avoid 1/a^2 blowup.
inline double kernel_value(const KernelSpec& spec, double x) {
    const double t = x - spec.m;
    if (spec.a < 1e-8) {
        return std::exp(-(t * t) / (2.0 * spec.sigma_f * spec.sigma_f));
    }
    const double u = spec.a * t / spec.sigma_f;
    if (u <= -1.0) return 0.0; // at or beyond the domain boundary
    const double l = std::log1p(u);
    return std::exp(-(l * l) / (2.0 * spec.a * spec.a));
}

// Samples the shape at integer grid points around the peak.
//
// Taps extend on each side until the amplitude drops to trunc_eps of the
// maximum (the first at-or-below-threshold tap is kept as the end tap). The
// sampling window is sized from the analytic threshold crossing — the
// amplitude falls to trunc_eps at sigma_f*sqrt(2*ln(1/eps)) in the symmetric
// limit and at (sigma_f/a)*(exp(±a*sqrt(2*ln(1/eps))) - 1) on the right/left
// for a > 0 — so asymmetric tails are never cut early. For a > 0 the left
// side is additionally bounded by the domain wall x > m - sigma_f/a. The
// result is rescaled to unit maximum.
inline SampledKernel sample_kernel(const KernelSpec& spec) {
    spec.validate();

    const double depth = std::sqrt(2.0 * std::log(1.0 / spec.trunc_eps));
    double reach_l = spec.sigma_f * depth;
    double reach_r = reach_l;
    if (spec.a >= 1e-8) {
        reach_r = spec.sigma_f / spec.a * std::expm1(spec.a * depth);
        reach_l = spec.sigma_f / spec.a * -std::expm1(-spec.a * depth);
    }
    if (!(reach_r <= 65536.0 && reach_l <= 65536.0))
        throw numeric_error("kernel: support exceeds 65536 grid units per side");
    std::int64_t lo = static_cast<std::int64_t>(std::ceil(spec.m - reach_l - 2.0));
    std::int64_t hi = static_cast<std::int64_t>(std::floor(spec.m + reach_r + 2.0));
    if (spec.a >= 1e-8) {
        const double bound = spec.m - spec.sigma_f / spec.a; // strict lower bound
        const std::int64_t lo_domain = static_cast<std::int64_t>(std::floor(bound)) + 1;
        lo = std::max(lo, lo_domain);
    }
    if (hi < lo) hi = lo; // degenerate widths still yield one tap

    std::vector<double> raw;
    raw.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t x = lo; x <= hi; ++x) raw.push_back(kernel_value(spec, static_cast<double>(x)));

    std::size_t imax = 0;
    for (std::size_t i = 1; i < raw.size(); ++i)
        if (raw[i] > raw[imax]) imax = i;
    const double max_raw = raw[imax];
    if (!(max_raw > 0.0)) throw numeric_error("kernel: all sampled taps are zero");
    const double thr = spec.trunc_eps * max_raw;

    std::size_t l = imax;
    while (l > 0 && raw[l - 1] > thr) --l;
    if (l > 0) --l;
    std::size_t r = imax;
    while (r + 1 < raw.size() && raw[r + 1] > thr) ++r;
    if (r + 1 < raw.size()) ++r;

    SampledKernel k;
    k.taps.assign(raw.begin() + static_cast<std::ptrdiff_t>(l), raw.begin() + static_cast<std::ptrdiff_t>(r) + 1);
    for (double& t : k.taps) t /= max_raw;
    k.offset = lo + static_cast<std::int64_t>(l);
    k.peak_index = imax - l;
    return k;
}

// Unit-sum Gaussian blur taps of width sigma_g, truncated at relative
// amplitude 1e-4. A width small enough that every off-center tap falls below
// the cutoff yields the single-tap identity.
inline SampledKernel gaussian_blur_taps(double sigma_g) {
    if (!(sigma_g > 0.0)) throw config_error("blur: sigma_g must be positive");
    const double cutoff = 1e-4;
    const auto radius =
        static_cast<std::int64_t>(std::floor(sigma_g * std::sqrt(2.0 * std::log(1.0 / cutoff))));

    SampledKernel k;
    k.taps.resize(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::int64_t j = -radius; j <= radius; ++j) {
        const double v = std::exp(-static_cast<double>(j * j) / (2.0 * sigma_g * sigma_g));
        k.taps[static_cast<std::size_t>(j + radius)] = v;
        sum += v;
    }
    for (double& t : k.taps) t /= sum;
    k.offset = -radius;
    k.peak_index = static_cast<std::size_t>(radius);
    return k;
}

} // namespace peakdec
