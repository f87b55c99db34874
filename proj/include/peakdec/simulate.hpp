#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "peakdec/errors.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/rng.hpp"

namespace peakdec {

struct Peak {
    std::uint32_t position = 0;
    double amplitude = 0.0;
};

// One ground-truth/observation record: sparse spike train s, clean peak
// signal p = pi * s, and degraded observation z = G p + e.
struct SignalTriple {
    std::vector<double> s;
    std::vector<double> p;
    std::vector<double> z;
    std::vector<Peak> peaks; // sorted by position
};

// Draws P spike positions by rejection sampling (uniform over the grid,
// pairwise distance >= d_min), then amplitudes as |N(0,1)| in sorted-position
// order. The draw budget is 1000*P position draws.
inline std::pair<std::vector<double>, std::vector<Peak>> generate_spike_train(std::size_t n, std::size_t P,
                                                                              std::size_t d_min, Rng& rng) {
    if (P == 0) throw config_error("spike train: need at least one spike");
    if (d_min == 0) throw config_error("spike train: d_min must be >= 1");
    if (P * d_min > n) throw config_error("spike train: P*d_min exceeds signal length");

    std::vector<std::uint32_t> positions;
    positions.reserve(P);
    const std::size_t budget = 1000 * P;
    std::size_t draws = 0;
    while (positions.size() < P) {
        if (draws >= budget)
            throw numeric_error("spike train: placement failed after " + std::to_string(budget) + " draws");
        ++draws;
        const auto cand = static_cast<std::uint32_t>(rng.next_below(n));
        bool ok = true;
        for (std::uint32_t q : positions) {
            const std::uint32_t d = cand > q ? cand - q : q - cand;
            if (d < d_min) {
                ok = false;
                break;
            }
        }
        if (ok) positions.push_back(cand);
    }
    std::sort(positions.begin(), positions.end());

    std::vector<double> s(n, 0.0);
    std::vector<Peak> peaks(P);
    for (std::size_t j = 0; j < P; ++j) {
        const double amp = std::abs(rng.next_normal());
        peaks[j] = Peak{positions[j], amp};
        s[positions[j]] = amp;
    }
    return {std::move(s), std::move(peaks)};
}

// z = G p + e with i.i.d. zero-mean Gaussian noise of std sigma_e.
inline std::vector<double> degrade(std::span<const double> p, const ConvolutionOperator& blur,
                                   double sigma_e, Rng& rng) {
    if (!(sigma_e >= 0.0)) throw config_error("degrade: sigma_e must be nonnegative");
    std::vector<double> z(p.size());
    blur.apply(p, z);
    if (sigma_e > 0.0)
        for (double& v : z) v += sigma_e * rng.next_normal();
    return z;
}

// Draw order within a record's substream: positions, amplitudes, noise.
inline SignalTriple make_record(const ComposedForwardModel& fm, std::size_t P, std::size_t d_min,
                                double sigma_e, Rng& rng) {
    SignalTriple rec;
    auto [s, peaks] = generate_spike_train(fm.dim_in(), P, d_min, rng);
    rec.s = std::move(s);
    rec.peaks = std::move(peaks);
    rec.p = fm.apply_kernel(rec.s);

    rec.z.resize(rec.p.size());
    fm.apply_blur(rec.p, rec.z);
    if (sigma_e > 0.0)
        for (double& v : rec.z) v += sigma_e * rng.next_normal();
    return rec;
}

} // namespace peakdec
