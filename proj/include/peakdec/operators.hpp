#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "peakdec/errors.hpp"
#include "peakdec/kernel.hpp"
#include "peakdec/rng.hpp"
#include "peakdec/vecops.hpp"

namespace peakdec {

class LinearOperator {
public:
    virtual ~LinearOperator() = default;
    virtual std::size_t dim_in() const = 0;
    virtual std::size_t dim_out() const = 0;
    virtual void apply(std::span<const double> x, std::span<double> out) const = 0;
    virtual void apply_adjoint(std::span<const double> y, std::span<double> out) const = 0;

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> out(dim_out());
        apply(x, out);
        return out;
    }
    std::vector<double> apply_adjoint(std::span<const double> y) const {
        std::vector<double> out(dim_in());
        apply_adjoint(y, out);
        return out;
    }
};

// Zero-padded "same" convolution with a sampled kernel: taps[k] sits at grid
// position offset+k, out[i] = sum_k taps[k] * x[i - offset - k] with x taken
// as zero outside [0, n). The adjoint is the matching correlation.
class ConvolutionOperator final : public LinearOperator {
public:
    ConvolutionOperator(SampledKernel kernel, std::size_t n) : kernel_(std::move(kernel)), n_(n) {
        if (n_ == 0) throw config_error("convolution: signal length must be positive");
        if (kernel_.taps.empty()) throw config_error("convolution: empty kernel");
    }

    std::size_t dim_in() const override { return n_; }
    std::size_t dim_out() const override { return n_; }
    const SampledKernel& kernel() const { return kernel_; }

    void apply(std::span<const double> x, std::span<double> out) const override {
        const auto sn = static_cast<std::int64_t>(n_);
        const auto nt = static_cast<std::int64_t>(kernel_.taps.size());
        for (std::int64_t i = 0; i < sn; ++i) {
            double acc = 0.0;
            for (std::int64_t k = 0; k < nt; ++k) {
                const std::int64_t j = i - kernel_.offset - k;
                if (j >= 0 && j < sn) acc += kernel_.taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
            }
            out[static_cast<std::size_t>(i)] = acc;
        }
    }

    void apply_adjoint(std::span<const double> y, std::span<double> out) const override {
        const auto sn = static_cast<std::int64_t>(n_);
        const auto nt = static_cast<std::int64_t>(kernel_.taps.size());
        for (std::int64_t j = 0; j < sn; ++j) {
            double acc = 0.0;
            for (std::int64_t k = 0; k < nt; ++k) {
                const std::int64_t i = j + kernel_.offset + k;
                if (i >= 0 && i < sn) acc += kernel_.taps[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(i)];
            }
            out[static_cast<std::size_t>(j)] = acc;
        }
    }

    using LinearOperator::apply;
    using LinearOperator::apply_adjoint;

private:
    SampledKernel kernel_;
    std::size_t n_;
};

// Largest singular value via power iteration on A^T A. The Rayleigh estimate
// is nondecreasing, so the returned value approaches the true norm from
// below; convergence is declared when successive estimates agree to tol.
inline double estimate_operator_norm(const LinearOperator& op, double tol = 1e-8,
                                     std::size_t max_iter = 5000) {
    const std::size_t n = op.dim_in();
    Rng rng(0x5EEDBA5Eu);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_normal();
    const double nv = norm2(v);
    scale(v, 1.0 / nv);

    std::vector<double> hv(op.dim_out()), w(n);
    double est = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        op.apply(v, hv);
        op.apply_adjoint(hv, w);
        const double lambda = dot(v, w); // Rayleigh quotient of A^T A
        const double next = std::sqrt(std::max(lambda, 0.0));
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        if (it > 0 && std::abs(next - est) <= tol * std::max(next, 1e-300)) return next;
        est = next;
    }
    throw numeric_error("operator norm: power iteration did not converge; last estimate " +
                        std::to_string(est));
}

// Forward model H = G (pi * .): peak-shape convolution followed by Gaussian
// blur. Solvers work on the spike domain; the restored peak signal is
// obtained through apply_kernel (the convolution alone, without blur).
class ComposedForwardModel final : public LinearOperator {
public:
    ComposedForwardModel(SampledKernel kernel, double sigma_g, std::size_t n)
        : conv_(std::move(kernel), n), blur_(gaussian_blur_taps(sigma_g), n), sigma_g_(sigma_g) {}

    std::size_t dim_in() const override { return conv_.dim_in(); }
    std::size_t dim_out() const override { return conv_.dim_in(); }

    void apply(std::span<const double> x, std::span<double> out) const override {
        std::vector<double> mid(conv_.dim_out());
        conv_.apply(x, mid);
        blur_.apply(mid, out);
    }

    void apply_adjoint(std::span<const double> y, std::span<double> out) const override {
        std::vector<double> mid(conv_.dim_out());
        blur_.apply_adjoint(y, mid);
        conv_.apply_adjoint(mid, out);
    }

    // pi * x: spike domain -> clean peak signal.
    void apply_kernel(std::span<const double> x, std::span<double> out) const { conv_.apply(x, out); }
    void apply_kernel_adjoint(std::span<const double> p, std::span<double> out) const {
        conv_.apply_adjoint(p, out);
    }
    std::vector<double> apply_kernel(std::span<const double> x) const {
        std::vector<double> out(dim_in());
        apply_kernel(x, out);
        return out;
    }

    // G p alone, for building observations.
    void apply_blur(std::span<const double> p, std::span<double> out) const { blur_.apply(p, out); }

    using LinearOperator::apply;
    using LinearOperator::apply_adjoint;

    // Cached spectral-norm estimate, shared by every solver on this model.
    double operator_norm() const {
        std::call_once(norm_once_, [this] { norm_ = estimate_operator_norm(*this, 1e-10, 20000); });
        return norm_;
    }

    const SampledKernel& peak_kernel() const { return conv_.kernel(); }
    const SampledKernel& blur_kernel() const { return blur_.kernel(); }
    double sigma_g() const { return sigma_g_; }

private:
    ConvolutionOperator conv_;
    ConvolutionOperator blur_;
    double sigma_g_ = 0.0;
    mutable double norm_ = 0.0;
    mutable std::once_flag norm_once_;
};

inline ComposedForwardModel make_forward(const SampledKernel& kernel, double sigma_g, std::size_t n) {
    return ComposedForwardModel(kernel, sigma_g, n);
}

// out = A^T A x.  Every solver and unrolled layer funnels normal-equation
// products through this single helper so their arithmetic stays bit-identical.
inline void gram_apply(const LinearOperator& op, std::span<const double> x, std::span<double> out,
                       std::vector<double>& scratch) {
    scratch.resize(op.dim_out());
    op.apply(x, scratch);
    op.apply_adjoint(scratch, out);
}

} // namespace peakdec
