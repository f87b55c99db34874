#pragma once
// K-layer unrolled versions of the three solvers.  A layer applies exactly
// one classical iteration (the same step functions from solvers.hpp), but the
// step parameters become trainable, one set per layer:
//
//   * ista  : gamma_k, chi_k
//   * pd    : tau_k, sigma_k, plus one shared constraint radius rho
//   * hq    : lambda1_k, lambda2_k, delta1_k, delta2_k
//
// Positivity is enforced by storing raw values and mapping them through
// softplus.  Gradients are computed by a hand-written reverse pass over the
// recorded per-layer tapes, including differentiation straight through the
// inner conjugate-gradient iterations of the hq variant.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "peakdec/errors.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/solvers.hpp"
#include "peakdec/vecops.hpp"

namespace peakdec {

enum class Variant { ista, pd, hq };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::ista: return "u-ista";
        case Variant::pd: return "u-pd";
        case Variant::hq: return "u-hq";
    }
    throw config_error("unknown unrolled variant");
}

inline Variant parse_variant(const std::string& name) {
    if (name == "u-ista" || name == "ista") return Variant::ista;
    if (name == "u-pd" || name == "pd") return Variant::pd;
    if (name == "u-hq" || name == "hq") return Variant::hq;
    throw config_error("unknown unrolled variant: " + name);
}

constexpr std::size_t params_per_layer(Variant v) {
    return v == Variant::hq ? 4 : 2;
}

// ------------------------------------------------------- positivity mapping

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double softplus_inv(double p) {
    if (!(p > 0.0)) throw config_error("softplus_inv: value must be positive");
    return p > 30.0 ? p : std::log(std::expm1(p));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// --------------------------------------------------------------------- model

struct UnrolledModel {
    Variant variant = Variant::ista;
    std::size_t layers = 4;
    std::size_t cg_iters = 20;  // inner conjugate-gradient budget (hq only)
    std::vector<double> raw;    // pre-softplus parameters

    std::size_t param_count() const {
        return layers * params_per_layer(variant) + (variant == Variant::pd ? 1 : 0);
    }

    // Parameters actually used by the layers: softplus of the raw storage.
    std::vector<double> effective() const {
        std::vector<double> eff(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) eff[i] = softplus(raw[i]);
        return eff;
    }
};

// Builds a model whose effective parameters equal the classical defaults, so
// its forward pass reproduces the classical solver truncated at `layers`
// iterations.  `rho` is only consulted by the pd variant.
inline UnrolledModel make_unrolled(Variant v, std::size_t layers, double op_norm, double rho = 0.0,
                                   std::size_t cg_iters = 20) {
    if (!(op_norm > 0.0)) throw config_error("unrolled: operator norm must be positive");
    UnrolledModel m;
    m.variant = v;
    m.layers = layers;
    m.cg_iters = cg_iters;
    m.raw.reserve(m.param_count());
    switch (v) {
        case Variant::ista: {
            const double g = softplus_inv(default_ista_gamma(op_norm));
            const double c = softplus_inv(0.01);
            for (std::size_t k = 0; k < layers; ++k) {
                m.raw.push_back(g);
                m.raw.push_back(c);
            }
            break;
        }
        case Variant::pd: {
            if (!(rho > 0.0)) throw config_error("unrolled: pd variant needs a positive rho");
            const double s = softplus_inv(default_pd_step(op_norm));
            for (std::size_t k = 0; k < layers; ++k) {
                m.raw.push_back(s);
                m.raw.push_back(s);
            }
            m.raw.push_back(softplus_inv(rho));
            break;
        }
        case Variant::hq: {
            if (cg_iters == 0) throw config_error("unrolled: cg_iters must be positive");
            const double l = softplus_inv(0.1);
            const double d = softplus_inv(1.0);
            for (std::size_t k = 0; k < layers; ++k) {
                m.raw.push_back(l);
                m.raw.push_back(l);
                m.raw.push_back(d);
                m.raw.push_back(d);
            }
            break;
        }
    }
    return m;
}

// ------------------------------------------------------------------- forward

namespace detail {

inline void check_layer_finite(std::span<const double> x, std::size_t layer) {
    for (const double v : x) {
        if (!std::isfinite(v))
            throw numeric_error("unrolled: non-finite value after layer " +
                                std::to_string(layer + 1));
    }
}

}  // namespace detail

struct UnrolledTape {
    std::vector<double> eff;              // effective (post-softplus) parameters
    std::vector<std::vector<double>> x;   // primal iterates x_0 .. x_K
    std::vector<std::vector<double>> y;   // dual iterates (pd only)
    std::vector<std::vector<double>> xbar;
    std::vector<IstaStepTape> ista;
    std::vector<PdStepTape> pd;
    std::vector<HqStepTape> hq;
};

// Runs the K layers on observation z and returns the final spike estimate.
// With a tape, records everything the reverse pass needs; the arithmetic is
// identical either way.
inline std::vector<double> unrolled_forward(const UnrolledModel& m, const LinearOperator& op,
                                            std::span<const double> z,
                                            UnrolledTape* tape = nullptr) {
    if (m.raw.size() != m.param_count())
        throw config_error("unrolled: parameter vector has the wrong size");
    const std::size_t n = op.dim_in();
    const std::vector<double> eff = m.effective();
    if (tape) {
        *tape = UnrolledTape{};
        tape->eff = eff;
    }
    switch (m.variant) {
        case Variant::ista: {
            std::vector<double> x(n, 0.0), x_next(n);
            if (tape) {
                tape->ista.resize(m.layers);
                tape->x.push_back(x);
            }
            for (std::size_t k = 0; k < m.layers; ++k) {
                ista_step(op, z, x, eff[2 * k], eff[2 * k + 1], x_next,
                          tape ? &tape->ista[k] : nullptr);
                x.swap(x_next);
                detail::check_layer_finite(x, k);
                if (tape) tape->x.push_back(x);
            }
            return x;
        }
        case Variant::pd: {
            PdState s(n, op.dim_out());
            const double rho = eff.back();
            if (tape) {
                tape->pd.resize(m.layers);
                tape->x.push_back(s.x);
                tape->y.push_back(s.y);
                tape->xbar.push_back(s.xbar);
            }
            for (std::size_t k = 0; k < m.layers; ++k) {
                pd_step(op, z, s, eff[2 * k], eff[2 * k + 1], rho, tape ? &tape->pd[k] : nullptr);
                detail::check_layer_finite(s.x, k);
                if (tape) {
                    tape->x.push_back(s.x);
                    tape->y.push_back(s.y);
                    tape->xbar.push_back(s.xbar);
                }
            }
            return std::move(s.x);
        }
        case Variant::hq: {
            std::vector<double> x(n, 0.0), x_next(n);
            if (tape) {
                tape->hq.resize(m.layers);
                tape->x.push_back(x);
            }
            for (std::size_t k = 0; k < m.layers; ++k) {
                hq_step(op, z, x, eff[4 * k], eff[4 * k + 1], eff[4 * k + 2], eff[4 * k + 3],
                        m.cg_iters, x_next, tape ? &tape->hq[k] : nullptr);
                x.swap(x_next);
                detail::check_layer_finite(x, k);
                if (tape) tape->x.push_back(x);
            }
            return x;
        }
    }
    throw config_error("unknown unrolled variant");
}

// ------------------------------------------------------------------ backward

// Reverse pass through cg_fixed, iteration by iteration.  `gout` is the
// adjoint of the returned solution; the adjoints of the right-hand side and
// of the diagonal are accumulated into gb and gomega.
inline void cg_backward(const LinearOperator& op, std::span<const double> omega,
                        const CgTape& tape, std::span<const double> gout, std::span<double> gb,
                        std::span<double> gomega) {
    const std::size_t n = op.dim_in();
    std::vector<double> gx(gout.begin(), gout.end());
    std::vector<double> gr(n, 0.0), gp(n, 0.0), gq(n, 0.0), tmp(n), scratch;
    double grr = 0.0;  // adjoint of rr_{j+1} entering step j
    for (std::size_t j = tape.performed; j-- > 0;) {
        const std::vector<double>& pj = tape.p[j];
        const std::vector<double>& qj = tape.q[j];
        const std::vector<double>& r_next = tape.r[j + 1];
        // p_{j+1} = r_{j+1} + beta_j p_j (unused after the last performed
        // iteration, where the running gp is still zero).
        double gbeta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            gbeta += gp[i] * pj[i];
            gr[i] += gp[i];
            gp[i] *= tape.beta[j];
        }
        // beta_j = rr_{j+1} / rr_j
        const double grr_next = grr + gbeta / tape.rr[j];
        double grr_j = -gbeta * tape.beta[j] / tape.rr[j];
        // rr_{j+1} = r_{j+1} . r_{j+1}
        for (std::size_t i = 0; i < n; ++i) gr[i] += 2.0 * grr_next * r_next[i];
        // r_{j+1} = r_j - alpha_j q_j ; x_{j+1} = x_j + alpha_j p_j
        double galpha = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            galpha += gx[i] * pj[i] - gr[i] * qj[i];
            gq[i] = -tape.alpha[j] * gr[i];
            gp[i] += tape.alpha[j] * gx[i];
        }
        // alpha_j = rr_j / pq_j
        grr_j += galpha / tape.pq[j];
        const double gpq = -galpha * tape.alpha[j] / tape.pq[j];
        // pq_j = p_j . q_j
        for (std::size_t i = 0; i < n; ++i) {
            gp[i] += gpq * qj[i];
            gq[i] += gpq * pj[i];
        }
        // q_j = (H^T H + Diag(omega)) p_j
        gram_apply(op, gq, tmp, scratch);
        for (std::size_t i = 0; i < n; ++i) {
            gp[i] += tmp[i] + omega[i] * gq[i];
            gomega[i] += gq[i] * pj[i];
        }
        grr = grr_j;
    }
    // Head of the recursion: p_0 = r_0, rr_0 = r_0 . r_0, r_0 = b.
    for (std::size_t i = 0; i < n; ++i) gb[i] += gr[i] + gp[i] + 2.0 * grr * tape.r[0][i];
}

namespace detail {

// Soft-threshold adjoint helper shared by the ista and pd reverse passes:
// given the pre-threshold point u and threshold t, routes gxo (adjoint of the
// threshold output) to gu and returns the adjoint of t.  The kink at
// |u| == t uses the zero-derivative convention.
inline double soft_threshold_backward(std::span<const double> u, double t,
                                      std::span<const double> gxo, std::span<double> gu) {
    double gt = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] > t) {
            gu[i] = gxo[i];
            gt -= gxo[i];
        } else if (u[i] < -t) {
            gu[i] = gxo[i];
            gt += gxo[i];
        } else {
            gu[i] = 0.0;
        }
    }
    return gt;
}

}  // namespace detail

// Accumulates d(loss)/d(raw parameters) into graw, given the adjoint of the
// network output (the final spike iterate) in gout.
inline void unrolled_backward(const UnrolledModel& m, const LinearOperator& op,
                              std::span<const double> z, const UnrolledTape& tape,
                              std::span<const double> gout, std::span<double> graw) {
    if (graw.size() != m.raw.size())
        throw config_error("unrolled: gradient vector has the wrong size");
    const std::size_t n = op.dim_in();
    const std::size_t mm = op.dim_out();
    std::vector<double> geff(tape.eff.size(), 0.0);

    switch (m.variant) {
        case Variant::ista: {
            std::vector<double> gx(gout.begin(), gout.end());
            std::vector<double> gu(n), gd(n), tmp(n), scratch;
            for (std::size_t k = m.layers; k-- > 0;) {
                const IstaStepTape& tp = tape.ista[k];
                const double gamma = tape.eff[2 * k];
                const double chi = tape.eff[2 * k + 1];
                const double t = gamma * chi;
                // x_out = ST(u, gamma*chi)
                const double gt = detail::soft_threshold_backward(tp.u, t, gx, gu);
                double ggamma = gt * chi;
                const double gchi = gt * gamma;
                // u = x - gamma * dir
                for (std::size_t i = 0; i < n; ++i) {
                    ggamma -= tp.dir[i] * gu[i];
                    gd[i] = -gamma * gu[i];
                }
                // dir = H^T (H x - z)
                gram_apply(op, gd, tmp, scratch);
                for (std::size_t i = 0; i < n; ++i) gx[i] = gu[i] + tmp[i];
                geff[2 * k] += ggamma;
                geff[2 * k + 1] += gchi;
            }
            break;
        }
        case Variant::pd: {
            const double rho = tape.eff.back();
            std::vector<double> gx(gout.begin(), gout.end());
            std::vector<double> gy(mm, 0.0), gxbar(n, 0.0);
            std::vector<double> gxo(n), gu(n), gh2(n), gyp(mm), gv(mm), gP(mm), gw(mm), tmp(mm);
            double grho = 0.0;
            for (std::size_t k = m.layers; k-- > 0;) {
                const PdStepTape& tp = tape.pd[k];
                const double tau = tape.eff[2 * k];
                const double sigma = tape.eff[2 * k + 1];
                double gtau = 0.0, gsigma = 0.0;
                // xbar_out = 2 x_out - x_in
                for (std::size_t i = 0; i < n; ++i) gxo[i] = gx[i] + 2.0 * gxbar[i];
                std::vector<double> gx_in(n);
                for (std::size_t i = 0; i < n; ++i) gx_in[i] = -gxbar[i];
                // x_out = ST(u, tau)
                gtau += detail::soft_threshold_backward(tp.u, tau, gxo, gu);
                // u = x_in - tau * hty
                for (std::size_t i = 0; i < n; ++i) {
                    gx_in[i] += gu[i];
                    gtau -= tp.hty[i] * gu[i];
                    gh2[i] = -tau * gu[i];
                }
                // hty = H^T y_out
                op.apply(gh2, tmp);
                for (std::size_t i = 0; i < mm; ++i) gyp[i] = gy[i] + tmp[i];
                // y_out = v - sigma * proj
                for (std::size_t i = 0; i < mm; ++i) {
                    gv[i] = gyp[i];
                    gsigma -= tp.proj[i] * gyp[i];
                    gP[i] = -sigma * gyp[i];
                }
                // proj = projection of w onto the rho-ball around z
                if (tp.info.outside) {
                    const double nd = tp.info.dist;
                    double dgP = 0.0;
                    for (std::size_t i = 0; i < mm; ++i) dgP += (tp.w[i] - z[i]) * gP[i];
                    const double scale = rho / nd;
                    for (std::size_t i = 0; i < mm; ++i)
                        gw[i] = scale * (gP[i] - (tp.w[i] - z[i]) * dgP / (nd * nd));
                    grho += dgP / nd;
                } else {
                    std::copy(gP.begin(), gP.end(), gw.begin());
                }
                // w = v / sigma
                for (std::size_t i = 0; i < mm; ++i) {
                    gv[i] += gw[i] / sigma;
                    gsigma -= gw[i] * tp.v[i] / (sigma * sigma);
                }
                // v = y_in + sigma * hxbar
                std::vector<double> gh1(mm);
                for (std::size_t i = 0; i < mm; ++i) {
                    gsigma += tp.hxbar[i] * gv[i];
                    gh1[i] = sigma * gv[i];
                }
                // hxbar = H xbar_in ; gy_in = gv
                op.apply_adjoint(gh1, gxbar);
                gy = gv;
                gx = std::move(gx_in);
                geff[2 * k] += gtau;
                geff[2 * k + 1] += gsigma;
            }
            geff.back() += grho;
            break;
        }
        case Variant::hq: {
            std::vector<double> gx(gout.begin(), gout.end());
            std::vector<double> gd(n), gb(n), gomega(n), tmp(n), scratch;
            for (std::size_t k = m.layers; k-- > 0;) {
                const HqStepTape& tp = tape.hq[k];
                const std::vector<double>& x_in = tape.x[k];
                const double l1 = tape.eff[4 * k];
                const double l2 = tape.eff[4 * k + 1];
                const double d1 = tape.eff[4 * k + 2];
                const double d2 = tape.eff[4 * k + 3];
                // x_out = x_in - d
                for (std::size_t i = 0; i < n; ++i) gd[i] = -gx[i];
                // d = CG(H^T H + Diag(omega), grad)
                std::fill(gb.begin(), gb.end(), 0.0);
                std::fill(gomega.begin(), gomega.end(), 0.0);
                cg_backward(op, tp.omega, tp.cg, gd, gb, gomega);
                // grad = H^T (H x_in - z) + x_in .* omega
                gram_apply(op, gb, tmp, scratch);
                for (std::size_t i = 0; i < n; ++i) {
                    gx[i] += tmp[i] + tp.omega[i] * gb[i];
                    gomega[i] += x_in[i] * gb[i];
                }
                // omega_i = hq_weight(x_in[i]; l1, l2, d1, d2)
                double gl1 = 0.0, gl2 = 0.0, gd1 = 0.0, gd2 = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    gx[i] += gomega[i] * hq_weight_dt(x_in[i], l1, l2, d1, d2);
                    const HqWeightGrad pg = hq_weight_dparams(x_in[i], l1, l2, d1, d2);
                    gl1 += gomega[i] * pg.l1;
                    gl2 += gomega[i] * pg.l2;
                    gd1 += gomega[i] * pg.d1;
                    gd2 += gomega[i] * pg.d2;
                }
                geff[4 * k] += gl1;
                geff[4 * k + 1] += gl2;
                geff[4 * k + 2] += gd1;
                geff[4 * k + 3] += gd2;
            }
            break;
        }
    }
    // Chain through the softplus reparameterization.
    for (std::size_t i = 0; i < graw.size(); ++i) graw[i] += geff[i] * sigmoid(m.raw[i]);
}

}  // namespace peakdec
