#pragma once
// Supervised training of the unrolled networks.  The loop is deterministic
// for a fixed seed regardless of the thread count: shuffling comes from a
// dedicated counter-based substream, per-record gradients are computed into
// per-slot buffers, and the reduction always sums slots in index order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "peakdec/dataset.hpp"
#include "peakdec/errors.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/parallel.hpp"
#include "peakdec/rng.hpp"
#include "peakdec/unrolled.hpp"

namespace peakdec {

enum class LossDomain { peak, spike };

inline std::string loss_domain_name(LossDomain d) {
    return d == LossDomain::peak ? "peak" : "spike";
}

inline LossDomain parse_loss_domain(const std::string& name) {
    if (name == "peak") return LossDomain::peak;
    if (name == "spike") return LossDomain::spike;
    throw config_error("unknown loss domain: " + name);
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t patience = 0;  // epochs without validation improvement; 0 disables
    LossDomain loss = LossDomain::peak;
    std::uint64_t seed = 0;    // master seed of the shuffle substream
    std::size_t threads = 1;

    void validate() const {
        if (epochs == 0) throw config_error("train: epochs must be positive");
        if (batch == 0) throw config_error("train: batch size must be positive");
        if (!(lr >= 0.0)) throw config_error("train: learning rate must be non-negative");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw config_error("train: Adam moment decays must lie in [0, 1)");
        if (!(eps > 0.0)) throw config_error("train: Adam epsilon must be positive");
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    UnrolledModel model;  // parameters restored from the best validation epoch
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;  // 0 = initialization, e = after epoch e (1-based)
    double best_val = std::numeric_limits<double>::infinity();
};

namespace detail {

// Per-record squared-error loss (1/n)||target_hat - target||^2 and, when
// graw is non-null, its gradient accumulated into the raw parameters.
inline double record_loss_grad(const UnrolledModel& model, const ComposedForwardModel& fm,
                               const SignalTriple& rec, LossDomain domain,
                               std::vector<double>* graw) {
    const std::size_t n = fm.dim_in();
    UnrolledTape tape;
    UnrolledTape* tp = graw ? &tape : nullptr;
    const std::vector<double> xhat = unrolled_forward(model, fm, rec.z, tp);
    std::vector<double> gx(graw ? n : 0, 0.0);
    double loss = 0.0;
    if (domain == LossDomain::peak) {
        const std::vector<double> phat = fm.apply_kernel(xhat);
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = phat[i] - rec.p[i];
            loss += r[i] * r[i];
        }
        loss /= static_cast<double>(n);
        if (graw) {
            const double c = 2.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) r[i] *= c;
            fm.apply_kernel_adjoint(r, gx);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double d = xhat[i] - rec.s[i];
            loss += d * d;
        }
        loss /= static_cast<double>(n);
        if (graw) {
            const double c = 2.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) gx[i] = c * (xhat[i] - rec.s[i]);
        }
    }
    if (graw) unrolled_backward(model, fm, rec.z, tape, gx, *graw);
    return loss;
}

}  // namespace detail

// Mean per-record loss of a model over a set of records (no gradients).
inline double mean_loss(const UnrolledModel& model, const ComposedForwardModel& fm,
                        const std::vector<SignalTriple>& records, LossDomain domain,
                        std::size_t threads) {
    if (records.empty()) throw config_error("train: empty record set");
    std::vector<double> losses(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        losses[i] = detail::record_loss_grad(model, fm, records[i], domain, nullptr);
    });
    double total = 0.0;
    for (const double l : losses) total += l;  // fixed order, thread-count independent
    return total / static_cast<double>(records.size());
}

// Runs Adam over the train split, tracking validation loss per epoch and
// restoring the parameters of the best validation epoch before returning.
inline TrainResult train_unrolled(UnrolledModel model, const ComposedForwardModel& fm,
                                  const std::vector<SignalTriple>& train,
                                  const std::vector<SignalTriple>& val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty() || val.empty()) throw config_error("train: empty train or val split");

    const std::size_t np = model.raw.size();
    std::vector<double> adam_m(np, 0.0), adam_v(np, 0.0);
    std::size_t adam_t = 0;

    TrainResult res;
    // The initialization is a restore candidate, so the returned model is
    // never worse on validation than where it started.
    std::vector<double> best_raw = model.raw;
    res.best_val = mean_loss(model, fm, val, cfg.loss, cfg.threads);
    res.best_epoch = 0;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // Per-slot gradient/loss buffers reused across batches.
    std::vector<std::vector<double>> slot_grad(cfg.batch, std::vector<double>(np, 0.0));
    std::vector<double> slot_loss(cfg.batch, 0.0);
    std::vector<double> grad(np);

    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates reshuffle from a per-epoch substream (tag 3; tags 0-2
        // belong to the dataset splits).
        Rng shuffle(substream_seed(cfg.seed, 3, epoch));
        for (std::size_t i = order.size(); i-- > 1;) {
            const std::size_t j = static_cast<std::size_t>(shuffle.next_below(i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t count = std::min(cfg.batch, order.size() - start);
            parallel_for(count, cfg.threads, [&](std::size_t slot) {
                std::fill(slot_grad[slot].begin(), slot_grad[slot].end(), 0.0);
                slot_loss[slot] = detail::record_loss_grad(model, fm, train[order[start + slot]],
                                                           cfg.loss, &slot_grad[slot]);
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t slot = 0; slot < count; ++slot) {  // fixed reduction order
                if (!std::isfinite(slot_loss[slot]))
                    throw numeric_error("train: non-finite loss at epoch " +
                                        std::to_string(epoch + 1) + ", batch " +
                                        std::to_string(start / cfg.batch + 1));
                epoch_loss += slot_loss[slot];
                for (std::size_t i = 0; i < np; ++i) grad[i] += slot_grad[slot][i];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t i = 0; i < np; ++i) grad[i] *= inv;

            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
            for (std::size_t i = 0; i < np; ++i) {
                adam_m[i] = cfg.beta1 * adam_m[i] + (1.0 - cfg.beta1) * grad[i];
                adam_v[i] = cfg.beta2 * adam_v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                const double mhat = adam_m[i] / bc1;
                const double vhat = adam_v[i] / bc2;
                model.raw[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
        epoch_loss /= static_cast<double>(train.size());

        const double val_loss = mean_loss(model, fm, val, cfg.loss, cfg.threads);
        res.history.push_back({epoch_loss, val_loss});
        if (val_loss < res.best_val) {
            res.best_val = val_loss;
            res.best_epoch = epoch + 1;
            best_raw = model.raw;
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }
    model.raw = std::move(best_raw);
    res.model = std::move(model);
    return res;
}

}  // namespace peakdec
