// Acceptance gate for the toolkit.  Each criterion prints exactly one line:
//
//   PASS criterion N: <label> (<measurements>)
//   FAIL criterion N: <label> (<reason>)
//
// and the process exits nonzero if any criterion fails.  Every tolerance and
// budget is pinned here, in code:
//
//   1. benchmark presets reproduce the published table exactly; a full
//      1400-record dataset at n=2000 generates in < 10 s.
//   2. gen/train/eval artifacts are byte-identical across reruns and thread
//      counts.
//   3. solver property suite at n in {16, 64}, 100 seeded instances each:
//      ISTA objective non-increasing and fixed-point residual < 1e-8; PD
//      feasibility within rho + 1e-6 and L1 value within 1e-4 of an
//      independent long-budget reference; HQ gradient sup-norm < 1e-6 and
//      penalty derivative matching finite differences to 1e-6 relative.
//   4. frozen unrolled networks match K classical iterations to 1e-12
//      elementwise for K in {1, 4, 8}, all three variants.
//   5. reverse-mode parameter gradients match central finite differences
//      (h = 1e-5) to 1e-4 relative on >= 50 kink-safe probes per variant at
//      n = 16, in < 60 s.
//   6. metric identities: support-restricted SNR equals SNR on full support
//      (1e-12), NMAE pair-scale invariance, exact oracle morphology
//      round-trip, trapezoid area of [0,1,0] equals 1.
//   7. desk-scale trends (n=500, 200/50/50 records, K=4): nine trainings --
//      three methods, each trained on three independent replications
//      (seeds 101/202/303) of the easiest preset under one shared optimizer
//      budget -- then 27 evaluations scoring every network on the
//      same-replication test split of each density preset D0-D2, so the
//      density trend measures a fixed restorer against growing spike
//      density.  Asserted, each over >= 2 of 3 replication seeds where
//      marked: morphology error grows with spike density for every method
//      (per seed); the trained HQ network wins SNR/TSNR/NMAE(H)/NMAE(A) on
//      the easiest set (per seed) with NMAE(A) at most half of each
//      competitor (per seed); the L1-based networks underestimate heights
//      in the median on the easiest set (pooled over seeds) while
//      overlapped peaks overestimate more often than isolated ones (pooled
//      over presets and seeds: only the densest preset produces overlapped
//      peaks at this scale); mean inference time orders
//      u-ista < u-pd < u-hq on the easiest set; the whole block stays
//      under 30 minutes.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "peakdec/peakdec.hpp"

using namespace peakdec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1

bool criterion1(std::string& detail) {
    struct Row {
        const char* name;
        double p_over_n;
        std::size_t d_min;
        double sigma_f, a, sigma_e;
        std::size_t spikes;
    };
    // The benchmark table: sigma_g = 1, n = 2000, 1000/200/200 records
    // everywhere; the columns below are what varies.
    constexpr Row table[] = {
        {"D0", 0.015, 5, 0.5, 0.2, 0.02, 30}, {"D1", 0.030, 3, 0.5, 0.2, 0.02, 60},
        {"D2", 0.045, 1, 0.5, 0.2, 0.02, 90}, {"D3", 0.015, 5, 0.5, 0.4, 0.02, 30},
        {"D4", 0.015, 5, 0.5, 0.6, 0.02, 30}, {"D5", 0.030, 3, 0.5, 0.2, 0.04, 60},
        {"D6", 0.030, 3, 0.5, 0.2, 0.06, 60},
    };

    testsup::TempDir tmp("accept-c1");
    for (const Row& row : table) {
        DatasetSpec spec = dataset_preset(row.name);
        // Shrink only the record counts; every table cell stays benchmark-scale.
        spec.count_train = 2;
        spec.count_val = 1;
        spec.count_test = 1;
        generate_dataset(spec, tmp.path / row.name, 1);
        const Dataset ds = load_dataset(tmp.path / row.name);
        const DatasetSpec& m = ds.spec;
        if (!(m.name == row.name && m.n == 2000 && m.p_over_n == row.p_over_n &&
              m.d_min == row.d_min && m.sigma_f == row.sigma_f && m.a == row.a &&
              m.sigma_e == row.sigma_e && m.sigma_g == 1.0 &&
              m.spike_count() == row.spikes)) {
            detail = std::string("manifest cell mismatch for ") + row.name;
            return false;
        }
    }

    // Generation speed: the full easiest preset is 1400 records at n = 2000.
    const auto t0 = Clock::now();
    generate_dataset(dataset_preset("D0"), tmp.path / "full", 1);
    const double secs = seconds_since(t0);
    detail = "7 preset manifests exact; 1400 records in " + num(secs) + " s (budget 10 s)";
    return secs < 10.0;
}

// ---------------------------------------------------------------- criterion 2

bool files_equal(const fs::path& a, const fs::path& b, const std::vector<std::string>& names,
                 std::string& detail) {
    for (const std::string& f : names) {
        if (testsup::slurp(a / f) != testsup::slurp(b / f)) {
            detail = f + " differs between " + a.string() + " and " + b.string();
            return false;
        }
    }
    return true;
}

bool criterion2(std::string& detail) {
    testsup::TempDir tmp("accept-c2");
    const std::string gen = "gen --preset D0 --n 256 --train 6 --val 3 --test 3 --seed 11";
    const std::vector<std::string> ds_files{"manifest.json", "train.pkf", "val.pkf", "test.pkf"};

    const fs::path dA = tmp.path / "dsA", dB = tmp.path / "dsB", dC = tmp.path / "dsC";
    for (const auto& [dir, threads] :
         {std::pair{dA, "1"}, std::pair{dB, "3"}, std::pair{dC, "1"}}) {
        const auto r =
            testsup::run_cli(gen + " --threads " + threads + " --out " + dir.string());
        if (r.code != 0) {
            detail = "gen failed: " + r.output;
            return false;
        }
    }
    if (!files_equal(dA, dB, ds_files, detail) || !files_equal(dA, dC, ds_files, detail))
        return false;

    const std::string train = "train --data " + dA.string() +
                              " --method u-ista --k 2 --epochs 2 --lr 0.001 --batch 3 --seed 5";
    const std::vector<std::string> run_files{"checkpoint.json", "history.csv", "run-config.json"};
    const fs::path tA = tmp.path / "runA", tB = tmp.path / "runB", tC = tmp.path / "runC";
    for (const auto& [dir, threads] :
         {std::pair{tA, "1"}, std::pair{tB, "2"}, std::pair{tC, "1"}}) {
        const auto r =
            testsup::run_cli(train + " --threads " + threads + " --out " + dir.string());
        if (r.code != 0) {
            detail = "train failed: " + r.output;
            return false;
        }
    }
    if (!files_equal(tA, tB, run_files, detail) || !files_equal(tA, tC, run_files, detail))
        return false;

    const std::vector<std::string> eval_classical{"metrics_D0_ista.csv", "scatter_D0_ista.csv",
                                                  "run-config_D0_ista.json"};
    const std::vector<std::string> eval_unrolled{"metrics_D0_u-ista.csv", "scatter_D0_u-ista.csv",
                                                 "run-config_D0_u-ista.json"};
    const std::string eval_base = "eval --data " + dA.string();
    const std::string ckpt = (tA / "checkpoint.json").string();
    const fs::path eA = tmp.path / "evA", eB = tmp.path / "evB", eC = tmp.path / "evC";
    for (const auto& [dir, threads] :
         {std::pair{eA, "1"}, std::pair{eB, "3"}, std::pair{eC, "1"}}) {
        const auto r1 = testsup::run_cli(eval_base + " --method ista --threads " + threads +
                                         " --out " + dir.string());
        const auto r2 = testsup::run_cli(eval_base + " --method u-ista --checkpoint " + ckpt +
                                         " --threads " + threads + " --out " + dir.string());
        if (r1.code != 0 || r2.code != 0) {
            detail = "eval failed: " + r1.output + r2.output;
            return false;
        }
    }
    if (!files_equal(eA, eB, eval_classical, detail) ||
        !files_equal(eA, eC, eval_classical, detail) ||
        !files_equal(eA, eB, eval_unrolled, detail) ||
        !files_equal(eA, eC, eval_unrolled, detail))
        return false;

    detail = "datasets, checkpoints, histories, and metric/scatter CSVs byte-identical "
             "across reruns and --threads";
    return true;
}

// ---------------------------------------------------------------- criterion 3

bool criterion3(std::string& detail) {
    constexpr std::size_t kInstances = 100;
    constexpr double kIstaFixedPointTol = 1e-8;   // sup-norm of one extra step
    constexpr double kPdFeasSlack = 1e-6;         // ||Hx-z|| <= rho + slack
    constexpr double kPdL1Tol = 1e-4;             // |l1 - ref| <= tol * max(1, ref)
    constexpr double kHqGradTol = 1e-6;           // sup-norm of the objective gradient
    constexpr double kPsiFdRel = 1e-6;            // derivative vs central differences
    // Computed objective values carry roundoff of order eps*|F|; the descent
    // property is asserted up to that irreducible noise.
    constexpr double kMonotoneSlack = 1e-14;

    for (const std::size_t n : {std::size_t{16}, std::size_t{64}}) {
        const testsup::TestModel t = testsup::make_model(n);
        const std::size_t P = n == 16 ? 2 : 4;
        const std::size_t d_min = n == 16 ? 4 : 6;
        const Eigen::MatrixXd H = testsup::materialize(*t.fm);

        for (std::size_t inst = 0; inst < kInstances; ++inst) {
            const SignalTriple rec =
                testsup::make_instance(t, 1000 * n + inst, P, d_min, 0.02);
            const auto where = [&](const char* what) {
                return "n=" + std::to_string(n) + " instance " + std::to_string(inst) + ": " +
                       std::string(what);
            };

            // --- iterative shrinkage: monotone descent and a fixed point
            IstaConfig icfg;
            icfg.tol = 1e-10;
            icfg.max_iter = 20000;
            const IstaResult ir = ista_solve(*t.fm, rec.z, t.op_norm, icfg);
            for (std::size_t k = 0; k + 1 < ir.objective.size(); ++k) {
                if (!(ir.objective[k + 1] <=
                      ir.objective[k] + kMonotoneSlack * std::max(1.0, ir.objective[k]))) {
                    detail = where("ista objective increased at iteration ") +
                             std::to_string(k + 1);
                    return false;
                }
            }
            std::vector<double> x_next(n);
            ista_step(*t.fm, rec.z, ir.x, default_ista_gamma(t.op_norm), icfg.chi, x_next);
            double fp = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                fp = std::max(fp, std::abs(x_next[i] - ir.x[i]));
            if (!(fp < kIstaFixedPointTol)) {
                detail = where("ista fixed-point residual ") + num(fp);
                return false;
            }

            // --- primal-dual: feasibility and L1 optimality vs an
            //     independent dense splitting reference
            const double rho = 0.3 * norm2(rec.z);
            PdConfig pcfg;
            pcfg.rho = rho;
            // Weak-signal instances (small rho) have slow linear tails; the
            // cap leaves them room to pass the 1e-6 feasibility bound.
            pcfg.max_iter = 1000000;
            pcfg.tol = 1e-9;
            const PdResult pr = primal_dual_solve(*t.fm, rec.z, t.op_norm, pcfg);
            std::vector<double> hx(n);
            t.fm->apply(pr.x, hx);
            double feas2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = hx[i] - rec.z[i];
                feas2 += d * d;
            }
            if (!(std::sqrt(feas2) <= rho + kPdFeasSlack)) {
                detail = where("pd infeasible by ") + num(std::sqrt(feas2) - rho);
                return false;
            }
            const testsup::AdmmResult ref =
                testsup::admm_ball_l1(H, testsup::to_eigen(rec.z), rho, 60000);
            if (!(ref.r_primal < 1e-6)) {
                detail = where("reference solve did not converge, residual ") +
                         num(ref.r_primal);
                return false;
            }
            double l1 = 0.0, l1_ref = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                l1 += std::abs(pr.x[i]);
                l1_ref += std::abs(ref.x1(static_cast<Eigen::Index>(i)));
            }
            if (!(std::abs(l1 - l1_ref) <= kPdL1Tol * std::max(1.0, l1_ref))) {
                detail = where("pd l1 ") + num(l1) + " vs reference " + num(l1_ref);
                return false;
            }

            // --- half-quadratic: stationarity of the smooth objective
            HqConfig hcfg;
            hcfg.tol = 1e-8;
            hcfg.max_iter = 500;
            hcfg.cg_iters = 30;
            const HqResult hr = hq_solve(*t.fm, rec.z, hcfg);
            const std::vector<double> grad = hq_gradient(*t.fm, rec.z, hr.x, hcfg.lambda1,
                                                         hcfg.lambda2, hcfg.delta1, hcfg.delta2);
            double ginf = 0.0;
            for (const double gi : grad) ginf = std::max(ginf, std::abs(gi));
            if (!(ginf < kHqGradTol)) {
                detail = where("hq gradient sup-norm ") + num(ginf);
                return false;
            }
        }
    }

    // --- penalty derivative against central differences (h chosen so the
    //     truncation error sits far below the relative tolerance)
    constexpr double kH = 1e-4;
    const double params[2][4] = {{0.1, 0.1, 1.0, 1.0}, {0.3, 0.05, 0.7, 2.0}};
    for (const double* p : params) {
        for (const double tval : {-2.7, -0.9, -0.13, 0.4, 1.8}) {
            const double closed = hq_psi_prime(tval, p[0], p[1], p[2], p[3]);
            const double fd = testsup::fd_scalar(
                [&](double u) { return hq_psi(u, p[0], p[1], p[2], p[3]); }, tval, kH);
            if (!(std::abs(closed - fd) <=
                  kPsiFdRel * std::max(std::abs(closed), std::abs(fd)) + 1e-12)) {
                detail = "psi' mismatch at t=" + num(tval) + ": " + num(closed) + " vs " +
                         num(fd);
                return false;
            }
        }
    }

    detail = "100 instances at n=16 and n=64: ista monotone + fixed point, pd feasible + "
             "l1-matched to reference, hq stationary + derivative verified";
    return true;
}

// ---------------------------------------------------------------- criterion 4

bool criterion4(std::string& detail) {
    constexpr double kTol = 1e-12;
    const std::size_t n = 64;
    const testsup::TestModel t = testsup::make_model(n);
    const double rho = default_constraint_radius(0.02, n);
    double worst = 0.0;

    for (std::uint64_t seed : {std::uint64_t{777}, std::uint64_t{778}, std::uint64_t{779}}) {
        const SignalTriple rec = testsup::make_instance(t, seed, 4, 6, 0.02);
        for (const std::size_t K : {std::size_t{1}, std::size_t{4}, std::size_t{8}}) {
            {
                const UnrolledModel m = make_unrolled(Variant::ista, K, t.op_norm, rho);
                const std::vector<double> xu = unrolled_forward(m, *t.fm, rec.z);
                IstaConfig cfg;
                cfg.max_iter = K;
                cfg.tol = 0.0;
                const std::vector<double> xc = ista_solve(*t.fm, rec.z, t.op_norm, cfg).x;
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::abs(xu[i] - xc[i]));
            }
            {
                const UnrolledModel m = make_unrolled(Variant::pd, K, t.op_norm, rho);
                const std::vector<double> xu = unrolled_forward(m, *t.fm, rec.z);
                PdConfig cfg;
                cfg.rho = rho;
                cfg.max_iter = K;
                cfg.tol = 0.0;
                const std::vector<double> xc =
                    primal_dual_solve(*t.fm, rec.z, t.op_norm, cfg).x;
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::abs(xu[i] - xc[i]));
            }
            {
                const UnrolledModel m = make_unrolled(Variant::hq, K, t.op_norm, rho, 20);
                const std::vector<double> xu = unrolled_forward(m, *t.fm, rec.z);
                HqConfig cfg;
                cfg.max_iter = K;
                cfg.tol = 0.0;
                cfg.cg_iters = 20;
                const std::vector<double> xc = hq_solve(*t.fm, rec.z, cfg).x;
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::abs(xu[i] - xc[i]));
            }
        }
    }

    detail = "3 variants x K in {1,4,8} x 3 records: max |difference| = " + num(worst) +
             " (tolerance 1e-12)";
    return worst <= kTol;
}

// ---------------------------------------------------------------- criterion 5

bool criterion5(std::string& detail) {
    constexpr double kStep = 1e-5;    // finite-difference step on raw parameters
    constexpr double kRelTol = 1e-4;  // relative gradient agreement
    // Pure relative comparison is undefined where the true gradient vanishes;
    // probes there are held to this absolute floor instead.
    constexpr double kAbsFloor = 1e-8;
    constexpr std::size_t kProbesNeeded = 50;
    constexpr std::size_t kMaxAttempts = 600;
    constexpr double kBudgetSeconds = 60.0;

    const auto t0 = Clock::now();
    const std::size_t n = 16;
    const testsup::TestModel t = testsup::make_model(n);
    const double rho = default_constraint_radius(0.02, n);
    std::string counts;

    const Variant variants[] = {Variant::ista, Variant::pd, Variant::hq};
    for (std::size_t vi = 0; vi < 3; ++vi) {
        const Variant v = variants[vi];
        std::size_t probes = 0, attempts = 0;
        double worst = 0.0;
        while (probes < kProbesNeeded && attempts < kMaxAttempts) {
            ++attempts;
            const SignalTriple rec = testsup::make_instance(
                t, 9000 + 97 * attempts + 31 * vi, 2, 4, 0.02);
            UnrolledModel m = make_unrolled(v, 2, t.op_norm, rho, 5);
            Rng rng(substream_seed(4242 + attempts, vi, 0));
            for (double& raw : m.raw) raw += 0.1 * (rng.next_unit() - 0.5);

            UnrolledTape tape;
            const std::vector<double> x = unrolled_forward(m, *t.fm, rec.z, &tape);
            if (!testsup::probe_safe(m, tape)) continue;  // kink-adjacent: skip

            std::vector<double> g(n);
            for (double& gi : g) gi = rng.next_unit() - 0.5;
            std::vector<double> graw(m.raw.size(), 0.0);
            unrolled_backward(m, *t.fm, rec.z, tape, g, graw);

            const std::size_t pi = attempts % m.raw.size();
            const auto f = [&](double raw_value) {
                UnrolledModel mm = m;
                mm.raw[pi] = raw_value;
                const std::vector<double> xx = unrolled_forward(mm, *t.fm, rec.z);
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += g[i] * xx[i];
                return acc;
            };
            const double fd = testsup::fd_scalar(f, m.raw[pi], kStep);
            const double ad = graw[pi];
            const double err = std::abs(ad - fd);
            const double bound =
                std::max(kAbsFloor, kRelTol * std::max(std::abs(ad), std::abs(fd)));
            if (err > bound) {
                detail = std::string(variant_name(v)) + " probe " + std::to_string(probes) +
                         ": reverse-mode " + num(ad) + " vs finite difference " + num(fd);
                return false;
            }
            worst = std::max(worst, err / std::max(kAbsFloor, std::max(std::abs(ad),
                                                                       std::abs(fd))));
            ++probes;
        }
        if (probes < kProbesNeeded) {
            detail = std::string(variant_name(v)) + ": only " + std::to_string(probes) +
                     " kink-safe probes in " + std::to_string(attempts) + " attempts";
            return false;
        }
        counts += std::string(counts.empty() ? "" : ", ") + variant_name(v) + " " +
                  std::to_string(probes) + " probes (worst rel " + num(worst) + ")";
    }

    const double secs = seconds_since(t0);
    detail = counts + "; " + num(secs) + " s (budget 60 s)";
    return secs < kBudgetSeconds;
}

// ---------------------------------------------------------------- criterion 6

bool criterion6(std::string& detail) {
    // (a) support-restricted SNR equals SNR when the supports cover the grid
    const SampledKernel k = sample_kernel(KernelSpec{1.0, 0.0, 0.0, 1e-4});
    {
        const std::size_t n = 9;
        std::vector<Peak> peaks{{2, 1.0}, {6, 0.5}};
        std::vector<double> s(n, 0.0);
        for (const Peak& p : peaks) s[p.position] = p.amplitude;
        const ConvolutionOperator conv(k, n);
        std::vector<double> p(n);
        conv.apply(s, p);
        std::vector<double> phat(p);
        for (std::size_t i = 0; i < n; ++i) phat[i] += 0.01 * static_cast<double>(i % 3);
        const auto sup = extract_supports(k, peaks, n, 0.05);
        if (!(sup[0].lo == 0 && sup[1].hi == n - 1)) {
            detail = "support union construction failed";
            return false;
        }
        const double tsnr = tsnr_db(p, phat, sup);
        const double snr = snr_db(p, phat);
        if (!(std::abs(tsnr - snr) <= 1e-12 * std::max(std::abs(tsnr), std::abs(snr)))) {
            detail = "full-support tsnr " + num(tsnr) + " vs snr " + num(snr);
            return false;
        }
    }

    // (b) normalized absolute error is invariant under a common pair scale
    {
        const std::vector<double> tv{1.0, 2.0, -3.0}, ev{1.5, 1.0, -3.0};
        std::vector<double> t4(tv), e4(ev), t3(tv), e3(ev);
        for (double& x : t4) x *= 4.0;
        for (double& x : e4) x *= 4.0;
        for (double& x : t3) x *= 3.7;
        for (double& x : e3) x *= 3.7;
        if (nmae(t4, e4) != nmae(tv, ev)) {
            detail = "nmae changed under a power-of-two pair scale";
            return false;
        }
        if (!testsup::close(nmae(t3, e3), nmae(tv, ev), 1e-12)) {
            detail = "nmae changed under an arbitrary pair scale";
            return false;
        }
    }

    // (c) oracle round-trip: morphology of the clean signal equals the truth
    //     morphology exactly, so every error aggregate is exactly zero
    {
        const SampledKernel kd = sample_kernel(KernelSpec{0.5, 0.2, 0.0, 1e-4});
        const std::size_t spacing = kd.taps.size() + 2, n = 80;
        SignalTriple rec;
        rec.s.assign(n, 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            const Peak pk{static_cast<std::uint32_t>(10 + j * spacing),
                          0.3 + 0.4 * static_cast<double>(j)};
            rec.peaks.push_back(pk);
            rec.s[pk.position] = pk.amplitude;
        }
        const ConvolutionOperator conv(kd, n);
        rec.p.resize(n);
        conv.apply(rec.s, rec.p);
        rec.z = rec.p;
        const RecordEvaluation ev = evaluate_record(kd, rec, rec.p);
        if (!(ev.metrics.nmae_h == 0.0 && ev.metrics.nmae_a == 0.0 &&
              ev.metrics.nmae_l == 0.0 && ev.metrics.mse == 0.0)) {
            detail = "oracle round-trip left nonzero morphology error";
            return false;
        }
    }

    // (d) trapezoid area of the unit triangle window
    if (trapezoid(std::vector<double>{0.0, 1.0, 0.0}) != 1.0) {
        detail = "trapezoid([0,1,0]) != 1";
        return false;
    }

    detail = "tsnr==snr on full support, nmae scale invariance, exact oracle round-trip, "
             "unit triangle area";
    return true;
}

// ---------------------------------------------------------------- criterion 7

bool criterion7(std::string& detail) {
    constexpr double kBudgetSeconds = 1800.0;
    const auto t0 = Clock::now();

    const std::array<const char*, 3> dnames{"D0", "D1", "D2"};
    const std::array<Method, 3> methods{Method::u_ista, Method::u_pd, Method::u_hq};
    const std::array<std::uint64_t, 3> seeds{101, 202, 303};
    constexpr std::size_t kLayers = 4;
    constexpr std::size_t kCgIters = 12;  // inner conjugate-gradient budget (u-hq)

    // D0-D2 share kernel, blur, and noise level; only the spike geometry
    // varies, so one forward model serves every training and evaluation.
    DatasetSpec base = dataset_preset("D0");
    base.n = 500;
    base.count_train = 200;
    base.count_val = 50;
    base.count_test = 50;
    const ComposedForwardModel fm =
        make_forward(sample_kernel(base.kernel_spec()), base.sigma_g, base.n);
    const double op_norm = fm.operator_norm();
    const double rho = default_constraint_radius(base.sigma_e, base.n);

    const auto scaled_spec = [&](std::size_t di, std::uint64_t seed) {
        DatasetSpec s = dataset_preset(dnames[di]);
        s.n = base.n;
        s.count_train = base.count_train;
        s.count_val = base.count_val;
        s.count_test = base.count_test;
        s.seed = seed;
        return s;
    };

    // Nine trainings -- three methods, each trained on three independent
    // replications of the easiest preset -- and 27 evaluations scoring every
    // network on the same-replication test split of each preset, so the
    // density trend measures a fixed restorer against growing spike density.
    // Every method gets the identical optimizer budget and keeps the
    // parameters of its best validation epoch; the budget is sized so the
    // slowest-converging network (u-hq) reaches its plateau region while the
    // L1 networks early-stop well inside it.  evals[seed][method][preset].
    TrainConfig cfg;
    cfg.epochs = 1200;
    cfg.batch = 4;
    cfg.lr = 5e-2;
    cfg.loss = LossDomain::peak;

    std::vector<DatasetEvaluation> evals(27);
    const auto at = [&](std::size_t si, std::size_t mi, std::size_t di) -> DatasetEvaluation& {
        return evals[9 * si + 3 * mi + di];
    };
    for (std::size_t si = 0; si < 3; ++si) {
        std::array<DatasetSpec, 3> specs;
        std::array<std::vector<SignalTriple>, 3> tests;
        for (std::size_t di = 0; di < 3; ++di) {
            specs[di] = scaled_spec(di, seeds[si]);
            tests[di] = generate_split(specs[di], Split::test, 1);
        }
        const auto train_recs = generate_split(specs[0], Split::train, 1);
        const auto val_recs = generate_split(specs[0], Split::val, 1);
        for (std::size_t mi = 0; mi < 3; ++mi) {
            UnrolledModel model =
                make_unrolled(method_variant(methods[mi]), kLayers, op_norm, rho, kCgIters);
            cfg.seed = seeds[si];
            const TrainResult tr =
                train_unrolled(std::move(model), fm, train_recs, val_recs, cfg);
            for (std::size_t di = 0; di < 3; ++di)
                at(si, mi, di) =
                    evaluate_dataset(fm, specs[di], tests[di], methods[mi], {}, &tr.model);
        }
    }

    // Every sub-clause is evaluated before reporting so one line carries the
    // complete picture either way.
    std::vector<std::string> failures;

    // --- sparsity difficulty: morphology error strictly grows with density
    std::string trend;
    for (std::size_t mi = 0; mi < 3; ++mi) {
        std::size_t good = 0;
        for (std::size_t si = 0; si < 3; ++si) {
            const double h0 = at(si, mi, 0).nmae_h.mean;
            const double h1 = at(si, mi, 1).nmae_h.mean;
            const double h2 = at(si, mi, 2).nmae_h.mean;
            if (h0 < h1 && h1 < h2) ++good;
        }
        trend += std::string(trend.empty() ? "" : "/") + std::to_string(good);
        if (good < 2)
            failures.push_back(std::string(method_name(methods[mi])) + " density trend in " +
                               std::to_string(good) + "/3 seeds");
    }

    // --- method ordering on the easiest set, and the area-error margin
    std::size_t best_wins = 0, margin_wins = 0;
    double worst_ratio = 0.0;
    for (std::size_t si = 0; si < 3; ++si) {
        const DatasetEvaluation& ei = at(si, 0, 0);
        const DatasetEvaluation& ep = at(si, 1, 0);
        const DatasetEvaluation& eh = at(si, 2, 0);
        const bool best = eh.snr.mean > ei.snr.mean && eh.snr.mean > ep.snr.mean &&
                          eh.tsnr.mean > ei.tsnr.mean && eh.tsnr.mean > ep.tsnr.mean &&
                          eh.nmae_h.mean < ei.nmae_h.mean && eh.nmae_h.mean < ep.nmae_h.mean &&
                          eh.nmae_a.mean < ei.nmae_a.mean && eh.nmae_a.mean < ep.nmae_a.mean;
        best_wins += best;
        const double ratio = eh.nmae_a.mean / std::min(ei.nmae_a.mean, ep.nmae_a.mean);
        worst_ratio = std::max(worst_ratio, ratio);
        margin_wins += ratio <= 0.5;
    }
    if (best_wins < 2)
        failures.push_back("u-hq best-in-four in " + std::to_string(best_wins) + "/3 seeds");
    if (margin_wins < 2)
        failures.push_back("NMAE(A) margin <= 0.5 in " + std::to_string(margin_wins) +
                           "/3 seeds (worst ratio " + num(worst_ratio) + ")");

    // --- shrinkage bias of the L1 networks: negative median height error on
    //     the easiest set (pooled over test seeds); overlapped peaks
    //     overestimate more often than isolated ones (pooled over presets and
    //     seeds: the easiest set has no overlapped peaks by construction)
    std::string bias;
    for (std::size_t mi = 0; mi < 2; ++mi) {  // u-ista and u-pd
        std::vector<double> signed_err;
        for (std::size_t si = 0; si < 3; ++si)
            for (const ScatterRow& r : at(si, mi, 0).scatter)
                signed_err.push_back(r.est_h - r.true_h);
        const double med = median(std::move(signed_err));
        std::size_t over_o = 0, n_o = 0, over_i = 0, n_i = 0;
        for (std::size_t si = 0; si < 3; ++si)
            for (std::size_t di = 0; di < 3; ++di)
                for (const ScatterRow& r : at(si, mi, di).scatter) {
                    if (r.overlapped) {
                        ++n_o;
                        over_o += r.est_h > r.true_h;
                    } else {
                        ++n_i;
                        over_i += r.est_h > r.true_h;
                    }
                }
        if (!(med < 0.0))
            failures.push_back(std::string(method_name(methods[mi])) +
                               " median height error " + num(med) + " not negative");
        if (n_o == 0 || n_i == 0) {
            failures.push_back("overlap pools are empty");
            continue;
        }
        const double rate_o = static_cast<double>(over_o) / static_cast<double>(n_o);
        const double rate_i = static_cast<double>(over_i) / static_cast<double>(n_i);
        if (!(rate_o > rate_i))
            failures.push_back(std::string(method_name(methods[mi])) + " overestimation rate " +
                               num(rate_o) + " (overlapped) !> " + num(rate_i) + " (isolated)");
        bias += std::string(bias.empty() ? "" : "; ") + method_name(methods[mi]) + " med " +
                num(med) + ", over-rate " + num(rate_o) + ">" + num(rate_i);
    }

    // --- per-record inference time ordering on the easiest set
    double rt[3] = {0.0, 0.0, 0.0};
    for (std::size_t mi = 0; mi < 3; ++mi)
        for (std::size_t si = 0; si < 3; ++si) rt[mi] += at(si, mi, 0).mean_solve_seconds / 3.0;
    if (!(rt[0] < rt[1] && rt[1] < rt[2]))
        failures.push_back("inference seconds " + num(rt[0]) + " / " + num(rt[1]) + " / " +
                           num(rt[2]) + " not ordered u-ista < u-pd < u-hq");

    const double secs = seconds_since(t0);
    if (secs >= kBudgetSeconds)
        failures.push_back("block took " + num(secs) + " s (budget 1800 s)");

    detail = "density trend " + trend + " seeds; u-hq best-in-four " +
             std::to_string(best_wins) + "/3, NMAE(A) margin " + std::to_string(margin_wins) +
             "/3 (worst ratio " + num(worst_ratio) + "); " + bias + "; inference s " +
             num(rt[0]) + "<" + num(rt[1]) + "<" + num(rt[2]) + "; total " + num(secs) + " s";
    if (!failures.empty()) {
        std::string joined;
        for (const std::string& f : failures)
            joined += (joined.empty() ? "" : "; ") + f;
        detail = joined + " -- " + detail;
    }
    return failures.empty();
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* label;
        bool (*fn)(std::string&);
    };
    const Entry entries[] = {
        {1, "benchmark presets and generation speed", criterion1},
        {2, "byte-identical artifacts across reruns and thread counts", criterion2},
        {3, "solver property suite", criterion3},
        {4, "frozen unrolled networks match classical iterations", criterion4},
        {5, "reverse-mode gradients match finite differences", criterion5},
        {6, "metric identities", criterion6},
        {7, "desk-scale trend reproduction", criterion7},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        bool ok = false;
        std::string detail;
        try {
            ok = e.fn(detail);
        } catch (const std::exception& ex) {
            ok = false;
            detail = std::string("exception: ") + ex.what();
        }
        for (char& c : detail)
            if (c == '\n') c = ' ';
        std::printf("%s criterion %d: %s%s%s%s\n", ok ? "PASS" : "FAIL", e.id, e.label,
                    detail.empty() ? "" : " (", detail.c_str(), detail.empty() ? "" : ")");
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
