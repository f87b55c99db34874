// Command-line entry point: dataset generation, unrolled-network training,
// restoration evaluation, and report building.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numeric
// failure, 5 compatibility error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "peakdec/peakdec.hpp"

namespace fs = std::filesystem;
using namespace peakdec;

namespace {

// Relative output paths may be rebased with PEAKDEC_OUT_ROOT; inputs are
// always taken as given.
fs::path resolve_out(const fs::path& out) {
    if (out.is_absolute()) return out;
    if (const char* root = std::getenv("PEAKDEC_OUT_ROOT"); root != nullptr && *root != '\0')
        return fs::path(root) / out;
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw io_error("failed writing: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

struct GenArgs {
    std::string preset;
    std::string name;
    std::string out;
    DatasetSpec spec;  // explicit field overrides land here
    std::size_t threads = 1;
};

struct TrainArgs {
    std::string data;
    std::string method;
    std::string out;
    std::string loss = "peak";
    std::size_t k = 4;
    std::size_t cg_iters = 20;
    double rho = 0.0;
    TrainConfig cfg;
    std::size_t threads = 1;
};

struct EvalArgs {
    std::string data;
    std::string method;
    std::string checkpoint;
    std::string split = "test";
    std::string out;
    std::string format = "csv";
    bool svg = false;
    EvalOptions opt;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct ReportArgs {
    std::string results;
    std::string out;
};

int cmd_gen(const GenArgs& a, const DatasetSpec& spec_in) {
    DatasetSpec spec = spec_in;
    if (!a.name.empty()) spec.name = a.name;
    if (spec.name.empty()) spec.name = "custom";
    spec.validate();
    const fs::path out = resolve_out(a.out);
    const DatasetManifest man = generate_dataset(spec, out, a.threads);
    std::cout << "dataset: " << spec.name << "\n"
              << "manifest: " << (out / "manifest.json").string() << "\n"
              << "fingerprint: " << man.fingerprint << "\n";
    for (int s = 0; s < 3; ++s)
        std::cout << split_name(static_cast<Split>(s)) << " checksum: " << man.checksums[s]
                  << "\n";
    return 0;
}

int cmd_train(const TrainArgs& a) {
    if (a.k == 0) throw config_error("train: layer count must be at least 1");
    const Dataset ds = load_dataset(a.data);
    const ComposedForwardModel fm =
        make_forward(sample_kernel(ds.spec.kernel_spec()), ds.spec.sigma_g, ds.spec.n);
    const double op_norm = fm.operator_norm();
    const Variant variant = method_variant(parse_method(a.method));
    const double rho =
        a.rho > 0.0 ? a.rho : default_constraint_radius(ds.spec.sigma_e, ds.spec.n);
    UnrolledModel model = make_unrolled(variant, a.k, op_norm, rho, a.cg_iters);

    TrainConfig cfg = a.cfg;
    cfg.loss = parse_loss_domain(a.loss);
    cfg.threads = a.threads;
    const TrainResult result = train_unrolled(std::move(model), fm, ds.train, ds.val, cfg);

    const fs::path out = resolve_out(a.out);
    fs::create_directories(out);
    Checkpoint ck;
    ck.model = result.model;
    ck.dataset_fingerprint = ds.fingerprint;
    ck.loss = cfg.loss;
    ck.history = result.history;
    ck.best_epoch = result.best_epoch;
    ck.best_val = result.best_val;
    save_checkpoint(out / "checkpoint.json", ck);

    std::string hist = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.history.size(); ++e)
        hist += std::to_string(e + 1) + "," + f64_string(result.history[e].train_loss) + "," +
                f64_string(result.history[e].val_loss) + "\n";
    write_text(out / "history.csv", hist);

    nlohmann::ordered_json echo;
    echo["command"] = "train";
    echo["data"] = a.data;
    echo["dataset_fingerprint"] = ds.fingerprint;
    echo["method"] = a.method;
    echo["layers"] = a.k;
    echo["cg_iters"] = a.cg_iters;
    echo["rho"] = f64_string(rho);
    echo["loss"] = a.loss;
    echo["epochs"] = cfg.epochs;
    echo["batch"] = cfg.batch;
    echo["lr"] = f64_string(cfg.lr);
    echo["beta1"] = f64_string(cfg.beta1);
    echo["beta2"] = f64_string(cfg.beta2);
    echo["eps"] = f64_string(cfg.eps);
    echo["patience"] = cfg.patience;
    echo["seed"] = cfg.seed;
    write_json(out / "run-config.json", echo);

    std::cout << "checkpoint: " << (out / "checkpoint.json").string() << "\n"
              << "best epoch: " << result.best_epoch << "\n"
              << "best val loss: " << f64_string(result.best_val) << "\n";
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    if (a.format != "csv") throw config_error("eval: unsupported format: " + a.format);
    const Dataset ds = load_dataset(a.data);
    const ComposedForwardModel fm =
        make_forward(sample_kernel(ds.spec.kernel_spec()), ds.spec.sigma_g, ds.spec.n);
    const Method method = parse_method(a.method);

    UnrolledModel model;
    const UnrolledModel* model_ptr = nullptr;
    if (is_unrolled(method)) {
        if (a.checkpoint.empty())
            throw config_error("eval: unrolled methods require --checkpoint");
        const Checkpoint ck = load_checkpoint(a.checkpoint);
        if (ck.dataset_fingerprint != ds.fingerprint)
            throw compat_error("eval: checkpoint was trained on a different dataset (" +
                               ck.dataset_fingerprint + " vs " + ds.fingerprint + ")");
        model = ck.model;
        model_ptr = &model;
    }

    Split split = Split::test;
    if (a.split == "train") split = Split::train;
    else if (a.split == "val") split = Split::val;
    else if (a.split != "test") throw config_error("eval: unknown split: " + a.split);

    EvalOptions opt = a.opt;
    opt.threads = a.threads;
    const DatasetEvaluation ev =
        evaluate_dataset(fm, ds.spec, ds.split(split), method, opt, model_ptr);

    const fs::path out = resolve_out(a.out);
    fs::create_directories(out);
    const std::string stem = ds.spec.name + "_" + ev.method;
    write_metrics_csv(out / ("metrics_" + stem + ".csv"), {ev});
    write_scatter_csv(out / ("scatter_" + stem + ".csv"), ev.scatter);
    if (a.svg)
        write_text(out / ("scatter_" + stem + ".svg"),
                   scatter_svg(ev.scatter, ds.spec.name + " / " + ev.method));

    nlohmann::ordered_json echo;
    echo["command"] = "eval";
    echo["data"] = a.data;
    echo["dataset_fingerprint"] = ds.fingerprint;
    echo["method"] = ev.method;
    echo["split"] = a.split;
    echo["checkpoint"] = a.checkpoint;
    echo["theta"] = f64_string(opt.metrics.theta);
    echo["overlap_threshold"] = f64_string(opt.metrics.overlap_threshold);
    echo["literal_tsnr"] = opt.metrics.literal_tsnr;
    echo["chi"] = f64_string(opt.ista.chi);
    echo["rho"] = f64_string(opt.pd.rho);
    echo["max_iter_ista"] = opt.ista.max_iter;
    echo["max_iter_pd"] = opt.pd.max_iter;
    echo["max_iter_hq"] = opt.hq.max_iter;
    echo["cg_iters"] = opt.hq.cg_iters;
    write_json(out / ("run-config_" + stem + ".json"), echo);

    std::cout << "metrics: " << (out / ("metrics_" + stem + ".csv")).string() << "\n"
              << "scatter: " << (out / ("scatter_" + stem + ".csv")).string() << "\n"
              << "mean solve seconds: " << f64_string(ev.mean_solve_seconds) << "\n";
    return 0;
}

int cmd_report(const ReportArgs& a) {
    const std::string md = build_report(a.results);
    const fs::path out =
        a.out.empty() ? fs::path(a.results) / "report.md" : resolve_out(a.out);
    write_text(out, md);
    std::cout << "report: " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peakdec: simulate, restore, and score sparse peak signals"};
    app.require_subcommand(1);

    GenArgs g;
    CLI::App* gen = app.add_subcommand("gen", "Generate a dataset");
    gen->add_option("--preset", g.preset, "Named preset (D0..D6)");
    gen->add_option("--name", g.name, "Dataset name override");
    gen->add_option("--out", g.out, "Output directory")->required();
    // Field options; each may override the corresponding preset value.
    std::vector<std::pair<CLI::Option*, std::function<void(DatasetSpec&, const DatasetSpec&)>>>
        gen_overrides;
    const auto gen_field = [&](const char* flag, auto member, const char* help) {
        CLI::Option* o = gen->add_option(flag, g.spec.*member, help);
        gen_overrides.emplace_back(
            o, [member](DatasetSpec& dst, const DatasetSpec& src) { dst.*member = src.*member; });
    };
    gen_field("--n", &DatasetSpec::n, "Signal length");
    gen_field("--p-over-n", &DatasetSpec::p_over_n, "Spike density P/N");
    gen_field("--d-min", &DatasetSpec::d_min, "Minimum spike spacing");
    gen_field("--sigma-f", &DatasetSpec::sigma_f, "Kernel width");
    gen_field("--asymmetry", &DatasetSpec::a, "Kernel asymmetry");
    gen_field("--sigma-e", &DatasetSpec::sigma_e, "Noise standard deviation");
    gen_field("--sigma-g", &DatasetSpec::sigma_g, "Blur width");
    gen_field("--train", &DatasetSpec::count_train, "Training record count");
    gen_field("--val", &DatasetSpec::count_val, "Validation record count");
    gen_field("--test", &DatasetSpec::count_test, "Test record count");
    gen_field("--seed", &DatasetSpec::seed, "Master seed");
    gen->add_option("--threads", g.threads, "Worker threads");

    TrainArgs t;
    CLI::App* train = app.add_subcommand("train", "Train an unrolled network");
    train->add_option("--data", t.data, "Dataset directory")->required();
    train->add_option("--method", t.method, "u-ista | u-pd | u-hq")->required();
    train->add_option("--out", t.out, "Output directory")->required();
    train->add_option("--k", t.k, "Layer count");
    train->add_option("--cg-iters", t.cg_iters, "Inner conjugate-gradient count (u-hq)");
    train->add_option("--rho", t.rho, "Initial constraint radius (u-pd)");
    train->add_option("--loss", t.loss, "Loss domain: peak | spike")
        ->check(CLI::IsMember({"peak", "spike"}));
    train->add_option("--epochs", t.cfg.epochs, "Training epochs");
    train->add_option("--batch", t.cfg.batch, "Batch size");
    train->add_option("--lr", t.cfg.lr, "Learning rate");
    train->add_option("--patience", t.cfg.patience, "Early-stopping patience (0 = off)");
    train->add_option("--seed", t.cfg.seed, "Shuffle seed");
    train->add_option("--threads", t.threads, "Worker threads");

    EvalArgs e;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a restoration method");
    eval->add_option("--data", e.data, "Dataset directory")->required();
    eval->add_option("--method", e.method,
                     "oracle | zero | ista | pd | hq | u-ista | u-pd | u-hq")
        ->required();
    eval->add_option("--out", e.out, "Output directory")->required();
    eval->add_option("--checkpoint", e.checkpoint, "Checkpoint (unrolled methods)");
    eval->add_option("--split", e.split, "Split: train | val | test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_flag("--svg", e.svg, "Also render an SVG scatter plot");
    eval->add_option("--format", e.format, "Table format")->check(CLI::IsMember({"csv"}));
    eval->add_option("--theta", e.opt.metrics.theta, "Support membership threshold");
    eval->add_option("--overlap-threshold", e.opt.metrics.overlap_threshold,
                     "Overlap classification threshold");
    eval->add_flag("--literal-tsnr", e.opt.metrics.literal_tsnr,
                   "Use 20*log10 of the energy ratio");
    eval->add_option("--chi", e.opt.ista.chi, "L1 weight (ista)");
    eval->add_option("--rho", e.opt.pd.rho, "Constraint radius (pd)");
    eval->add_option("--ista-iters", e.opt.ista.max_iter, "Iteration cap (ista)");
    eval->add_option("--pd-iters", e.opt.pd.max_iter, "Iteration cap (pd)");
    eval->add_option("--hq-iters", e.opt.hq.max_iter, "Outer iteration cap (hq)");
    eval->add_option("--cg-iters", e.opt.hq.cg_iters, "Inner conjugate-gradient count (hq)");
    eval->add_option("--seed", e.seed, "Accepted for interface uniformity (eval is seed-free)");
    eval->add_option("--threads", e.threads, "Worker threads");

    ReportArgs r;
    CLI::App* report = app.add_subcommand("report", "Merge metric CSVs into a markdown summary");
    report->add_option("--results", r.results, "Directory containing metric CSVs")->required();
    report->add_option("--out", r.out, "Output markdown path (default: <results>/report.md)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            DatasetSpec spec = g.preset.empty() ? g.spec : dataset_preset(g.preset);
            if (!g.preset.empty()) {
                for (const auto& [opt, apply] : gen_overrides) {
                    if (opt->count() > 0) apply(spec, g.spec);
                }
            }
            return cmd_gen(g, spec);
        }
        if (train->parsed()) return cmd_train(t);
        if (eval->parsed()) return cmd_eval(e);
        if (report->parsed()) return cmd_report(r);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const config_error& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const io_error& ex) {
        std::cerr << "I/O error: " << ex.what() << "\n";
        return 3;
    } catch (const numeric_error& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return 4;
    } catch (const compat_error& ex) {
        std::cerr << "compatibility error: " << ex.what() << "\n";
        return 5;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
