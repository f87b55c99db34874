#pragma once
// Checkpoint files for trained unrolled models.  JSON with every double
// rendered as a 17-significant-digit decimal string, which round-trips
// IEEE-754 binary64 exactly, so reload-and-evaluate is bit-identical.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "peakdec/errors.hpp"
#include "peakdec/format.hpp"
#include "peakdec/train.hpp"
#include "peakdec/unrolled.hpp"

namespace peakdec {

inline constexpr const char* kCheckpointFormat = "peakdec-checkpoint/1";

struct Checkpoint {
    UnrolledModel model;
    std::string dataset_fingerprint;  // fingerprint of the training dataset
    LossDomain loss = LossDomain::peak;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::ordered_json j;
    j["format"] = kCheckpointFormat;
    j["variant"] = variant_name(ck.model.variant);
    j["layers"] = ck.model.layers;
    j["cg_iters"] = ck.model.cg_iters;
    j["loss"] = loss_domain_name(ck.loss);
    j["dataset_fingerprint"] = ck.dataset_fingerprint;
    nlohmann::ordered_json raw = nlohmann::ordered_json::array();
    for (const double v : ck.model.raw) raw.push_back(f64_string(v));
    j["raw_params"] = std::move(raw);
    j["best_epoch"] = ck.best_epoch;
    j["best_val"] = f64_string(ck.best_val);
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const EpochStats& e : ck.history) {
        nlohmann::ordered_json row;
        row["train"] = f64_string(e.train_loss);
        row["val"] = f64_string(e.val_loss);
        hist.push_back(std::move(row));
    }
    j["history"] = std::move(hist);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw io_error("failed writing checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed checkpoint JSON in " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat)
        throw compat_error("unsupported checkpoint format in " + path.string());
    Checkpoint ck;
    try {
        ck.model.variant = parse_variant(j.at("variant").get<std::string>());
        ck.model.layers = j.at("layers").get<std::size_t>();
        ck.model.cg_iters = j.at("cg_iters").get<std::size_t>();
        ck.loss = parse_loss_domain(j.value("loss", "peak"));
        ck.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
        for (const auto& v : j.at("raw_params"))
            ck.model.raw.push_back(f64_parse(v.get<std::string>()));
        ck.best_epoch = j.value("best_epoch", std::size_t{0});
        ck.best_val = f64_parse(j.value("best_val", std::string{"0"}));
        if (j.contains("history")) {
            for (const auto& row : j.at("history")) {
                EpochStats e;
                e.train_loss = f64_parse(row.at("train").get<std::string>());
                e.val_loss = f64_parse(row.at("val").get<std::string>());
                ck.history.push_back(e);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error("invalid checkpoint contents in " + path.string() + ": " + e.what());
    }
    if (ck.model.raw.size() != ck.model.param_count())
        throw compat_error("checkpoint parameter count does not match variant/layers in " +
                           path.string());
    return ck;
}

}  // namespace peakdec
