#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "peakdec/errors.hpp"
#include "peakdec/kernel.hpp"
#include "peakdec/operators.hpp"
#include "peakdec/parallel.hpp"
#include "peakdec/rng.hpp"
#include "peakdec/simulate.hpp"

namespace peakdec {

enum class Split : std::uint32_t { train = 0, val = 1, test = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

struct DatasetSpec {
    std::string name = "custom";
    std::size_t n = 2000;
    double p_over_n = 0.015;
    std::size_t d_min = 5;
    double sigma_f = 0.5;
    double a = 0.2;
    double sigma_e = 0.02;
    double sigma_g = 1.0;
    std::uint64_t seed = 0;
    std::size_t count_train = 1000;
    std::size_t count_val = 200;
    std::size_t count_test = 200;

    std::size_t spike_count() const {
        return static_cast<std::size_t>(std::llround(p_over_n * static_cast<double>(n)));
    }

    void validate() const {
        if (n < 1) throw config_error("dataset: n must be >= 1");
        if (!(p_over_n > 0.0 && p_over_n < 1.0)) throw config_error("dataset: p_over_n must lie in (0,1)");
        if (d_min < 1) throw config_error("dataset: d_min must be >= 1");
        if (!(sigma_e >= 0.0)) throw config_error("dataset: sigma_e must be nonnegative");
        if (!(sigma_g > 0.0)) throw config_error("dataset: sigma_g must be positive");
        if (!(sigma_f > 0.0)) throw config_error("dataset: sigma_f must be positive");
        if (!(a >= 0.0)) throw config_error("dataset: a must be nonnegative");
        const std::size_t P = spike_count();
        if (P < 1) throw config_error("dataset: p_over_n*n rounds to zero spikes");
        if (P * d_min > n)
            throw config_error("dataset: " + std::to_string(P) + " spikes at d_min " +
                               std::to_string(d_min) + " do not fit in n=" + std::to_string(n));
    }

    KernelSpec kernel_spec() const { return KernelSpec{sigma_f, a, 0.0, 1e-4}; }

    std::size_t split_count(Split s) const {
        switch (s) {
            case Split::train: return count_train;
            case Split::val: return count_val;
            case Split::test: return count_test;
        }
        return 0;
    }
};

// Benchmark presets. sigma_g = 1 and n = 2000 throughout; the columns vary
// sparsity (D0-D2), asymmetry (D3-D4) and noise level (D5-D6).
inline DatasetSpec dataset_preset(const std::string& name) {
    DatasetSpec d;
    d.name = name;
    if (name == "D0") {
        d.p_over_n = 0.015, d.d_min = 5, d.a = 0.2, d.sigma_e = 0.02;
    } else if (name == "D1") {
        d.p_over_n = 0.03, d.d_min = 3, d.a = 0.2, d.sigma_e = 0.02;
    } else if (name == "D2") {
        d.p_over_n = 0.045, d.d_min = 1, d.a = 0.2, d.sigma_e = 0.02;
    } else if (name == "D3") {
        d.p_over_n = 0.015, d.d_min = 5, d.a = 0.4, d.sigma_e = 0.02;
    } else if (name == "D4") {
        d.p_over_n = 0.015, d.d_min = 5, d.a = 0.6, d.sigma_e = 0.02;
    } else if (name == "D5") {
        d.p_over_n = 0.03, d.d_min = 3, d.a = 0.2, d.sigma_e = 0.04;
    } else if (name == "D6") {
        d.p_over_n = 0.03, d.d_min = 3, d.a = 0.2, d.sigma_e = 0.06;
    } else {
        throw config_error("unknown dataset preset '" + name + "'");
    }
    return d;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Hash of the fields that pin down the generated data and forward model.
// Checkpoints carry this value; evaluation refuses mismatched pairs.
inline std::string dataset_fingerprint(const DatasetSpec& d) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "n=%zu;p_over_n=%.17g;d_min=%zu;sigma_f=%.17g;a=%.17g;sigma_e=%.17g;sigma_g=%.17g;seed=%llu;counts=%zu/%zu/%zu",
                  d.n, d.p_over_n, d.d_min, d.sigma_f, d.a, d.sigma_e, d.sigma_g,
                  static_cast<unsigned long long>(d.seed), d.count_train, d.count_val, d.count_test);
    return to_hex(fnv1a64(buf, std::strlen(buf)));
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    const unsigned char* p;
    const unsigned char* end;
    void need(std::size_t k) const {
        if (static_cast<std::size_t>(end - p) < k) throw io_error("dataset file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

} // namespace detail

// Binary split file: magic "PKF1", u64 record count, then per record
// u32 n, u32 P, the s/p/z arrays as little-endian f64, and P (u32 position,
// f64 amplitude) pairs.
inline std::string encode_split(const std::vector<SignalTriple>& records) {
    std::string out;
    out.append("PKF1");
    detail::put_u64(out, records.size());
    for (const auto& rec : records) {
        detail::put_u32(out, static_cast<std::uint32_t>(rec.s.size()));
        detail::put_u32(out, static_cast<std::uint32_t>(rec.peaks.size()));
        for (double v : rec.s) detail::put_f64(out, v);
        for (double v : rec.p) detail::put_f64(out, v);
        for (double v : rec.z) detail::put_f64(out, v);
        for (const auto& pk : rec.peaks) {
            detail::put_u32(out, pk.position);
            detail::put_f64(out, pk.amplitude);
        }
    }
    return out;
}

inline std::vector<SignalTriple> decode_split(const std::string& bytes) {
    detail::Reader rd{reinterpret_cast<const unsigned char*>(bytes.data()),
                      reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size()};
    rd.need(4);
    if (std::memcmp(rd.p, "PKF1", 4) != 0) throw io_error("dataset file: bad magic (expected PKF1)");
    rd.p += 4;
    const std::uint64_t count = rd.u64();
    std::vector<SignalTriple> records;
    records.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        SignalTriple rec;
        const std::uint32_t n = rd.u32();
        const std::uint32_t P = rd.u32();
        rec.s.resize(n);
        rec.p.resize(n);
        rec.z.resize(n);
        for (auto& v : rec.s) v = rd.f64();
        for (auto& v : rec.p) v = rd.f64();
        for (auto& v : rec.z) v = rd.f64();
        rec.peaks.resize(P);
        for (auto& pk : rec.peaks) {
            pk.position = rd.u32();
            pk.amplitude = rd.f64();
        }
        records.push_back(std::move(rec));
    }
    if (rd.p != rd.end) throw io_error("dataset file: trailing bytes");
    return records;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

inline nlohmann::ordered_json spec_to_json(const DatasetSpec& d) {
    nlohmann::ordered_json j;
    j["name"] = d.name;
    j["n"] = d.n;
    j["p_over_n"] = d.p_over_n;
    j["d_min"] = d.d_min;
    j["sigma_f"] = d.sigma_f;
    j["a"] = d.a;
    j["sigma_e"] = d.sigma_e;
    j["sigma_g"] = d.sigma_g;
    j["seed"] = d.seed;
    j["count_train"] = d.count_train;
    j["count_val"] = d.count_val;
    j["count_test"] = d.count_test;
    return j;
}

inline DatasetSpec spec_from_json(const nlohmann::json& j) {
    DatasetSpec d;
    try {
        d.name = j.at("name").get<std::string>();
        d.n = j.at("n").get<std::size_t>();
        d.p_over_n = j.at("p_over_n").get<double>();
        d.d_min = j.at("d_min").get<std::size_t>();
        d.sigma_f = j.at("sigma_f").get<double>();
        d.a = j.at("a").get<double>();
        d.sigma_e = j.at("sigma_e").get<double>();
        d.sigma_g = j.at("sigma_g").get<double>();
        d.seed = j.at("seed").get<std::uint64_t>();
        d.count_train = j.at("count_train").get<std::size_t>();
        d.count_val = j.at("count_val").get<std::size_t>();
        d.count_test = j.at("count_test").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("manifest: ") + e.what());
    }
    return d;
}

// Generates one split in memory. Record r of split s draws everything from
// substream (seed, split id, r), so results do not depend on worker count.
inline std::vector<SignalTriple> generate_split(const DatasetSpec& spec, Split split, unsigned threads = 1) {
    spec.validate();
    const ComposedForwardModel fm(sample_kernel(spec.kernel_spec()), spec.sigma_g, spec.n);
    const std::size_t count = spec.split_count(split);
    const std::size_t P = spec.spike_count();
    std::vector<SignalTriple> records(count);
    parallel_for(count, threads, [&](std::size_t r) {
        Rng rng = substream(spec.seed, static_cast<std::uint64_t>(split), r);
        records[r] = make_record(fm, P, spec.d_min, spec.sigma_e, rng);
    });
    return records;
}

struct DatasetManifest {
    DatasetSpec spec;
    std::string fingerprint;
    std::array<std::string, 3> checksums; // train, val, test
};

// Writes manifest.json plus train/val/test.pkf into out_dir.
inline DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                        unsigned threads = 1) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());

    DatasetManifest man;
    man.spec = spec;
    man.fingerprint = dataset_fingerprint(spec);
    nlohmann::ordered_json j = spec_to_json(spec);
    j["format"] = "peakdec-dataset/1";
    j["fingerprint"] = man.fingerprint;
    nlohmann::ordered_json sums;
    for (Split split : {Split::train, Split::val, Split::test}) {
        const auto records = generate_split(spec, split, threads);
        const std::string bytes = encode_split(records);
        const std::string fname = std::string(split_name(split)) + ".pkf";
        write_file(out_dir / fname, bytes);
        const std::string sum = to_hex(fnv1a64(bytes.data(), bytes.size()));
        man.checksums[static_cast<std::size_t>(split)] = sum;
        sums[fname] = sum;
    }
    j["checksums"] = sums;
    write_file(out_dir / "manifest.json", j.dump(2) + "\n");
    return man;
}

struct Dataset {
    DatasetSpec spec;
    std::string fingerprint;
    std::vector<SignalTriple> train, val, test;

    const std::vector<SignalTriple>& split(Split s) const {
        switch (s) {
            case Split::train: return train;
            case Split::val: return val;
            case Split::test: return test;
        }
        throw config_error("bad split");
    }
};

inline Dataset load_dataset(const std::filesystem::path& dir, bool verify_checksums = true) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) throw io_error("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("manifest parse: ") + e.what());
    }
    Dataset ds;
    ds.spec = spec_from_json(j);
    ds.fingerprint = j.value("fingerprint", dataset_fingerprint(ds.spec));
    for (Split split : {Split::train, Split::val, Split::test}) {
        const std::string fname = std::string(split_name(split)) + ".pkf";
        const std::string bytes = read_file(dir / fname);
        if (verify_checksums && j.contains("checksums")) {
            const std::string expect = j["checksums"].value(fname, "");
            const std::string got = to_hex(fnv1a64(bytes.data(), bytes.size()));
            if (!expect.empty() && expect != got)
                throw io_error("checksum mismatch for " + (dir / fname).string());
        }
        auto records = decode_split(bytes);
        switch (split) {
            case Split::train: ds.train = std::move(records); break;
            case Split::val: ds.val = std::move(records); break;
            case Split::test: ds.test = std::move(records); break;
        }
    }
    return ds;
}

} // namespace peakdec
