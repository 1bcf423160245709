#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "chanest/channel.hpp"

namespace chanest {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionMismatchError : DatasetError {
    using DatasetError::DatasetError;
};
struct TruncatedPayloadError : DatasetError {
    using DatasetError::DatasetError;
};
struct CountMismatchError : DatasetError {
    using DatasetError::DatasetError;
};

struct DatasetConfig {
    int total = 10000;
    int nlos_parts = 1;  // NLoS:LoS imbalance ratio, default 1:4
    int los_parts = 4;
};

struct ChannelDataset {
    std::vector<ChannelSample> samples;
    std::map<std::string, int> class_counts;
    nlohmann::json generator_params;
    std::uint64_t seed = 0;

    void recount() {
        class_counts.clear();
        for (const auto& s : samples) class_counts[scenario_key(s.scenario)]++;
    }

    int count_env(Environment e) const {
        int n = 0;
        for (const auto& s : samples)
            if (s.scenario.environment == e) ++n;
        return n;
    }
};

// Deterministic imbalanced dataset: the NLoS:LoS split follows the
// configured ratio, each environment is split uniformly over its six
// band/mobility classes, and the final order is a seeded shuffle.
inline ChannelDataset build_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
    if (cfg.total <= 0) throw std::invalid_argument("dataset size must be positive");
    if (cfg.nlos_parts <= 0 || cfg.los_parts <= 0)
        throw std::invalid_argument("imbalance ratio parts must be positive");

    const int nlos_total = static_cast<int>(
        static_cast<long long>(cfg.total) * cfg.nlos_parts / (cfg.nlos_parts + cfg.los_parts));
    const int los_total = cfg.total - nlos_total;

    auto classes = all_scenario_classes();
    std::vector<int> counts(kNumScenarioClasses, 0);
    for (int ci = 0; ci < kNumScenarioClasses; ++ci) {
        const bool los = classes[ci].environment == Environment::LOS;
        const int env_total = los ? los_total : nlos_total;
        const int within = ci % 6;
        counts[ci] = env_total / 6 + (within < env_total % 6 ? 1 : 0);
    }

    ChannelDataset ds;
    ds.seed = seed;
    ds.samples.reserve(cfg.total);
    std::uint64_t idx = 0;
    for (int ci = 0; ci < kNumScenarioClasses; ++ci)
        for (int k = 0; k < counts[ci]; ++k)
            ds.samples.push_back(generate_channel(classes[ci], derive_seed(seed, "sample", idx++)));

    // Fisher-Yates with the project RNG keeps the order platform-stable.
    Rng rng(derive_seed(seed, "shuffle"));
    for (std::size_t i = ds.samples.size(); i > 1; --i)
        std::swap(ds.samples[i - 1], ds.samples[rng.uniform_index(i)]);

    ds.generator_params = {{"total", cfg.total},
                           {"nlos_parts", cfg.nlos_parts},
                           {"los_parts", cfg.los_parts}};
    ds.recount();
    return ds;
}

// On-disk layout: <dir>/manifest.json + <dir>/samples.bin. The payload is
// little-endian float32, interleaved re/im, [sample][antenna][subcarrier].
inline void save_dataset(const ChannelDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json man;
    man["version"] = kDatasetFormatVersion;
    man["grid"] = {kNumAntennas, kNumSubcarriers};
    man["seed"] = ds.seed;
    man["generator_params"] = ds.generator_params;
    man["class_counts"] = ds.class_counts;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& s : ds.samples) {
        nlohmann::json r = {{"scenario", scenario_key(s.scenario)},
                            {"seed", s.seed},
                            {"origin", to_string(s.origin)}};
        if (s.augmented) r["augmented"] = true;
        if (s.generator_hash != 0) r["generator_hash"] = s.generator_hash;
        recs.push_back(std::move(r));
    }
    man["samples"] = std::move(recs);
    {
        std::ofstream mf(dir / "manifest.json");
        if (!mf) throw DatasetError("cannot write " + (dir / "manifest.json").string());
        mf << man.dump(2) << "\n";
    }
    std::ofstream bf(dir / "samples.bin", std::ios::binary);
    if (!bf) throw DatasetError("cannot write " + (dir / "samples.bin").string());
    for (const auto& s : ds.samples) {
        static_assert(sizeof(std::complex<float>) == 8);
        bf.write(reinterpret_cast<const char*>(s.h.data()), kGridSize * 8);
    }
}

inline ChannelDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw DatasetError("cannot read " + (dir / "manifest.json").string());
    nlohmann::json man = nlohmann::json::parse(mf);
    if (!man.contains("version") || man["version"].get<int>() != kDatasetFormatVersion)
        throw VersionMismatchError("unsupported dataset format version");

    ChannelDataset ds;
    ds.seed = man.value("seed", std::uint64_t{0});
    ds.generator_params = man.value("generator_params", nlohmann::json::object());
    const auto& recs = man.at("samples");

    std::ifstream bf(dir / "samples.bin", std::ios::binary);
    if (!bf) throw DatasetError("cannot read " + (dir / "samples.bin").string());
    bf.seekg(0, std::ios::end);
    const std::uint64_t bytes = static_cast<std::uint64_t>(bf.tellg());
    bf.seekg(0);
    if (bytes != recs.size() * static_cast<std::uint64_t>(kGridSize) * 8)
        throw TruncatedPayloadError("samples.bin size does not match sample count");

    ds.samples.resize(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto& s = ds.samples[i];
        s.scenario = parse_scenario_key(recs[i].at("scenario").get<std::string>());
        s.seed = recs[i].at("seed").get<std::uint64_t>();
        s.origin = parse_origin(recs[i].at("origin").get<std::string>());
        s.augmented = recs[i].value("augmented", false);
        s.generator_hash = recs[i].value("generator_hash", std::uint64_t{0});
        bf.read(reinterpret_cast<char*>(s.h.data()), kGridSize * 8);
        if (!bf) throw TruncatedPayloadError("samples.bin truncated");
    }

    std::map<std::string, int> actual;
    for (const auto& s : ds.samples) actual[scenario_key(s.scenario)]++;
    auto declared = man.value("class_counts", nlohmann::json::object());
    for (auto& [key, cnt] : declared.items())
        if (actual[key] != cnt.get<int>())
            throw CountMismatchError("manifest count mismatch for class " + key);
    for (auto& [key, cnt] : actual)
        if (!declared.contains(key) && cnt > 0)
            throw CountMismatchError("manifest missing class " + key);
    ds.class_counts = std::move(actual);
    return ds;
}

enum class CleanPolicy { ZSCORE, IQR, HASH_DEDUP };

namespace detail {

inline double quantile_linear(std::vector<double> sorted, double q) {
    const double pos = q * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - lo;
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline std::uint64_t quantized_hash(const ChannelSample& s) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::int64_t q) {
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<unsigned char>(q >> (8 * b));
            h *= 1099511628211ull;
        }
    };
    for (auto v : s.h) {
        mix(std::llround(static_cast<double>(v.real()) * 1e6));
        mix(std::llround(static_cast<double>(v.imag()) * 1e6));
    }
    return h;
}

}  // namespace detail

// Outlier/duplicate removal over per-sample total power (ZSCORE, IQR) or
// the quantized payload hash (HASH_DEDUP). Returns the surviving dataset
// (order preserved) and the removed indices.
// ZSCORE threshold is the |z| cutoff (default 3.0); IQR threshold is the
// whisker multiplier (default 1.5).
inline std::pair<ChannelDataset, std::vector<std::size_t>> clean_dataset(const ChannelDataset& ds,
                                                                         CleanPolicy policy,
                                                                         double threshold) {
    if (ds.samples.empty()) throw DatasetError("clean_dataset: empty dataset");
    std::vector<bool> removed(ds.samples.size(), false);

    if (policy == CleanPolicy::HASH_DEDUP) {
        std::map<std::uint64_t, std::size_t> seen;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const std::uint64_t h = detail::quantized_hash(ds.samples[i]);
            if (!seen.emplace(h, i).second) removed[i] = true;
        }
    } else {
        std::vector<double> power(ds.samples.size());
        for (std::size_t i = 0; i < ds.samples.size(); ++i) power[i] = ds.samples[i].total_power();
        if (policy == CleanPolicy::ZSCORE) {
            const double mean = std::accumulate(power.begin(), power.end(), 0.0) / power.size();
            double var = 0.0;
            for (double p : power) var += (p - mean) * (p - mean);
            const double sd = std::sqrt(var / power.size());
            if (sd > 0.0)
                for (std::size_t i = 0; i < power.size(); ++i)
                    if (std::abs(power[i] - mean) / sd > threshold) removed[i] = true;
        } else {
            std::vector<double> sorted = power;
            std::sort(sorted.begin(), sorted.end());
            const double q1 = detail::quantile_linear(sorted, 0.25);
            const double q3 = detail::quantile_linear(sorted, 0.75);
            const double iqr = q3 - q1;
            for (std::size_t i = 0; i < power.size(); ++i)
                if (power[i] < q1 - threshold * iqr || power[i] > q3 + threshold * iqr)
                    removed[i] = true;
        }
    }

    ChannelDataset out;
    out.seed = ds.seed;
    out.generator_params = ds.generator_params;
    std::vector<std::size_t> removed_idx;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (removed[i]) removed_idx.push_back(i);
        else out.samples.push_back(ds.samples[i]);
    }
    out.recount();
    return {std::move(out), std::move(removed_idx)};
}

}  // namespace chanest
