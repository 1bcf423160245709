#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "chanest/dataset.hpp"

using namespace chanest;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    auto p = fs::temp_directory_path() / (std::string("chanest-test-") + tag);
    fs::remove_all(p);
    return p;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("build_dataset honors the imbalance ratio and class spread") {
    DatasetConfig cfg;
    cfg.total = 1200;  // 1:4 default => 240 NLoS / 960 LoS
    auto ds = build_dataset(cfg, 5);
    REQUIRE(ds.samples.size() == 1200);
    REQUIRE(ds.count_env(Environment::NLOS) == 240);
    REQUIRE(ds.count_env(Environment::LOS) == 960);
    for (const auto& scenario : all_scenario_classes()) {
        const int n = ds.class_counts.at(scenario_key(scenario));
        REQUIRE(n == (scenario.environment == Environment::LOS ? 160 : 40));
    }
}

TEST_CASE("build_dataset is deterministic and validates its config") {
    DatasetConfig cfg;
    cfg.total = 300;
    auto a = build_dataset(cfg, 9);
    auto b = build_dataset(cfg, 9);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) REQUIRE(a.samples[i].h == b.samples[i].h);

    auto c = build_dataset(cfg, 10);
    bool differs = false;
    for (std::size_t i = 0; i < a.samples.size() && !differs; ++i)
        differs = a.samples[i].h != c.samples[i].h;
    REQUIRE(differs);

    REQUIRE_THROWS_AS(build_dataset({0, 1, 4}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(build_dataset({100, 0, 4}, 1), std::invalid_argument);
}

TEST_CASE("save/load round-trips bit exactly") {
    DatasetConfig cfg;
    cfg.total = 240;
    auto ds = build_dataset(cfg, 77);
    ds.samples[3].origin = SampleOrigin::GAN_SYNTHETIC;
    ds.samples[3].generator_hash = 0xdeadbeef;
    ds.samples[5].augmented = true;

    auto dir = temp_dir("roundtrip");
    save_dataset(ds, dir);
    auto back = load_dataset(dir);

    REQUIRE(back.samples.size() == ds.samples.size());
    REQUIRE(back.seed == ds.seed);
    REQUIRE(back.class_counts == ds.class_counts);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        REQUIRE(back.samples[i].h == ds.samples[i].h);
        REQUIRE(back.samples[i].seed == ds.samples[i].seed);
        REQUIRE(back.samples[i].origin == ds.samples[i].origin);
        REQUIRE(back.samples[i].augmented == ds.samples[i].augmented);
        REQUIRE(back.samples[i].generator_hash == ds.samples[i].generator_hash);
        REQUIRE(scenario_key(back.samples[i].scenario) == scenario_key(ds.samples[i].scenario));
    }

    // Saving the loaded copy reproduces the original files byte for byte.
    auto dir2 = temp_dir("roundtrip2");
    save_dataset(back, dir2);
    REQUIRE(slurp(dir / "samples.bin") == slurp(dir2 / "samples.bin"));
    REQUIRE(slurp(dir / "manifest.json") == slurp(dir2 / "manifest.json"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("load_dataset raises distinct errors per corruption mode") {
    DatasetConfig cfg;
    cfg.total = 60;
    auto ds = build_dataset(cfg, 3);
    auto dir = temp_dir("corrupt");
    save_dataset(ds, dir);

    SECTION("truncated payload") {
        fs::resize_file(dir / "samples.bin", fs::file_size(dir / "samples.bin") - 8);
        REQUIRE_THROWS_AS(load_dataset(dir), TruncatedPayloadError);
    }
    SECTION("version mismatch") {
        std::ifstream mf(dir / "manifest.json");
        nlohmann::json man = nlohmann::json::parse(mf);
        mf.close();
        man["version"] = man["version"].get<int>() + 1;
        std::ofstream(dir / "manifest.json") << man.dump(2) << "\n";
        REQUIRE_THROWS_AS(load_dataset(dir), VersionMismatchError);
    }
    SECTION("manifest count mismatch") {
        std::ifstream mf(dir / "manifest.json");
        nlohmann::json man = nlohmann::json::parse(mf);
        mf.close();
        auto it = man["class_counts"].begin();
        *it = it->get<int>() + 1;
        std::ofstream(dir / "manifest.json") << man.dump(2) << "\n";
        REQUIRE_THROWS_AS(load_dataset(dir), CountMismatchError);
    }
    SECTION("missing directory") {
        REQUIRE_THROWS_AS(load_dataset(dir / "nope"), DatasetError);
    }
    fs::remove_all(dir);
}

TEST_CASE("clean_dataset removes power outliers under ZSCORE and IQR") {
    DatasetConfig cfg;
    cfg.total = 120;
    auto ds = build_dataset(cfg, 8);
    // Spread the inlier powers a little so the quartiles are not degenerate,
    // then push two samples far outside.
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const float f = 1.0f + 0.01f * float(i % 7);
        for (auto& v : ds.samples[i].h) v *= f;
    }
    for (std::size_t i : {std::size_t{10}, std::size_t{20}})
        for (auto& v : ds.samples[i].h) v *= 3.0f;

    auto [zds, zrem] = clean_dataset(ds, CleanPolicy::ZSCORE, 3.0);
    REQUIRE(zrem == std::vector<std::size_t>{10, 20});
    REQUIRE(zds.samples.size() == 118);

    auto [ids, irem] = clean_dataset(ds, CleanPolicy::IQR, 1.5);
    REQUIRE(irem == std::vector<std::size_t>{10, 20});
    REQUIRE(ids.class_counts.size() == zds.class_counts.size());

    // Order of survivors is preserved.
    REQUIRE(zds.samples[10].h == ds.samples[11].h);
}

TEST_CASE("clean_dataset HASH_DEDUP drops exact duplicates only") {
    DatasetConfig cfg;
    cfg.total = 60;
    auto ds = build_dataset(cfg, 4);
    ds.samples.push_back(ds.samples[7]);
    ds.samples.push_back(ds.samples[7]);
    ds.recount();

    auto [clean, removed] = clean_dataset(ds, CleanPolicy::HASH_DEDUP, 0.0);
    REQUIRE(removed == std::vector<std::size_t>{60, 61});
    REQUIRE(clean.samples.size() == 60);

    REQUIRE_THROWS_AS(clean_dataset(ChannelDataset{}, CleanPolicy::ZSCORE, 3.0), DatasetError);
}
