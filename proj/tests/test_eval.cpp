#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chanest/eval.hpp"

using namespace chanest;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int count_lines(const fs::path& p) {
    std::ifstream f(p);
    int n = 0;
    std::string line;
    while (std::getline(f, line)) ++n;
    return n;
}

// A sweep configuration small enough for unit-test runtimes.
RunConfig lean_config(const std::string& out) {
    RunConfig cfg;
    cfg.dataset.total = 1600;
    cfg.seeds = {1};
    cfg.observations_per_cell = 6;
    cfg.calibration_samples = 40;
    cfg.snr_grid = {0, 20};
    cfg.gan.train.epochs = 2;
    cfg.denoiser.base_channels = 8;
    cfg.denoiser.num_blocks = 1;
    cfg.denoiser.time_embed_dim = 8;
    cfg.diffusion_train.epochs = 2;
    cfg.out_dir = out;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("nmse matches its defining examples") {
    std::vector<std::complex<float>> h(kGridSize, {1.0f, 1.0f});
    std::vector<std::complex<float>> zero(kGridSize, {0.0f, 0.0f});
    REQUIRE(nmse(h, h) == 0.0);
    REQUIRE(nmse(zero, h) == Catch::Approx(1.0));
    std::vector<std::complex<float>> twice(kGridSize, {2.0f, 2.0f});
    REQUIRE(nmse(twice, h) == Catch::Approx(1.0));

    // Scale awareness: nmse(cH_hat, cH) = nmse(H_hat, H).
    std::vector<std::complex<float>> est(kGridSize), est3(kGridSize), h3(kGridSize);
    Rng rng(2);
    for (int i = 0; i < kGridSize; ++i) {
        est[i] = {float(rng.gaussian()), float(rng.gaussian())};
        est3[i] = est[i] * 3.0f;
        h3[i] = h[i] * 3.0f;
    }
    REQUIRE(nmse(est3, h3) == Catch::Approx(nmse(est, h)));

    std::vector<std::complex<float>> short_vec(3);
    REQUIRE_THROWS_AS(nmse(short_vec, h), std::invalid_argument);
    REQUIRE_THROWS_AS(nmse(h, zero), std::invalid_argument);
}

TEST_CASE("ls_baseline_nmse tracks sigma^2") {
    REQUIRE(ls_baseline_nmse(0.0, 500, 1) == Catch::Approx(1.0).margin(0.05));
    REQUIRE(ls_baseline_nmse(10.0, 500, 1) == Catch::Approx(0.1).margin(0.01));
    REQUIRE(ls_baseline_nmse(40.0, 100, 1) < 1e-3);
    REQUIRE_THROWS_AS(ls_baseline_nmse(0.0, 0, 1), std::invalid_argument);
    REQUIRE(ls_baseline_nmse(0.0, 100, 7) == ls_baseline_nmse(0.0, 100, 7));
}

TEST_CASE("strategy names round-trip") {
    for (StrategyId s : {StrategyId::HALLUCINATION, StrategyId::NO_ATTENTION, StrategyId::NO_LLM,
                         StrategyId::INTEGRATED})
        REQUIRE(parse_strategy(to_string(s)) == s);
    REQUIRE_THROWS_AS(parse_strategy("BASELINE"), std::invalid_argument);
}

TEST_CASE("RunConfig JSON round-trip preserves every field") {
    RunConfig cfg;
    cfg.dataset.total = 777;
    cfg.dataset.nlos_parts = 2;
    cfg.pilot_spacing = 2;
    cfg.snr_grid = {-5, 5};
    cfg.seeds = {9, 10};
    cfg.observations_per_cell = 33;
    cfg.calibration_samples = 44;
    cfg.gan.train.epochs = 3;
    cfg.gan.noise_anchor = 0.5;
    cfg.denoiser.base_channels = 12;
    cfg.denoiser.num_blocks = 2;
    cfg.diffusion_train.epochs = 7;
    cfg.diffusion_train.learning_rate = 1e-3;
    cfg.strategies = {StrategyId::INTEGRATED};
    cfg.out_dir = "/tmp/x";
    cfg.llm_endpoint = "http://localhost:9999/v1";
    cfg.seed = 5;

    auto back = RunConfig::from_json(cfg.to_json());
    REQUIRE(back.to_json() == cfg.to_json());
    REQUIRE(back.dataset.total == 777);
    REQUIRE(back.pilot_spacing == 2);
    REQUIRE(back.seeds == std::vector<std::uint64_t>{9, 10});
    REQUIRE(back.strategies.size() == 1);
    REQUIRE(back.llm_endpoint == "http://localhost:9999/v1");

    nlohmann::json j = cfg.to_json();
    j["eval"]["seeds"] = nlohmann::json::array();
    REQUIRE_THROWS_AS(RunConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("emit_report writes the documented files and row counts") {
    EvalResult r;
    auto& sr = r.strategies[StrategyId::INTEGRATED];
    sr.loss_curve = {0.9, 0.5, 0.3};
    sr.nmse[0] = {0.5, 0.1, 10};
    sr.nmse[10] = {0.2, 0.05, 10};
    sr.flags = {0.1, 0.05, 0.02, 0.03};
    auto& h = r.strategies[StrategyId::HALLUCINATION];
    h.loss_curve = {1.0};
    h.nmse[0] = {0.7, 0.2, 10};
    h.flags = {0.3, 0.1, 0.1, 0.1};

    auto dir = fs::temp_directory_path() / "chanest-report-test";
    fs::remove_all(dir);
    emit_report(r, dir.string());

    REQUIRE(count_lines(dir / "nmse.csv") == 1 + 3);   // header + 3 cells
    REQUIRE(count_lines(dir / "loss.csv") == 1 + 4);   // header + 3 + 1 epochs
    REQUIRE(count_lines(dir / "flags.csv") == 1 + 8);  // header + 4 types x 2 strategies
    REQUIRE(fs::exists(dir / "loss_curves.svg"));
    REQUIRE(fs::exists(dir / "nmse_vs_snr.svg"));

    // Full-precision round-trip of the numeric fields.
    std::ifstream f(dir / "nmse.csv");
    std::string line;
    std::getline(f, line);  // header
    std::getline(f, line);  // HALLUCINATION,0,...
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    REQUIRE(tok == "HALLUCINATION");
    std::getline(ss, tok, ',');
    REQUIRE(tok == "0");
    std::getline(ss, tok, ',');
    REQUIRE(std::stod(tok) == 0.7);
    std::getline(ss, tok, ',');  // dB column
    std::getline(ss, tok, ',');
    REQUIRE(std::stod(tok) == 0.2);

    // Re-emitting the same result is byte-identical.
    auto dir2 = fs::temp_directory_path() / "chanest-report-test2";
    fs::remove_all(dir2);
    emit_report(r, dir2.string());
    for (const char* name : {"nmse.csv", "loss.csv", "flags.csv"})
        REQUIRE(slurp(dir / name) == slurp(dir2 / name));

    // Empty result -> header-only CSVs.
    auto dir3 = fs::temp_directory_path() / "chanest-report-test3";
    fs::remove_all(dir3);
    emit_report(EvalResult{}, dir3.string());
    REQUIRE(count_lines(dir3 / "nmse.csv") == 1);
    REQUIRE(count_lines(dir3 / "loss.csv") == 1);
    REQUIRE(count_lines(dir3 / "flags.csv") == 1);
    fs::remove_all(dir);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}

TEST_CASE("lean sweep fills every requested cell deterministically") {
    auto out1 = (fs::temp_directory_path() / "chanest-sweep-1").string();
    auto out2 = (fs::temp_directory_path() / "chanest-sweep-2").string();
    fs::remove_all(out1);
    fs::remove_all(out2);

    auto cfg = lean_config(out1);
    cfg.strategies = {StrategyId::HALLUCINATION, StrategyId::INTEGRATED};
    Pipeline pipe(cfg);
    auto r = sweep(pipe);
    REQUIRE(r.failed_cells.empty());
    REQUIRE(r.completed_cells.size() == 2 * cfg.snr_grid.size());
    for (auto sid : cfg.strategies) {
        const auto& sr = r.strategies.at(sid);
        REQUIRE(sr.nmse.size() == cfg.snr_grid.size());
        for (int snr : cfg.snr_grid) {
            REQUIRE(sr.nmse.at(snr).n == cfg.observations_per_cell);
            REQUIRE(sr.nmse.at(snr).mean >= 0.0);
        }
        REQUIRE_FALSE(sr.loss_curve.empty());
    }
    emit_report(r, out1);

    // Removing a strategy removes exactly its rows.
    const int rows_both = count_lines(fs::path(out1) / "nmse.csv");
    auto cfg_one = lean_config(out2);
    cfg_one.strategies = {StrategyId::HALLUCINATION};
    Pipeline pipe_one(cfg_one);
    auto r_one = sweep(pipe_one);
    emit_report(r_one, out2);
    REQUIRE(count_lines(fs::path(out2) / "nmse.csv") ==
            rows_both - int(cfg.snr_grid.size()));

    // Rerunning the identical two-strategy config is byte-identical.
    auto cfg_again = lean_config(out2);
    cfg_again.strategies = cfg.strategies;
    Pipeline pipe_again(cfg_again);
    emit_report(sweep(pipe_again), out2);
    for (const char* name : {"nmse.csv", "loss.csv", "flags.csv"})
        REQUIRE(slurp(fs::path(out1) / name) == slurp(fs::path(out2) / name));
    fs::remove_all(out1);
    fs::remove_all(out2);
}
