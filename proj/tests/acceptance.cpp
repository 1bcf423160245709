// Acceptance gate: one PASS/FAIL line per criterion, exit 0 only if all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "chanest/eval.hpp"

using namespace chanest;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, bool ok, const std::string& detail) {
    std::printf("CRITERION %d: %s — %s\n", idx, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// --- 1: analytic NMSE anchor -------------------------------------------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const double at0 = ls_baseline_nmse(0.0, 2000, 42);
    const double at10 = ls_baseline_nmse(10.0, 2000, 42);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(at0 - 1.0) <= 0.05 && std::abs(at10 - 0.1) <= 0.01 && secs < 10.0;
    report(1, ok,
           "ls_baseline_nmse(0dB)=" + fmt(at0) + " (want 1.00±0.05), (10dB)=" + fmt(at10) +
               " (want 0.10±0.01), " + fmt(secs) + "s (<10s)");
}

// --- 2: schedule and forward process ----------------------------------------
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const NoiseSchedule s = make_schedule();
    bool monotone = true;
    for (int t = 1; t < s.T; ++t) monotone &= s.alpha_bar[t] < s.alpha_bar[t - 1];
    const bool tail = s.alpha_bar.back() < 0.05;

    // Per-entry variance of x_T for unit-variance x0 and eps over 10,000 draws.
    Rng rng(7);
    const int draws = 10000;
    nn::Tensor<float> x0({1, draws}), eps({1, draws});
    for (auto& v : x0.v) v = static_cast<float>(rng.gaussian());
    for (auto& v : eps.v) v = static_cast<float>(rng.gaussian());
    auto xt = q_sample(x0, s.T, eps, s);
    double var = 0.0;
    for (float v : xt.v) var += static_cast<double>(v) * v;
    var /= draws;
    const double secs = seconds_since(t0);
    const bool ok = monotone && tail && var >= 0.9 && var <= 1.1 && secs < 30.0;
    report(2, ok,
           std::string("alpha_bar monotone=") + (monotone ? "yes" : "no") +
               ", alpha_bar_60=" + fmt(s.alpha_bar.back()) + " (<0.05), q_sample var=" + fmt(var) +
               " (in [0.9,1.1]), " + fmt(secs) + "s (<30s)");
}

// --- 3: gradient fidelity ----------------------------------------------------
void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    DenoiserConfig cfg;
    cfg.base_channels = 16;
    cfg.num_blocks = 2;
    cfg.time_embed_dim = 16;
    cfg.attention = true;
    Denoiser<double> d;
    d.init(cfg, 3);

    Rng rng(11);
    nn::Tensor<double> x({2, 5, kNumAntennas, kNumSubcarriers});
    for (auto& v : x.v) v = rng.gaussian();
    nn::Tensor<double> target({2, 2, kNumAntennas, kNumSubcarriers});
    for (auto& v : target.v) v = rng.gaussian();
    const std::vector<int> ts = {5, 37};

    auto loss = [&](bool with_grad) {
        auto y = d.forward(x, ts);
        double l = 0.0;
        nn::Tensor<double> g(y.shape);
        const double inv = 1.0 / static_cast<double>(y.v.size());
        for (std::size_t i = 0; i < y.v.size(); ++i) {
            const double e = y.v[i] - target.v[i];
            l += e * e * inv;
            g.v[i] = 2.0 * e * inv;
        }
        if (with_grad) d.backward(g);
        return l;
    };
    const double err = nn::gradient_check<double>(d.params(), loss, 1e-5, 50, 13);
    const double secs = seconds_since(t0);
    const bool ok = err < 1e-3 && secs < 120.0;
    report(3, ok,
           "denoiser(attention) gradient_check max rel err=" + fmt(err) + " (<0.001), " +
               fmt(secs) + "s (<120s)");
}

// --- 4: balancing exactness; 9: dataset round-trip ---------------------------
void criteria_4_and_9() {
    auto t0 = std::chrono::steady_clock::now();
    DatasetConfig dcfg;
    dcfg.total = 10000;  // default 1:4 parts -> 2,000 NLoS / 8,000 LoS
    ChannelDataset ds = build_dataset(dcfg, 2024);
    const auto originals = ds.samples;

    std::vector<const ChannelSample*> nlos;
    for (const auto& s : ds.samples)
        if (s.scenario.environment == Environment::NLOS) nlos.push_back(&s);

    GanConfig gcfg;
    gcfg.train.batch_size = 32;
    gcfg.train.epochs = 40;
    gcfg.train.seed = 5;
    Gan gan;
    train_gan(gan, nlos, gcfg);
    ChannelDataset bal = balance_dataset(ds, gan, 77);

    int synth = 0;
    for (const auto& s : bal.samples) synth += s.origin == SampleOrigin::GAN_SYNTHETIC;
    bool untouched = bal.samples.size() >= originals.size();
    for (std::size_t i = 0; i < originals.size() && untouched; ++i)
        untouched = bal.samples[i].h == originals[i].h &&
                    bal.samples[i].origin == originals[i].origin &&
                    scenario_key(bal.samples[i].scenario) == scenario_key(originals[i].scenario);
    const double secs4 = seconds_since(t0);
    const bool ok4 = ds.count_env(Environment::LOS) == 8000 &&
                     ds.count_env(Environment::NLOS) == 2000 &&
                     bal.count_env(Environment::LOS) == 8000 &&
                     bal.count_env(Environment::NLOS) == 8000 && synth == 6000 && untouched &&
                     secs4 < 600.0;
    report(4, ok4,
           "8000/2000 -> " + std::to_string(bal.count_env(Environment::LOS)) + "/" +
               std::to_string(bal.count_env(Environment::NLOS)) + ", synthetic=" +
               std::to_string(synth) + " (want 6000), real samples unmutated=" +
               (untouched ? "yes" : "no") + ", " + fmt(secs4) + "s (<600s)");

    // Criterion 9 reuses the same 10,000-sample dataset.
    const fs::path dir = fs::temp_directory_path() / "chanest-acceptance-ds";
    fs::remove_all(dir);
    save_dataset(ds, dir);
    ChannelDataset back = load_dataset(dir);
    bool exact = back.samples.size() == ds.samples.size();
    for (std::size_t i = 0; i < ds.samples.size() && exact; ++i)
        exact = back.samples[i].h == ds.samples[i].h &&
                back.samples[i].seed == ds.samples[i].seed &&
                scenario_key(back.samples[i].scenario) == scenario_key(ds.samples[i].scenario);

    bool payload_err = false;
    fs::resize_file(dir / "samples.bin", fs::file_size(dir / "samples.bin") - 4);
    try {
        load_dataset(dir);
    } catch (const TruncatedPayloadError&) {
        payload_err = true;
    } catch (...) {
    }

    fs::remove_all(dir);
    save_dataset(ds, dir);
    {
        std::ifstream mf(dir / "manifest.json");
        nlohmann::json man = nlohmann::json::parse(mf);
        mf.close();
        auto it = man["class_counts"].begin();
        *it = it->get<int>() + 1;
        std::ofstream(dir / "manifest.json") << man.dump(2) << "\n";
    }
    bool manifest_err = false;
    try {
        load_dataset(dir);
    } catch (const CountMismatchError&) {
        manifest_err = true;
    } catch (...) {
    }
    fs::remove_all(dir);
    report(9, exact && payload_err && manifest_err,
           std::string("10k-sample round-trip bit-exact=") + (exact ? "yes" : "no") +
               ", truncated payload -> TruncatedPayloadError=" + (payload_err ? "yes" : "no") +
               ", count mismatch -> CountMismatchError=" + (manifest_err ? "yes" : "no"));
}

// --- 5: Fig. 4 qualitative reproduction; 7 reuses the trained pipeline -------
void criteria_5_and_7() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.seed = 11;
    cfg.out_dir = (fs::temp_directory_path() / "chanest-acceptance-sweep").string();
    Pipeline pipe(cfg);
    EvalResult r = sweep(pipe);
    const double secs = seconds_since(t0);

    bool ok = r.failed_cells.empty() &&
              r.completed_cells.size() == cfg.strategies.size() * cfg.snr_grid.size();
    std::string detail;
    if (!ok) {
        detail = "sweep incomplete (" + std::to_string(r.completed_cells.size()) + " cells, " +
                 std::to_string(r.failed_cells.size()) + " failures)";
    } else {
        const auto& hall = r.strategies.at(StrategyId::HALLUCINATION).nmse;
        const auto& integ = r.strategies.at(StrategyId::INTEGRATED).nmse;
        const auto& noatt = r.strategies.at(StrategyId::NO_ATTENTION).nmse;
        const auto& nollm = r.strategies.at(StrategyId::NO_LLM).nmse;
        const double margin0 = hall.at(0).mean - integ.at(0).mean;
        const double gap_lo = hall.at(-10).mean - integ.at(-10).mean;
        const double gap_hi = hall.at(20).mean - integ.at(20).mean;
        const bool order = integ.at(0).mean <= noatt.at(0).mean &&
                           noatt.at(0).mean <= hall.at(0).mean &&
                           integ.at(0).mean <= nollm.at(0).mean;
        ok = margin0 >= 0.05 && gap_lo >= gap_hi && order && secs < 1800.0;
        detail = "0dB margin=" + fmt(margin0) + " (>=0.05), gap(-10dB)=" + fmt(gap_lo) +
                 " >= gap(+20dB)=" + fmt(gap_hi) + " is " + (gap_lo >= gap_hi ? "yes" : "no") +
                 ", ordering INT(" + fmt(integ.at(0).mean) + ")<=NOATT(" + fmt(noatt.at(0).mean) +
                 ")<=HALL(" + fmt(hall.at(0).mean) + ") and INT<=NOLLM(" + fmt(nollm.at(0).mean) +
                 ")=" + (order ? "yes" : "no") + ", " + fmt(secs) + "s (<1800s)";
    }
    report(5, ok, detail);
    emit_report(r, cfg.out_dir);

    // --- criterion 7: validator fault injection on the calibrated pipeline ---
    const ValidatorConfig& vcfg = pipe.validators();
    Discriminator<float>& disc = pipe.gan().discriminator;
    const auto classes = all_scenario_classes();
    const int n = 500;
    int scale_hit = 0, nan_hit = 0, swap_hit = 0, clean_fp = 0;
    Rng rng(99);
    for (int i = 0; i < n; ++i) {
        ChannelSample s = generate_channel(classes[i % classes.size()],
                                           derive_seed(3000, "acceptance-val", i));

        auto scaled = s.h;
        for (auto& v : scaled) v *= std::sqrt(10.0f);  // x10 power
        for (const auto& f : check_constraints(scaled, vcfg))
            if (f.type == FlagType::CONSTRAINT) {
                ++scale_hit;
                break;
            }

        auto wrecked = s.h;
        wrecked[rng.uniform_index(kGridSize)] = {std::numeric_limits<float>::quiet_NaN(), 0.0f};
        for (const auto& f : check_constraints(wrecked, vcfg))
            if (f.type == FlagType::CONSTRAINT) {
                ++nan_hit;
                break;
            }

        ScenarioClass lied = s.scenario;
        lied.environment = lied.environment == Environment::LOS ? Environment::NLOS
                                                                : Environment::LOS;
        if (!check_context(s.h, lied, vcfg).empty()) ++swap_hit;

        clean_fp += !validate_estimate(s.h, s.scenario, disc, vcfg).passed;
    }
    const double fp_rate = static_cast<double>(clean_fp) / n;
    const double fp_limit = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / n);
    const bool ok7 = scale_hit >= int(0.9 * n) && nan_hit >= int(0.9 * n) &&
                     swap_hit >= int(0.9 * n) && fp_rate <= fp_limit;
    report(7, ok7,
           "x10 scale flagged " + std::to_string(scale_hit) + "/500, NaN " +
               std::to_string(nan_hit) + "/500, label swap " + std::to_string(swap_hit) +
               "/500 (each >=450); clean false positives " + fmt(fp_rate) + " (<= " +
               fmt(fp_limit) + ")");
}

// --- 6: gate safety under adversarial replies --------------------------------
void criterion_6() {
    ExpertRegistry reg = make_default_registry();
    std::vector<CompletionResult> script;
    for (int i = 0; i < 1000; ++i) {
        switch (i % 5) {
            case 0: script.push_back({true, "I suggest using the best model available.", ""}); break;
            case 1: script.push_back({true, "expert: skynet-" + std::to_string(i), ""}); break;
            case 2: script.push_back({false, "", "timeout after 2000 ms"}); break;
            case 3: script.push_back({true, "expert:\nexpert : los low\n", ""}); break;
            default: script.push_back({false, "", "connection refused"}); break;
        }
    }
    ScriptedCompletionClient client(std::move(script));
    Rng rng(17);
    int registered = 0;
    for (int i = 0; i < 1000; ++i) {
        UserState st;
        st.environment = static_cast<UserEnvironment>(i % 3);
        st.carrier_ghz = rng.uniform(0.5, 40.0);
        st.speed_kmh = rng.uniform(0.0, 200.0);
        GateDecision d = llm_gate(st, reg, client);
        registered += reg.find(d.expert_id) != nullptr;
    }
    report(6, registered == 1000,
           std::to_string(registered) + "/1000 adversarial replies routed to a registered expert");
}

// --- 8: sweep determinism ----------------------------------------------------
void criterion_8() {
    RunConfig cfg;
    cfg.dataset.total = 1600;
    cfg.seeds = {1, 2};
    cfg.observations_per_cell = 8;
    cfg.calibration_samples = 40;
    cfg.snr_grid = {0, 20};
    cfg.gan.train.epochs = 2;
    cfg.denoiser.base_channels = 8;
    cfg.denoiser.num_blocks = 1;
    cfg.denoiser.time_embed_dim = 8;
    cfg.diffusion_train.epochs = 2;
    cfg.seed = 23;

    const fs::path d1 = fs::temp_directory_path() / "chanest-acceptance-det1";
    const fs::path d2 = fs::temp_directory_path() / "chanest-acceptance-det2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    {
        Pipeline p(cfg);
        emit_report(sweep(p), d1.string());
    }
    {
        Pipeline p(cfg);
        emit_report(sweep(p), d2.string());
    }
    bool same = true;
    std::string diff;
    for (const char* name : {"nmse.csv", "loss.csv", "flags.csv"})
        if (slurp(d1 / name) != slurp(d2 / name)) {
            same = false;
            diff += std::string(name) + " ";
        }
    fs::remove_all(d1);
    fs::remove_all(d2);
    report(8, same,
           same ? "two identical-config sweeps produced byte-identical nmse.csv/loss.csv/flags.csv"
                : "differing files: " + diff);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criteria_4_and_9();
    criterion_6();
    criterion_8();
    criteria_5_and_7();
    std::printf("%s\n", failures == 0 ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED");
    return failures == 0 ? 0 : 1;
}
