// Command-line surface over the channel-estimation pipeline: dataset
// generation and cleaning, GAN training and balancing, diffusion expert
// training, gating, estimation, validation, and the full evaluation sweep.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "chanest/eval.hpp"
#include "chanest/llm_http.hpp"

using namespace chanest;

namespace {

RunConfig load_config(const std::string& path, std::uint64_t seed_override, bool has_seed,
                      const std::string& out_override) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read config " + path);
        cfg = RunConfig::from_json(nlohmann::json::parse(f));
    }
    if (has_seed) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    return cfg;
}

std::unique_ptr<CompletionClient> make_client(const RunConfig& cfg) {
    const char* env = std::getenv("CHANEST_LLM_ENDPOINT");
    std::string ep = env ? env : cfg.llm_endpoint;
    if (ep.empty()) return std::make_unique<MockCompletionClient>();
    return std::make_unique<HttpCompletionClient>(ep);
}

std::vector<const ChannelSample*> nlos_of(const ChannelDataset& ds) {
    std::vector<const ChannelSample*> v;
    for (const auto& s : ds.samples)
        if (s.scenario.environment == Environment::NLOS) v.push_back(&s);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-based channel estimation with hallucination mitigation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;
    app.add_option("--config", config_path, "run configuration file (JSON)");
    app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        has_seed = true;
    });
    app.add_option("--out", out_dir, "output directory override");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the imbalanced channel dataset");
    std::string gen_path = "dataset";
    gen->add_option("--path", gen_path, "dataset directory");

    // clean
    auto* clean = app.add_subcommand("clean", "outlier removal / deduplication");
    std::string clean_in = "dataset", clean_out = "dataset-clean", clean_policy = "zscore";
    double clean_threshold = 3.0;
    clean->add_option("--in", clean_in);
    clean->add_option("--out-path", clean_out);
    clean->add_option("--policy", clean_policy, "zscore | iqr | hash-dedup");
    clean->add_option("--threshold", clean_threshold);

    // train-gan
    auto* tgan = app.add_subcommand("train-gan", "train the NLoS GAN");
    std::string tgan_in = "dataset", tgan_out = "gan";
    tgan->add_option("--in", tgan_in);
    tgan->add_option("--model-out", tgan_out, "checkpoint path prefix");

    // balance
    auto* bal = app.add_subcommand("balance", "balance the dataset with synthetic NLoS");
    std::string bal_in = "dataset", bal_gan = "gan", bal_out = "dataset-balanced";
    bal->add_option("--in", bal_in);
    bal->add_option("--gan", bal_gan, "GAN checkpoint path prefix");
    bal->add_option("--out-path", bal_out);

    // train-diffusion
    auto* tdiff = app.add_subcommand("train-diffusion", "train one diffusion expert");
    std::string tdiff_in = "dataset-balanced", tdiff_out = "expert.est", tdiff_expert = "nlos-low";
    bool tdiff_no_attn = false;
    tdiff->add_option("--in", tdiff_in);
    tdiff->add_option("--model-out", tdiff_out);
    tdiff->add_option("--expert", tdiff_expert, "expert id (registry coverage)");
    tdiff->add_flag("--no-attention", tdiff_no_attn);

    // gate
    auto* gate = app.add_subcommand("gate", "route a user state to an expert");
    std::string gate_env = "UNKNOWN", gate_kind = "rule";
    double gate_ghz = 2.6, gate_speed = 0.0;
    gate->add_option("--env", gate_env, "LOS | NLOS | UNKNOWN");
    gate->add_option("--carrier-ghz", gate_ghz);
    gate->add_option("--speed-kmh", gate_speed);
    gate->add_option("--kind", gate_kind, "rule | llm | random");

    // estimate
    auto* est = app.add_subcommand("estimate", "estimate one channel from pilots");
    std::string est_model = "expert.est", est_scenario = "nlos-low-urban";
    double est_snr = 0.0;
    est->add_option("--model", est_model);
    est->add_option("--scenario", est_scenario, "scenario key for the simulated truth");
    est->add_option("--snr", est_snr);

    // validate
    auto* val = app.add_subcommand("validate", "run hallucination validators over a dataset");
    std::string val_in = "dataset", val_gan = "gan", val_log = "validation.log";
    val->add_option("--in", val_in);
    val->add_option("--gan", val_gan);
    val->add_option("--log", val_log);

    // sweep / report
    auto* sw = app.add_subcommand("sweep", "full strategy x SNR evaluation grid");
    auto* rep = app.add_subcommand("report", "re-emit report files from a sweep result");
    std::string rep_in = "result.json";
    rep->add_option("--result", rep_in, "sweep result JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path, seed, has_seed, out_dir);

        if (gen->parsed()) {
            ChannelDataset ds = build_dataset(cfg.dataset, derive_seed(cfg.seed, "train-data"));
            save_dataset(ds, gen_path);
            std::printf("wrote %zu samples to %s\n", ds.samples.size(), gen_path.c_str());
        } else if (clean->parsed()) {
            ChannelDataset ds = load_dataset(clean_in);
            CleanPolicy policy;
            if (clean_policy == "zscore") policy = CleanPolicy::ZSCORE;
            else if (clean_policy == "iqr") policy = CleanPolicy::IQR;
            else if (clean_policy == "hash-dedup") policy = CleanPolicy::HASH_DEDUP;
            else throw std::invalid_argument("unknown policy " + clean_policy);
            auto [out, removed] = clean_dataset(ds, policy, clean_threshold);
            save_dataset(out, clean_out);
            std::printf("kept %zu of %zu samples (%zu removed)\n", out.samples.size(),
                        ds.samples.size(), removed.size());
        } else if (tgan->parsed()) {
            ChannelDataset ds = load_dataset(tgan_in);
            GanConfig gc = cfg.gan;
            gc.train.seed = derive_seed(cfg.seed, "gan");
            Gan gan;
            GanTrainResult res = train_gan(gan, nlos_of(ds), gc);
            save_gan(gan, tgan_out + ".gen", tgan_out + ".disc");
            std::printf("trained %d epochs, final g=%.4f d=%.4f%s\n", (int)res.g_loss.size(),
                        res.g_loss.back(), res.d_loss.back(),
                        res.collapse_warning ? " [mode-collapse warning]" : "");
        } else if (bal->parsed()) {
            ChannelDataset ds = load_dataset(bal_in);
            Gan gan;
            load_gan(gan, cfg.gan, bal_gan + ".gen", bal_gan + ".disc");
            ChannelDataset out = balance_dataset(ds, gan, derive_seed(cfg.seed, "balance"));
            save_dataset(out, bal_out);
            std::printf("balanced %zu -> %zu samples\n", ds.samples.size(), out.samples.size());
        } else if (tdiff->parsed()) {
            ChannelDataset ds = load_dataset(tdiff_in);
            ExpertRegistry reg = make_default_registry();
            const ExpertDescriptor* d = reg.find(tdiff_expert);
            if (!d) throw std::invalid_argument("unknown expert id " + tdiff_expert);
            const ScenarioClass probe = *d->coverage.begin();
            std::vector<const ChannelSample*> subset;
            for (const auto& s : ds.samples)
                if (s.scenario.environment == probe.environment &&
                    s.scenario.carrier_band == probe.carrier_band)
                    subset.push_back(&s);
            DenoiserConfig dc = cfg.denoiser;
            dc.attention = !tdiff_no_attn;
            nn::TrainConfig tc = cfg.diffusion_train;
            tc.seed = derive_seed(cfg.seed, "expert", scenario_index(probe));
            DiffusionEstimator model;
            model.scenario_tag = tdiff_expert;
            PilotParams pp;
            pp.spacing = cfg.pilot_spacing;
            TrainResult res = train_denoiser(model, subset, dc, tc, pp);
            if (res.diverged) {
                std::fprintf(stderr, "training diverged; checkpoint is last good state\n");
                save_estimator(model, tdiff_out);
                return 1;
            }
            save_estimator(model, tdiff_out);
            std::printf("trained on %zu samples, final loss %.4f\n", subset.size(),
                        res.loss_curve.back());
        } else if (gate->parsed()) {
            ExpertRegistry reg = make_default_registry();
            UserState st;
            if (gate_env == "LOS") st.environment = UserEnvironment::LOS;
            else if (gate_env == "NLOS") st.environment = UserEnvironment::NLOS;
            else st.environment = UserEnvironment::UNKNOWN;
            st.carrier_ghz = gate_ghz;
            st.speed_kmh = gate_speed;
            GateDecision d;
            if (gate_kind == "rule") d = rule_gate(st, reg);
            else if (gate_kind == "random") d = random_gate(st, reg, cfg.seed);
            else if (gate_kind == "llm") {
                auto client = make_client(cfg);
                d = llm_gate(st, reg, *client);
            } else throw std::invalid_argument("unknown gate kind " + gate_kind);
            std::printf("expert=%s source=%s rationale=%s\n", d.expert_id.c_str(),
                        to_string(d.source), d.rationale.c_str());
        } else if (est->parsed()) {
            DiffusionEstimator model = load_estimator(est_model);
            ScenarioClass sc = parse_scenario_key(est_scenario);
            ChannelSample truth = generate_channel(sc, derive_seed(cfg.seed, "estimate-truth"));
            PilotObservation obs = make_pilot_observation(truth, cfg.pilot_spacing, est_snr,
                                                          derive_seed(cfg.seed, "estimate-obs"));
            auto h = estimate_channel(obs, model, derive_seed(cfg.seed, "estimate-sampling"));
            std::printf("nmse=%.6f\n", nmse(h, truth.h));
        } else if (val->parsed()) {
            ChannelDataset ds = load_dataset(val_in);
            Gan gan;
            load_gan(gan, cfg.gan, val_gan + ".gen", val_gan + ".disc");
            std::vector<const ChannelSample*> all, held;
            for (const auto& s : ds.samples) all.push_back(&s);
            for (const auto& s : ds.samples)
                if (s.scenario.environment == Environment::NLOS) held.push_back(&s);
            ValidatorConfig vc = calibrate_validators(all, held, gan.discriminator);
            std::ofstream log(val_log);
            int failed = 0;
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                auto rep2 = validate_estimate(ds.samples[i].h, ds.samples[i].scenario,
                                              gan.discriminator, vc);
                failed += !rep2.passed;
                write_report_line(log, std::to_string(i), rep2);
            }
            std::printf("flagged %d of %zu samples; log: %s\n", failed, ds.samples.size(),
                        val_log.c_str());
        } else if (sw->parsed()) {
            auto client = make_client(cfg);
            Pipeline pipe(cfg, client.get());
            EvalResult r = sweep(pipe);
            emit_report(r, cfg.out_dir);
            // persist the result for `report`
            nlohmann::json jr;
            for (const auto& [sid, sr] : r.strategies) {
                nlohmann::json js;
                js["loss_curve"] = sr.loss_curve;
                js["seeds"] = sr.seeds;
                js["flags"] = {{"total", sr.flags.total},
                               {"constraint", sr.flags.constraint},
                               {"fabricated", sr.flags.fabricated},
                               {"context", sr.flags.context}};
                for (const auto& [snr, cs] : sr.nmse)
                    js["nmse"][std::to_string(snr)] = {{"mean", cs.mean},
                                                       {"std", cs.stddev},
                                                       {"n", cs.n}};
                jr["strategies"][to_string(sid)] = js;
            }
            jr["completed"] = r.completed_cells;
            jr["failed"] = r.failed_cells;
            std::ofstream jf(cfg.out_dir + "/result.json");
            jf << jr.dump(2) << '\n';
            const std::size_t want =
                cfg.strategies.size() * cfg.snr_grid.size();
            std::printf("completed %zu of %zu cells\n", r.completed_cells.size(), want);
            for (const auto& s : r.failed_cells) std::fprintf(stderr, "failed: %s\n", s.c_str());
            return r.completed_cells.size() == want && r.failed_cells.empty() ? 0 : 1;
        } else if (rep->parsed()) {
            std::ifstream jf(rep_in);
            if (!jf) throw std::runtime_error("cannot read " + rep_in);
            nlohmann::json jr = nlohmann::json::parse(jf);
            EvalResult r;
            for (const auto& [name, js] : jr["strategies"].items()) {
                StrategyResult sr;
                sr.loss_curve = js["loss_curve"].get<std::vector<double>>();
                sr.seeds = js["seeds"].get<std::vector<std::uint64_t>>();
                sr.flags.total = js["flags"]["total"].get<double>();
                sr.flags.constraint = js["flags"]["constraint"].get<double>();
                sr.flags.fabricated = js["flags"]["fabricated"].get<double>();
                sr.flags.context = js["flags"]["context"].get<double>();
                if (js.contains("nmse"))
                    for (const auto& [snr, cj] : js["nmse"].items())
                        sr.nmse[std::stoi(snr)] = {cj["mean"].get<double>(),
                                                   cj["std"].get<double>(), cj["n"].get<int>()};
                r.strategies[parse_strategy(name)] = std::move(sr);
            }
            emit_report(r, cfg.out_dir);
            std::printf("report written to %s\n", cfg.out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
