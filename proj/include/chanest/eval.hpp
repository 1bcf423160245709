#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chanest/dataset.hpp"
#include "chanest/diffusion.hpp"
#include "chanest/gan.hpp"
#include "chanest/gate.hpp"
#include "chanest/validate.hpp"

namespace chanest {

inline double nmse(const std::vector<std::complex<float>>& est,
                   const std::vector<std::complex<float>>& truth) {
    if (est.size() != truth.size()) throw std::invalid_argument("nmse: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        num += std::norm(std::complex<double>(est[i]) - std::complex<double>(truth[i]));
        den += std::norm(std::complex<double>(truth[i]));
    }
    if (den == 0.0) throw std::invalid_argument("nmse: zero-power reference");
    return num / den;
}

// Raw-pilot estimator at full mask: H_hat = y, so E[NMSE] = sigma^2 for
// unit-power channels. Anchors the NMSE scale analytically.
inline double ls_baseline_nmse(double snr_db, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("ls_baseline_nmse: n_samples must be >= 1");
    const auto classes = all_scenario_classes();
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        ChannelSample s = generate_channel(classes[i % classes.size()],
                                           derive_seed(seed, "ls-sample", i));
        PilotObservation obs = make_pilot_observation(s, 1, snr_db, derive_seed(seed, "ls-obs", i));
        acc += nmse(obs.y, s.h);
    }
    return acc / n_samples;
}

enum class StrategyId { HALLUCINATION, NO_ATTENTION, NO_LLM, INTEGRATED };

inline const char* to_string(StrategyId s) {
    switch (s) {
        case StrategyId::HALLUCINATION: return "HALLUCINATION";
        case StrategyId::NO_ATTENTION: return "NO_ATTENTION";
        case StrategyId::NO_LLM: return "NO_LLM";
        default: return "INTEGRATED";
    }
}

inline StrategyId parse_strategy(const std::string& s) {
    for (StrategyId v : {StrategyId::HALLUCINATION, StrategyId::NO_ATTENTION, StrategyId::NO_LLM,
                         StrategyId::INTEGRATED})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown strategy: " + s);
}

struct RunConfig {
    DatasetConfig dataset{.total = 2500};  // 4:1 LoS/NLoS at default parts
    int pilot_spacing = 4;
    std::vector<int> snr_grid = {-10, -5, 0, 5, 10, 15, 20};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int observations_per_cell = 201;  // split across the seeds list
    int calibration_samples = 200;
    GanConfig gan{.train = {.learning_rate = 2e-4,
                            .batch_size = 32,
                            .epochs = 160,
                            .beta1 = 0.5}};  // ~2400 adversarial steps on 500 pooled NLoS
    DenoiserConfig denoiser{.base_channels = 24};
    nn::TrainConfig diffusion_train{.learning_rate = 2e-3, .batch_size = 32, .epochs = 100};
    std::vector<StrategyId> strategies = {StrategyId::HALLUCINATION, StrategyId::NO_ATTENTION,
                                          StrategyId::NO_LLM, StrategyId::INTEGRATED};
    std::string out_dir = "out";
    std::string llm_endpoint;  // empty -> deterministic mock client
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dataset"] = {{"total", dataset.total},
                        {"nlos_parts", dataset.nlos_parts},
                        {"los_parts", dataset.los_parts}};
        j["pilot_spacing"] = pilot_spacing;
        j["eval"] = {{"snr_grid", snr_grid},
                     {"seeds", seeds},
                     {"observations_per_cell", observations_per_cell},
                     {"calibration_samples", calibration_samples}};
        j["gan"] = {{"latent_dim", gan.latent_dim},
                    {"learning_rate", gan.train.learning_rate},
                    {"batch_size", gan.train.batch_size},
                    {"epochs", gan.train.epochs},
                    {"noise_anchor", gan.noise_anchor}};
        j["diffusion"] = {{"base_channels", denoiser.base_channels},
                          {"num_blocks", denoiser.num_blocks},
                          {"time_embed_dim", denoiser.time_embed_dim},
                          {"learning_rate", diffusion_train.learning_rate},
                          {"batch_size", diffusion_train.batch_size},
                          {"epochs", diffusion_train.epochs}};
        for (auto s : strategies) j["strategies"].push_back(to_string(s));
        j["out_dir"] = out_dir;
        j["llm"] = {{"endpoint", llm_endpoint}};
        j["seed"] = seed;
        return j;
    }
    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        if (j.contains("dataset")) {
            c.dataset.total = j["dataset"].value("total", c.dataset.total);
            c.dataset.nlos_parts = j["dataset"].value("nlos_parts", c.dataset.nlos_parts);
            c.dataset.los_parts = j["dataset"].value("los_parts", c.dataset.los_parts);
        }
        c.pilot_spacing = j.value("pilot_spacing", c.pilot_spacing);
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            if (e.contains("snr_grid")) c.snr_grid = e["snr_grid"].get<std::vector<int>>();
            if (e.contains("seeds")) c.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
            c.observations_per_cell = e.value("observations_per_cell", c.observations_per_cell);
            c.calibration_samples = e.value("calibration_samples", c.calibration_samples);
        }
        if (j.contains("gan")) {
            const auto& g = j["gan"];
            c.gan.latent_dim = g.value("latent_dim", c.gan.latent_dim);
            c.gan.train.learning_rate = g.value("learning_rate", c.gan.train.learning_rate);
            c.gan.train.batch_size = g.value("batch_size", c.gan.train.batch_size);
            c.gan.train.epochs = g.value("epochs", c.gan.train.epochs);
            c.gan.noise_anchor = g.value("noise_anchor", c.gan.noise_anchor);
        }
        if (j.contains("diffusion")) {
            const auto& d = j["diffusion"];
            c.denoiser.base_channels = d.value("base_channels", c.denoiser.base_channels);
            c.denoiser.num_blocks = d.value("num_blocks", c.denoiser.num_blocks);
            c.denoiser.time_embed_dim = d.value("time_embed_dim", c.denoiser.time_embed_dim);
            c.diffusion_train.learning_rate =
                d.value("learning_rate", c.diffusion_train.learning_rate);
            c.diffusion_train.batch_size = d.value("batch_size", c.diffusion_train.batch_size);
            c.diffusion_train.epochs = d.value("epochs", c.diffusion_train.epochs);
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j["strategies"]) c.strategies.push_back(parse_strategy(s));
        }
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("llm")) c.llm_endpoint = j["llm"].value("endpoint", c.llm_endpoint);
        c.seed = j.value("seed", c.seed);
        if (c.seeds.empty()) throw std::invalid_argument("run config: need at least one seed");
        return c;
    }
};

struct CellStat {
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
};

struct StrategyResult {
    std::vector<double> loss_curve;  // mean over the strategy's models, per epoch
    std::map<int, CellStat> nmse;    // snr_db -> stat
    HallucinationRate flags;
    std::vector<std::uint64_t> seeds;
};

struct EvalResult {
    std::map<StrategyId, StrategyResult> strategies;
    std::vector<std::string> completed_cells;
    std::vector<std::string> failed_cells;
};

// Shared, lazily-trained model pool: strategies reuse whatever is already
// trained so a full sweep trains each model exactly once.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg, CompletionClient* client = nullptr)
        : cfg_(std::move(cfg)), client_(client) {
        registry_ = make_default_registry();
    }

    const RunConfig& config() const { return cfg_; }
    const ExpertRegistry& registry() const { return registry_; }

    const ChannelDataset& train_dataset() {
        if (!train_ds_) train_ds_ = build_dataset(cfg_.dataset, derive_seed(cfg_.seed, "train-data"));
        return *train_ds_;
    }

    Gan& gan() {
        if (!gan_) {
            ensure_balanced();
        }
        return *gan_;
    }

    const ChannelDataset& balanced_dataset() {
        ensure_balanced();
        return *balanced_ds_;
    }

    DiffusionEstimator& expert(const std::string& id, bool attention) {
        auto& pool = attention ? attn_ : noattn_;
        auto it = pool.find(id);
        if (it != pool.end()) return it->second;
        const ExpertDescriptor* d = registry_.find(id);
        if (!d) throw std::invalid_argument("pipeline: unknown expert " + id);
        ensure_balanced();
        std::vector<const ChannelSample*> subset;
        const ScenarioClass probe = *d->coverage.begin();
        for (const auto& s : balanced_ds_->samples)
            if (s.scenario.environment == probe.environment &&
                s.scenario.carrier_band == probe.carrier_band)
                subset.push_back(&s);
        DenoiserConfig dcfg = cfg_.denoiser;
        dcfg.attention = attention;
        nn::TrainConfig tcfg = cfg_.diffusion_train;
        tcfg.seed = derive_seed(cfg_.seed, attention ? "expert-attn" : "expert-noattn",
                                scenario_index(probe));
        DiffusionEstimator est;
        est.scenario_tag = id;
        PilotParams pp;
        pp.spacing = cfg_.pilot_spacing;
        TrainResult tr = train_denoiser(est, subset, dcfg, tcfg, pp);
        if (tr.diverged)
            throw std::runtime_error("training diverged for expert " + id +
                                     (attention ? " (attention)" : " (no attention)"));
        loss_curves_[(attention ? "attn/" : "noattn/") + id] = tr.loss_curve;
        return pool.emplace(id, std::move(est)).first->second;
    }

    DiffusionEstimator& hallucination_model() {
        if (hall_) return *hall_;
        const ChannelDataset& ds = train_dataset();
        std::vector<const ChannelSample*> all;
        for (const auto& s : ds.samples) all.push_back(&s);
        DenoiserConfig dcfg = cfg_.denoiser;
        dcfg.attention = false;
        nn::TrainConfig tcfg = cfg_.diffusion_train;
        tcfg.seed = derive_seed(cfg_.seed, "hallucination-model");
        // match the experts' gradient-step budget: the mixed dataset is
        // larger than a per-expert subset, so scale epochs down accordingly
        std::size_t n_los = 0;
        for (const auto& s : ds.samples)
            if (s.scenario.environment == Environment::LOS) ++n_los;
        const double ref_subset = std::max<std::size_t>(1, n_los / 2);
        tcfg.epochs = std::max(
            1, static_cast<int>(std::lround(tcfg.epochs * ref_subset / ds.samples.size())));
        hall_.emplace();
        hall_->scenario_tag = "hallucination";
        PilotParams pp;
        pp.spacing = cfg_.pilot_spacing;
        TrainResult tr = train_denoiser(*hall_, all, dcfg, tcfg, pp);
        if (tr.diverged) throw std::runtime_error("training diverged for hallucination model");
        loss_curves_["hallucination"] = tr.loss_curve;
        return *hall_;
    }

    const ValidatorConfig& validators() {
        if (vcfg_) return *vcfg_;
        ensure_balanced();
        std::vector<const ChannelSample*> train_ptrs;
        for (const auto& s : train_ds_->samples) train_ptrs.push_back(&s);
        held_out_.clear();
        const auto classes = all_scenario_classes();
        for (int i = 0; i < cfg_.calibration_samples; ++i)
            held_out_.push_back(generate_channel(classes[i % classes.size()],
                                                 derive_seed(cfg_.seed, "calibration", i)));
        std::vector<const ChannelSample*> held_nlos;
        for (const auto& s : held_out_)
            if (s.scenario.environment == Environment::NLOS) held_nlos.push_back(&s);
        vcfg_ = calibrate_validators(train_ptrs, held_nlos, gan_->discriminator);
        return *vcfg_;
    }

    CompletionClient& llm_client() {
        if (client_) return *client_;
        return mock_;
    }

    const std::map<std::string, std::vector<double>>& loss_curves() const { return loss_curves_; }
    const GanTrainResult& gan_history() {
        ensure_balanced();
        return gan_history_;
    }

private:
    void ensure_balanced() {
        if (balanced_ds_) return;
        const ChannelDataset& ds = train_dataset();
        std::vector<const ChannelSample*> nlos;
        for (const auto& s : ds.samples)
            if (s.scenario.environment == Environment::NLOS) nlos.push_back(&s);
        GanConfig gc = cfg_.gan;
        gc.train.seed = derive_seed(cfg_.seed, "gan");
        gan_.emplace();
        gan_history_ = train_gan(*gan_, nlos, gc);
        balanced_ds_ = balance_dataset(ds, *gan_, derive_seed(cfg_.seed, "balance"));
    }

    RunConfig cfg_;
    CompletionClient* client_;
    MockCompletionClient mock_;
    ExpertRegistry registry_;
    std::optional<ChannelDataset> train_ds_, balanced_ds_;
    std::optional<Gan> gan_;
    GanTrainResult gan_history_;
    std::map<std::string, DiffusionEstimator> attn_, noattn_;
    std::optional<DiffusionEstimator> hall_;
    std::optional<ValidatorConfig> vcfg_;
    std::vector<ChannelSample> held_out_;
    std::map<std::string, std::vector<double>> loss_curves_;
};

namespace detail {

inline UserState user_state_of(const ScenarioClass& sc) {
    UserState u;
    u.environment =
        sc.environment == Environment::LOS ? UserEnvironment::LOS : UserEnvironment::NLOS;
    u.carrier_ghz = carrier_ghz(sc.carrier_band);
    u.speed_kmh = speed_kmh(sc.mobility);
    return u;
}

}  // namespace detail

// Evaluates one strategy over the full SNR grid. Test channels are held out
// from training (independent seed stream); each evaluation seed contributes
// an equal share of the per-cell observation budget. Mitigation strategies
// validate every estimate and resample once on failure, keeping the second
// estimate and recording the first flag; HALLUCINATION estimates are scored
// by the validators but never resampled (no mitigation).
inline StrategyResult run_strategy(StrategyId strategy, Pipeline& pipe,
                                   EvalResult* progress = nullptr) {
    const RunConfig& cfg = pipe.config();
    StrategyResult res;
    res.seeds = cfg.seeds;

    // models this strategy needs (train up front so divergence carries context)
    const bool mitigated = strategy != StrategyId::HALLUCINATION;
    try {
        if (strategy == StrategyId::HALLUCINATION) {
            pipe.hallucination_model();
        } else {
            const bool attention = strategy != StrategyId::NO_ATTENTION;
            for (const auto& e : pipe.registry().experts()) pipe.expert(e.id, attention);
        }
        pipe.validators();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("strategy ") + to_string(strategy) + ": " + e.what());
    }

    // strategy loss curve: mean over its models
    {
        std::vector<const std::vector<double>*> curves;
        const auto& all = pipe.loss_curves();
        const std::string prefix = strategy == StrategyId::HALLUCINATION ? "hallucination"
                                   : strategy == StrategyId::NO_ATTENTION ? "noattn/"
                                                                          : "attn/";
        for (const auto& [name, curve] : all)
            if (name.rfind(prefix, 0) == 0) curves.push_back(&curve);
        if (!curves.empty()) {
            res.loss_curve.assign(curves[0]->size(), 0.0);
            for (const auto* c : curves)
                for (std::size_t i = 0; i < res.loss_curve.size(); ++i)
                    res.loss_curve[i] += (*c)[i] / curves.size();
        }
    }

    const int n_seeds = static_cast<int>(cfg.seeds.size());
    const int per_seed = (cfg.observations_per_cell + n_seeds - 1) / n_seeds;
    const auto classes = all_scenario_classes();
    const ValidatorConfig& vcfg = pipe.validators();

    long flag_total = 0, flag_constraint = 0, flag_fabricated = 0, flag_context = 0, flag_n = 0;

    for (int snr : cfg.snr_grid) {
        double sum = 0.0, sum2 = 0.0;
        int n = 0;
        for (int si = 0; si < n_seeds; ++si) {
            const std::uint64_t eseed = cfg.seeds[si];
            // held-out test channels for this seed
            std::vector<ChannelSample> test;
            test.reserve(per_seed);
            for (int i = 0; i < per_seed; ++i)
                test.push_back(generate_channel(classes[i % classes.size()],
                                                derive_seed(cfg.seed, "test-data", si * 100000 + i)));
            std::vector<PilotObservation> obs;
            obs.reserve(per_seed);
            for (int i = 0; i < per_seed; ++i)
                obs.push_back(make_pilot_observation(
                    test[i], cfg.pilot_spacing, snr,
                    derive_seed(eseed, "obs-noise", (snr + 100) * 100000 + i)));

            // route observations to models
            std::map<std::string, std::vector<int>> groups;  // model key -> obs indices
            for (int i = 0; i < per_seed; ++i) {
                std::string key;
                switch (strategy) {
                    case StrategyId::HALLUCINATION: key = "hallucination"; break;
                    case StrategyId::NO_ATTENTION:
                        key = rule_gate(detail::user_state_of(test[i].scenario), pipe.registry())
                                  .expert_id;
                        break;
                    case StrategyId::NO_LLM:
                        key = random_gate(detail::user_state_of(test[i].scenario), pipe.registry(),
                                          derive_seed(eseed, "random-gate",
                                                      (snr + 100) * 100000 + i))
                                  .expert_id;
                        break;
                    case StrategyId::INTEGRATED:
                        key = llm_gate(detail::user_state_of(test[i].scenario), pipe.registry(),
                                       pipe.llm_client())
                                  .expert_id;
                        break;
                }
                groups[key].push_back(i);
            }

            std::vector<std::vector<std::complex<float>>> est(per_seed);
            for (const auto& [key, idxs] : groups) {
                DiffusionEstimator& model =
                    strategy == StrategyId::HALLUCINATION
                        ? pipe.hallucination_model()
                        : pipe.expert(key, strategy != StrategyId::NO_ATTENTION);
                std::vector<const PilotObservation*> op;
                for (int i : idxs) op.push_back(&obs[i]);
                auto out = estimate_channels(
                    op, model, derive_seed(eseed, "sampling", (snr + 100) * 100000));
                for (std::size_t k = 0; k < idxs.size(); ++k) est[idxs[k]] = std::move(out[k]);

                // validator pass + resample-once for mitigation strategies
                std::vector<int> retry;
                for (std::size_t k = 0; k < idxs.size(); ++k) {
                    const int i = idxs[k];
                    auto rep = validate_estimate(est[i], test[i].scenario,
                                                 pipe.gan().discriminator, vcfg);
                    ++flag_n;
                    if (!rep.passed) {
                        ++flag_total;
                        bool c = false, f = false, x = false;
                        for (const auto& fl : rep.flags) {
                            c |= fl.type == FlagType::CONSTRAINT;
                            f |= fl.type == FlagType::FABRICATED;
                            x |= fl.type == FlagType::CONTEXT;
                        }
                        flag_constraint += c;
                        flag_fabricated += f;
                        flag_context += x;
                        if (mitigated) retry.push_back(i);
                    }
                }
                if (!retry.empty()) {
                    std::vector<const PilotObservation*> rop;
                    for (int i : retry) rop.push_back(&obs[i]);
                    auto out2 = estimate_channels(
                        rop, model, derive_seed(eseed, "resample", (snr + 100) * 100000));
                    for (std::size_t k = 0; k < retry.size(); ++k)
                        est[retry[k]] = std::move(out2[k]);
                }
            }

            for (int i = 0; i < per_seed; ++i) {
                const double e = nmse(est[i], test[i].h);
                sum += e;
                sum2 += e * e;
                ++n;
            }
        }
        CellStat cs;
        cs.n = n;
        cs.mean = sum / n;
        cs.stddev = n > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1))) : 0.0;
        res.nmse[snr] = cs;
        if (progress)
            progress->completed_cells.push_back(std::string(to_string(strategy)) + "@" +
                                                std::to_string(snr));
    }

    if (flag_n > 0) {
        res.flags.total = double(flag_total) / flag_n;
        res.flags.constraint = double(flag_constraint) / flag_n;
        res.flags.fabricated = double(flag_fabricated) / flag_n;
        res.flags.context = double(flag_context) / flag_n;
    }
    return res;
}

inline EvalResult sweep(Pipeline& pipe) {
    EvalResult result;
    for (StrategyId s : pipe.config().strategies) {
        try {
            result.strategies[s] = run_strategy(s, pipe, &result);
        } catch (const std::exception& e) {
            result.failed_cells.push_back(std::string(to_string(s)) + ": " + e.what());
        }
    }
    return result;
}

namespace detail {

// shortest round-trip-exact decimal representation
inline std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline void svg_plot(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
                         series,
                     const std::string& xlabel, const std::string& ylabel, bool log_y) {
    const int W = 640, H = 440, ml = 70, mr = 20, mt = 20, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [name, pts] : series)
        for (auto [x, y] : pts) {
            const double yy = log_y ? std::log10(std::max(y, 1e-12)) : y;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, yy);
            ymax = std::max(ymax, yy);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) {
        const double yy = log_y ? std::log10(std::max(y, 1e-12)) : y;
        return H - mb - (yy - ymin) / (ymax - ymin) * (H - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write plot " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    f << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
    f << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
    f << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
    f << "<text x='" << (W / 2) << "' y='" << H - 12 << "' text-anchor='middle' font-size='13'>"
      << xlabel << "</text>\n";
    f << "<text x='16' y='" << (H / 2) << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << (H / 2) << ")'>" << ylabel << "</text>\n";
    int ci = 0;
    for (const auto& [name, pts] : series) {
        const char* col = colors[ci % 5];
        f << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
        for (auto [x, y] : pts) f << px(x) << ',' << py(y) << ' ';
        f << "'/>\n";
        f << "<text x='" << W - mr - 150 << "' y='" << mt + 16 + 16 * ci << "' font-size='12' fill='"
          << col << "'>" << name << "</text>\n";
        ++ci;
    }
    f << "</svg>\n";
}

}  // namespace detail

// nmse.csv, loss.csv, flags.csv plus the loss-curve and NMSE-vs-SNR plots.
inline void emit_report(const EvalResult& result, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    auto open = [&](const std::string& name) {
        std::ofstream f(dir + "/" + name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + dir + "/" + name);
        return f;
    };
    {
        auto f = open("nmse.csv");
        f << "strategy,snr_db,mean_nmse,mean_nmse_db,std,n\n";
        for (const auto& [sid, sr] : result.strategies)
            for (const auto& [snr, cs] : sr.nmse)
                f << to_string(sid) << ',' << snr << ',' << detail::fmt_double(cs.mean) << ','
                  << detail::fmt_double(10.0 * std::log10(std::max(cs.mean, 1e-300))) << ','
                  << detail::fmt_double(cs.stddev) << ',' << cs.n << '\n';
    }
    {
        auto f = open("loss.csv");
        f << "strategy,epoch,loss\n";
        for (const auto& [sid, sr] : result.strategies)
            for (std::size_t i = 0; i < sr.loss_curve.size(); ++i)
                f << to_string(sid) << ',' << i << ',' << detail::fmt_double(sr.loss_curve[i])
                  << '\n';
    }
    {
        auto f = open("flags.csv");
        f << "strategy,type,rate\n";
        for (const auto& [sid, sr] : result.strategies) {
            f << to_string(sid) << ",CONSTRAINT," << detail::fmt_double(sr.flags.constraint) << '\n';
            f << to_string(sid) << ",FABRICATED," << detail::fmt_double(sr.flags.fabricated) << '\n';
            f << to_string(sid) << ",CONTEXT," << detail::fmt_double(sr.flags.context) << '\n';
            f << to_string(sid) << ",ANY," << detail::fmt_double(sr.flags.total) << '\n';
        }
    }
    {
        std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> loss_series,
            nmse_series;
        for (const auto& [sid, sr] : result.strategies) {
            std::vector<std::pair<double, double>> lp, np;
            for (std::size_t i = 0; i < sr.loss_curve.size(); ++i)
                lp.emplace_back(double(i), sr.loss_curve[i]);
            for (const auto& [snr, cs] : sr.nmse) np.emplace_back(double(snr), cs.mean);
            if (!lp.empty()) loss_series.emplace_back(to_string(sid), std::move(lp));
            if (!np.empty()) nmse_series.emplace_back(to_string(sid), std::move(np));
        }
        if (!loss_series.empty())
            detail::svg_plot(dir + "/loss_curves.svg", loss_series, "epoch", "training loss",
                             false);
        if (!nmse_series.empty())
            detail::svg_plot(dir + "/nmse_vs_snr.svg", nmse_series, "SNR (dB)", "NMSE (log)",
                             true);
    }
}

}  // namespace chanest
