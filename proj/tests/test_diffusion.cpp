#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "chanest/dataset.hpp"
#include "chanest/diffusion.hpp"

using namespace chanest;

namespace {

std::vector<const ChannelSample*> sample_ptrs(const ChannelDataset& ds) {
    std::vector<const ChannelSample*> out;
    for (const auto& s : ds.samples) out.push_back(&s);
    return out;
}

double nmse_of(const std::vector<std::complex<float>>& est,
               const std::vector<std::complex<float>>& truth) {
    double err = 0.0, pw = 0.0;
    for (int i = 0; i < kGridSize; ++i) {
        err += std::norm(std::complex<double>(est[i]) - std::complex<double>(truth[i]));
        pw += std::norm(std::complex<double>(truth[i]));
    }
    return err / pw;
}

}  // namespace

TEST_CASE("noise schedule invariants") {
    auto s = make_schedule();
    REQUIRE(s.T == 60);
    REQUIRE(s.beta.front() == Catch::Approx(kDefaultBeta1));
    REQUIRE(s.beta.back() == Catch::Approx(kDefaultBetaT));
    double prod = 1.0;
    for (int t = 0; t < s.T; ++t) {
        REQUIRE(s.beta[t] > 0.0);
        REQUIRE(s.beta[t] < 1.0);
        REQUIRE(s.alpha[t] == Catch::Approx(1.0 - s.beta[t]));
        prod *= s.alpha[t];
        REQUIRE(s.alpha_bar[t] == Catch::Approx(prod));
        if (t > 0) REQUIRE(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    }
    REQUIRE(s.alpha_bar.back() < 0.05);

    REQUIRE_THROWS_AS(make_schedule(0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, 0.0, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, 0.5, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, 0.2, 0.1), std::invalid_argument);

    auto one = make_schedule(1, 0.3, 0.5);
    REQUIRE(one.beta == std::vector<double>{0.3});
    REQUIRE(one.alpha_bar == std::vector<double>{0.7});
}

TEST_CASE("q_sample follows the closed form and validates inputs") {
    auto s = make_schedule(10, 0.01, 0.2);
    nn::Tensor<double> x0({1, 4});
    nn::Tensor<double> eps({1, 4});
    x0.v = {1.0, -2.0, 0.5, 3.0};
    eps.v = {0.1, 0.2, -0.3, 0.4};
    const int t = 4;
    auto xt = q_sample(x0, t, eps, s);
    const double ab = s.alpha_bar[t - 1];
    for (int i = 0; i < 4; ++i)
        REQUIRE(xt.v[i] == Catch::Approx(std::sqrt(ab) * x0.v[i] + std::sqrt(1 - ab) * eps.v[i]));

    REQUIRE_THROWS_AS(q_sample(x0, 0, eps, s), std::invalid_argument);
    REQUIRE_THROWS_AS(q_sample(x0, 11, eps, s), std::invalid_argument);
    nn::Tensor<double> bad({1, 3});
    REQUIRE_THROWS_AS(q_sample(x0, 1, bad, s), std::invalid_argument);
}

TEST_CASE("q_sample at the final step is nearly pure noise") {
    auto s = make_schedule();
    Rng rng(3);
    nn::Tensor<double> x0({1, 1000});
    for (auto& v : x0.v) v = rng.gaussian();
    double var = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        nn::Tensor<double> eps(x0.shape);
        for (auto& v : eps.v) v = rng.gaussian();
        auto xt = q_sample(x0, s.T, eps, s);
        for (double v : xt.v) var += v * v;
    }
    var /= reps * x0.v.size();
    REQUIRE(var == Catch::Approx(1.0).margin(0.06));
}

TEST_CASE("denoiser forward is deterministic and timestep-sensitive") {
    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.num_blocks = 1;
    cfg.time_embed_dim = 8;
    Denoiser<float> d;
    d.init(cfg, 4);

    nn::Tensor<float> x({2, 5, kNumAntennas, kNumSubcarriers});
    Rng rng(5);
    for (auto& v : x.v) v = float(rng.gaussian());
    auto y1 = d.forward(x, {3, 7});
    auto y2 = d.forward(x, {3, 7});
    auto y3 = d.forward(x, {4, 7});
    REQUIRE(y1.shape == std::vector<int>{2, 2, kNumAntennas, kNumSubcarriers});
    REQUIRE(y1.v == y2.v);
    REQUIRE(y1.v != y3.v);
    // Second batch element saw the same timestep in both calls.
    const std::size_t half = y1.v.size() / 2;
    for (std::size_t i = half; i < y1.v.size(); ++i) REQUIRE(y1.v[i] == y3.v[i]);
}

TEST_CASE("training loss curve is deterministic and decreasing on a tiny set") {
    DatasetConfig dcfg;
    dcfg.total = 48;
    auto ds = build_dataset(dcfg, 12);

    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.num_blocks = 1;
    cfg.time_embed_dim = 8;
    cfg.attention = false;
    nn::TrainConfig tcfg;
    tcfg.epochs = 6;
    tcfg.batch_size = 16;
    tcfg.seed = 9;

    DiffusionEstimator a{make_schedule(), {}, "all", true, {}};
    DiffusionEstimator b{make_schedule(), {}, "all", true, {}};
    auto ra = train_denoiser(a, sample_ptrs(ds), cfg, tcfg, PilotParams{});
    auto rb = train_denoiser(b, sample_ptrs(ds), cfg, tcfg, PilotParams{});
    REQUIRE(ra.loss_curve == rb.loss_curve);
    REQUIRE(ra.loss_curve.size() == 6);
    REQUIRE_FALSE(ra.diverged);
    REQUIRE(ra.loss_curve.back() < ra.loss_curve.front());

    REQUIRE_THROWS_AS(train_denoiser(a, {}, cfg, tcfg, PilotParams{}), std::invalid_argument);
}

TEST_CASE("estimator with a briefly trained model beats raw pilots at high SNR") {
    DatasetConfig dcfg;
    dcfg.total = 96;
    auto ds = build_dataset(dcfg, 31);

    DenoiserConfig cfg;
    cfg.base_channels = 12;
    cfg.num_blocks = 2;
    cfg.time_embed_dim = 16;
    cfg.attention = false;
    nn::TrainConfig tcfg;
    tcfg.epochs = 20;
    tcfg.batch_size = 16;
    tcfg.seed = 2;
    PilotParams pilot;
    pilot.spacing = 1;  // full mask: data consistency can anchor every entry

    DiffusionEstimator est{make_schedule(), {}, "all", true, pilot};
    train_denoiser(est, sample_ptrs(ds), cfg, tcfg, pilot);

    double total = 0.0;
    const int n = 8;
    for (int i = 0; i < n; ++i) {
        const auto& truth = ds.samples[i];
        auto obs = make_pilot_observation(truth, 1, 20.0, 1000 + i);
        auto h = estimate_channel(obs, est, 5 + i);
        total += nmse_of(h, truth.h);
    }
    // sigma2 at 20 dB is 0.01; a usable estimate stays well under 0.1 NMSE.
    REQUIRE(total / n < 0.1);
}

TEST_CASE("estimation is deterministic in the seed and batched = single") {
    DatasetConfig dcfg;
    dcfg.total = 48;
    auto ds = build_dataset(dcfg, 40);
    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.num_blocks = 1;
    cfg.time_embed_dim = 8;
    cfg.attention = false;
    nn::TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 16;
    tcfg.seed = 3;
    DiffusionEstimator est{make_schedule(), {}, "all", true, {}};
    train_denoiser(est, sample_ptrs(ds), cfg, tcfg, PilotParams{});

    auto obs0 = make_pilot_observation(ds.samples[0], 4, 10.0, 50);
    auto obs1 = make_pilot_observation(ds.samples[1], 4, 0.0, 51);
    auto single = estimate_channel(obs0, est, 7);
    auto again = estimate_channel(obs0, est, 7);
    REQUIRE(single == again);

    auto batch = estimate_channels({&obs0, &obs1}, est, 7);
    REQUIRE(batch.size() == 2);
    REQUIRE(batch[0] == single);
}

TEST_CASE("estimator save/load reproduces outputs exactly") {
    DatasetConfig dcfg;
    dcfg.total = 48;
    auto ds = build_dataset(dcfg, 50);
    DenoiserConfig cfg;
    cfg.base_channels = 8;
    cfg.num_blocks = 1;
    cfg.time_embed_dim = 8;
    nn::TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 16;
    tcfg.seed = 8;
    DiffusionEstimator est{make_schedule(30, 0.002, 0.08), {}, "nlos-low", false, {2, -5.0, 15.0}};
    train_denoiser(est, sample_ptrs(ds), cfg, tcfg, est.pilot);

    auto path = (std::filesystem::temp_directory_path() / "chanest-est-test.bin").string();
    save_estimator(est, path);
    auto back = load_estimator(path);
    REQUIRE(back.schedule.T == 30);
    REQUIRE(back.schedule.beta == est.schedule.beta);
    REQUIRE(back.scenario_tag == "nlos-low");
    REQUIRE(back.data_consistency == false);
    REQUIRE(back.pilot.spacing == 2);
    REQUIRE(back.pilot.snr_lo_db == -5.0);

    auto obs = make_pilot_observation(ds.samples[2], 2, 5.0, 60);
    REQUIRE(estimate_channel(obs, back, 9) == estimate_channel(obs, est, 9));
    std::filesystem::remove(path);
}
