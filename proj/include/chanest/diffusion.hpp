#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chanest/channel.hpp"
#include "chanest/nn.hpp"

namespace chanest {

// Forward-process schedule over T steps. The default 60-step schedule uses
// linear beta endpoints chosen so that alpha_bar_T < 0.05, i.e. the forward
// process ends close to pure noise even at this short horizon.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta, alpha, alpha_bar;
};

inline constexpr int kDefaultDiffusionSteps = 60;
inline constexpr double kDefaultBeta1 = 1e-3;
inline constexpr double kDefaultBetaT = 0.1;

inline NoiseSchedule make_schedule(int T = kDefaultDiffusionSteps, double beta_1 = kDefaultBeta1,
                                   double beta_T = kDefaultBetaT) {
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (beta_1 <= 0.0 || beta_1 >= 1.0 || beta_T <= 0.0 || beta_T >= 1.0)
        throw std::invalid_argument("schedule: beta endpoints must lie in (0,1)");
    if (beta_1 > beta_T) throw std::invalid_argument("schedule: beta_1 must not exceed beta_T");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        s.beta[t] = T == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * t / (T - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, t in [1, T].
template <class S>
nn::Tensor<S> q_sample(const nn::Tensor<S>& x0, int t, const nn::Tensor<S>& eps,
                       const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.T) throw std::invalid_argument("q_sample: t outside [1, T]");
    if (x0.shape != eps.shape) throw std::invalid_argument("q_sample: shape mismatch");
    const double ab = schedule.alpha_bar[t - 1];
    const S a = static_cast<S>(std::sqrt(ab)), b = static_cast<S>(std::sqrt(1.0 - ab));
    nn::Tensor<S> xt = x0;
    for (std::size_t i = 0; i < xt.v.size(); ++i) xt.v[i] = a * x0.v[i] + b * eps.v[i];
    return xt;
}

struct DenoiserConfig {
    int base_channels = 32;
    int num_blocks = 3;          // post-attention 3x3 conv blocks
    bool attention = true;       // off for the no-attention ablation
    int time_embed_dim = 32;
};

// Conditional epsilon-predicting denoiser. Input channels: x_t (re/im),
// pilot mask, observed y (re/im). First conv block, sinusoidal time
// embedding as per-channel bias, then self-attention over the flattened
// 8x32 grid (residual), then the 3x3 conv blocks and the output head.
template <class S>
class Denoiser {
public:
    static constexpr int kInputChannels = 5;

    void init(const DenoiserConfig& cfg, std::uint64_t seed) {
        cfg_ = cfg;
        Rng rng(derive_seed(seed, "denoiser-init"));
        conv_in_.init("conv_in", kInputChannels, cfg.base_channels, rng);
        time_fc_.init("time_fc", cfg.time_embed_dim, cfg.base_channels, rng);
        if (cfg.attention)
            attn_.init("attn", {cfg.base_channels, 1}, rng);
        blocks_.resize(cfg.num_blocks);
        acts_.resize(cfg.num_blocks);
        for (int i = 0; i < cfg.num_blocks; ++i)
            blocks_[i].init("block" + std::to_string(i), cfg.base_channels, cfg.base_channels, rng);
        head_.init("head", cfg.base_channels, 2, rng);
    }

    const DenoiserConfig& config() const { return cfg_; }

    std::vector<nn::Param<S>*> params() {
        std::vector<nn::Param<S>*> ps{&conv_in_.w, &conv_in_.b, &time_fc_.w, &time_fc_.b};
        if (cfg_.attention) {
            ps.push_back(&attn_.wq);
            ps.push_back(&attn_.wk);
            ps.push_back(&attn_.wv);
            ps.push_back(&attn_.wo);
        }
        for (auto& bl : blocks_) {
            ps.push_back(&bl.w);
            ps.push_back(&bl.b);
        }
        ps.push_back(&head_.w);
        ps.push_back(&head_.b);
        return ps;
    }
    std::vector<const nn::Param<S>*> params() const {
        auto ps = const_cast<Denoiser*>(this)->params();
        return {ps.begin(), ps.end()};
    }

    // x [B,5,8,32], t per-sample timesteps (1-based). Returns [B,2,8,32].
    nn::Tensor<S> forward(const nn::Tensor<S>& x, const std::vector<int>& t) {
        const int B = x.shape[0], C = cfg_.base_channels;
        const int H = x.shape[2], W = x.shape[3], L = H * W;
        nn::Tensor<S> temb({B, cfg_.time_embed_dim});
        for (int b = 0; b < B; ++b) {
            auto e = nn::sinusoidal_embedding<S>(t[b], cfg_.time_embed_dim);
            std::copy(e.begin(), e.end(), temb.data() + static_cast<std::size_t>(b) * cfg_.time_embed_dim);
        }
        nn::Tensor<S> h = conv_in_.forward(x);
        tbias_ = time_fc_.forward(temb);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                S* p = h.data() + (static_cast<std::size_t>(b) * C + c) * L;
                const S bias = tbias_.v[static_cast<std::size_t>(b) * C + c];
                for (int i = 0; i < L; ++i) p[i] += bias;
            }
        h = act_in_.forward(h);
        if (cfg_.attention) {
            attn_in_shape_ = h.shape;
            nn::Tensor<S> z = to_positions(h);
            nn::Tensor<S> az = attn_.forward(z);
            nn::Tensor<S> a = from_positions(az, h.shape);
            for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += a.v[i];
        }
        for (int i = 0; i < cfg_.num_blocks; ++i) {
            h = blocks_[i].forward(h);
            h = acts_[i].forward(h);
        }
        return head_.forward(h);
    }

    // Accumulates parameter gradients; returns nothing (input gradients are
    // not needed by the trainer).
    void backward(const nn::Tensor<S>& dy) {
        nn::Tensor<S> d = head_.backward(dy);
        for (int i = cfg_.num_blocks - 1; i >= 0; --i) {
            d = acts_[i].backward(d);
            d = blocks_[i].backward(d);
        }
        if (cfg_.attention) {
            nn::Tensor<S> dz = to_positions(d);
            nn::Tensor<S> da = attn_.backward(dz);
            nn::Tensor<S> dres = from_positions(da, attn_in_shape_);
            for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] += dres.v[i];
        }
        d = act_in_.backward(d);
        // split the time-bias gradient from the spatial gradient
        const int B = d.shape[0], C = d.shape[1], L = d.shape[2] * d.shape[3];
        nn::Tensor<S> dt({B, C});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const S* p = d.data() + (static_cast<std::size_t>(b) * C + c) * L;
                S acc = S(0);
                for (int i = 0; i < L; ++i) acc += p[i];
                dt.v[static_cast<std::size_t>(b) * C + c] = acc;
            }
        time_fc_.backward(dt);
        conv_in_.backward(d);
    }

private:
    static nn::Tensor<S> to_positions(const nn::Tensor<S>& h) {  // [B,C,H,W] -> [B,HW,C]
        const int B = h.shape[0], C = h.shape[1], L = h.shape[2] * h.shape[3];
        nn::Tensor<S> z({B, L, C});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const S* src = h.data() + (static_cast<std::size_t>(b) * C + c) * L;
                S* dst = z.data() + static_cast<std::size_t>(b) * L * C + c;
                for (int i = 0; i < L; ++i) dst[static_cast<std::size_t>(i) * C] = src[i];
            }
        return z;
    }
    static nn::Tensor<S> from_positions(const nn::Tensor<S>& z, const std::vector<int>& shape) {
        const int B = shape[0], C = shape[1], L = shape[2] * shape[3];
        nn::Tensor<S> h(shape);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const S* src = z.data() + static_cast<std::size_t>(b) * L * C + c;
                S* dst = h.data() + (static_cast<std::size_t>(b) * C + c) * L;
                for (int i = 0; i < L; ++i) dst[i] = src[static_cast<std::size_t>(i) * C];
            }
        return h;
    }

    DenoiserConfig cfg_;
    nn::Conv2d<S> conv_in_, head_;
    std::vector<nn::Conv2d<S>> blocks_;
    nn::Dense<S> time_fc_;
    nn::Attention<S> attn_;
    nn::SiLU<S> act_in_;
    std::vector<nn::SiLU<S>> acts_;
    nn::Tensor<S> tbias_;
    std::vector<int> attn_in_shape_;
};

struct PilotParams {
    int spacing = 4;
    double snr_lo_db = -10.0;
    double snr_hi_db = 20.0;
};

struct DiffusionEstimator {
    NoiseSchedule schedule;
    Denoiser<float> denoiser;
    std::string scenario_tag;      // MoE coverage tag
    bool data_consistency = true;
    PilotParams pilot;
};

namespace detail {

template <class S>
void fill_gaussian(nn::Tensor<S>& t, Rng& rng) {
    for (auto& v : t.v) v = static_cast<S>(rng.gaussian());
}

// channels: [x_re, x_im, mask, y_re, y_im]
template <class S>
void write_condition(nn::Tensor<S>& inp, int b, const PilotObservation& obs) {
    S* base = inp.data() + static_cast<std::size_t>(b) * 5 * kGridSize;
    for (int i = 0; i < kGridSize; ++i) {
        base[2 * kGridSize + i] = static_cast<S>(obs.mask[i]);
        base[3 * kGridSize + i] = static_cast<S>(obs.y[i].real());
        base[4 * kGridSize + i] = static_cast<S>(obs.y[i].imag());
    }
}

}  // namespace detail

struct TrainResult {
    std::vector<double> loss_curve;  // per-epoch mean MSE
    bool diverged = false;
};

// Epsilon-prediction MSE training. Every batch draws fresh timesteps, SNRs
// in the pilot range, forward noise and pilot noise, all from one seeded
// stream. On divergence the last epoch-end checkpoint is restored.
inline TrainResult train_denoiser(DiffusionEstimator& est,
                                  const std::vector<const ChannelSample*>& samples,
                                  const DenoiserConfig& cfg, const nn::TrainConfig& tcfg,
                                  const PilotParams& pilot) {
    if (samples.empty()) throw std::invalid_argument("train_denoiser: empty training set");
    est.denoiser.init(cfg, tcfg.seed);
    est.pilot = pilot;
    if (est.schedule.T == 0) est.schedule = make_schedule();

    auto params = est.denoiser.params();
    nn::Adam<float> opt(params, tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps);
    Rng rng(derive_seed(tcfg.seed, "denoiser-train"));

    const int B = tcfg.batch_size;
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(samples.size() / static_cast<std::size_t>(B)));
    TrainResult result;
    std::vector<float> good;  // last good parameter snapshot
    auto snapshot = [&] {
        good.clear();
        for (auto* p : params) good.insert(good.end(), p->w.begin(), p->w.end());
    };
    auto restore = [&] {
        std::size_t o = 0;
        for (auto* p : params) {
            std::copy(good.begin() + o, good.begin() + o + p->w.size(), p->w.begin());
            o += p->w.size();
        }
    };
    snapshot();

    nn::Tensor<float> inp({B, 5, kNumAntennas, kNumSubcarriers});
    nn::Tensor<float> eps({B, 2, kNumAntennas, kNumSubcarriers});
    std::vector<int> ts(B);
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        // Cosine learning-rate decay to a tenth of the initial rate.
        if (tcfg.epochs > 1)
            opt.set_lr(tcfg.learning_rate *
                       (0.55 + 0.45 * std::cos(M_PI * epoch / (tcfg.epochs - 1))));
        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            for (int b = 0; b < B; ++b) {
                const ChannelSample& s = *samples[rng.uniform_index(samples.size())];
                ts[b] = 1 + static_cast<int>(rng.uniform_index(est.schedule.T));
                const double snr = rng.uniform(pilot.snr_lo_db, pilot.snr_hi_db);
                PilotObservation obs =
                    make_pilot_observation(s, pilot.spacing, snr, rng.next_u64());
                detail::write_condition(inp, b, obs);
                const double ab = est.schedule.alpha_bar[ts[b] - 1];
                const float sa = static_cast<float>(std::sqrt(ab));
                const float sb = static_cast<float>(std::sqrt(1.0 - ab));
                float* xt = inp.data() + static_cast<std::size_t>(b) * 5 * kGridSize;
                float* ep = eps.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
                for (int i = 0; i < kGridSize; ++i) {
                    const float e_re = static_cast<float>(rng.gaussian());
                    const float e_im = static_cast<float>(rng.gaussian());
                    ep[i] = e_re;
                    ep[kGridSize + i] = e_im;
                    xt[i] = sa * s.h[i].real() + sb * e_re;
                    xt[kGridSize + i] = sa * s.h[i].imag() + sb * e_im;
                }
            }
            opt.zero_grad();
            nn::Tensor<float> pred = est.denoiser.forward(inp, ts);
            double loss = 0.0;
            nn::Tensor<float> grad(pred.shape);
            const double inv = 1.0 / static_cast<double>(pred.v.size());
            for (std::size_t i = 0; i < pred.v.size(); ++i) {
                const double d = static_cast<double>(pred.v[i]) - eps.v[i];
                loss += d * d * inv;
                grad.v[i] = static_cast<float>(2.0 * d * inv);
            }
            if (!std::isfinite(loss)) {
                restore();
                result.diverged = true;
                return result;
            }
            est.denoiser.backward(grad);
            opt.step();
            epoch_loss += loss;
        }
        result.loss_curve.push_back(epoch_loss / steps_per_epoch);
        snapshot();
    }
    return result;
}

// Ancestral DDPM sampling conditioned on (mask, y) for a batch of
// observations sharing one grid. Data consistency blends the running
// x0-estimate with y at pilot positions, weighted by the residual noise
// level against the observation noise.
inline std::vector<std::vector<std::complex<float>>> estimate_channels(
    const std::vector<const PilotObservation*>& obs, DiffusionEstimator& model,
    std::uint64_t seed) {
    const int B = static_cast<int>(obs.size());
    if (B == 0) return {};
    const NoiseSchedule& sch = model.schedule;
    if (sch.T < 1) throw std::invalid_argument("estimate_channels: model has no schedule");

    nn::Tensor<float> inp({B, 5, kNumAntennas, kNumSubcarriers});
    for (int b = 0; b < B; ++b) detail::write_condition(inp, b, *obs[b]);

    std::vector<Rng> rngs;
    rngs.reserve(B);
    for (int b = 0; b < B; ++b) rngs.emplace_back(derive_seed(seed, "estimate", b));

    nn::Tensor<float> x({B, 2, kNumAntennas, kNumSubcarriers});
    for (int b = 0; b < B; ++b) {
        float* xp = x.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
        for (int i = 0; i < 2 * kGridSize; ++i) xp[i] = static_cast<float>(rngs[b].gaussian());
    }

    std::vector<int> ts(B);
    nn::Tensor<float> x0({B, 2, kNumAntennas, kNumSubcarriers});
    for (int t = sch.T; t >= 1; --t) {
        std::fill(ts.begin(), ts.end(), t);
        for (int b = 0; b < B; ++b) {
            float* dst = inp.data() + static_cast<std::size_t>(b) * 5 * kGridSize;
            const float* xp = x.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
            std::copy(xp, xp + 2 * kGridSize, dst);
        }
        nn::Tensor<float> epshat = model.denoiser.forward(inp, ts);
        const double ab = sch.alpha_bar[t - 1];
        const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < x0.v.size(); ++i)
            x0.v[i] = static_cast<float>((x.v[i] - sb * epshat.v[i]) / sa);

        if (model.data_consistency) {
            const double v = std::max(1.0 - ab, 0.02);
            for (int b = 0; b < B; ++b) {
                const double w = v / (v + obs[b]->sigma2);
                float* xp = x0.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
                for (int i = 0; i < kGridSize; ++i) {
                    if (!obs[b]->mask[i]) continue;
                    xp[i] = static_cast<float>((1.0 - w) * xp[i] + w * obs[b]->y[i].real());
                    xp[kGridSize + i] =
                        static_cast<float>((1.0 - w) * xp[kGridSize + i] + w * obs[b]->y[i].imag());
                }
            }
        }

        if (t > 1) {
            const double abp = sch.alpha_bar[t - 2];
            const double bt = sch.beta[t - 1];
            const double c0 = std::sqrt(abp) * bt / (1.0 - ab);
            const double c1 = std::sqrt(sch.alpha[t - 1]) * (1.0 - abp) / (1.0 - ab);
            const double pvar = (1.0 - abp) / (1.0 - ab) * bt;
            const double pstd = std::sqrt(pvar);
            for (int b = 0; b < B; ++b) {
                float* xp = x.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
                const float* x0p = x0.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
                for (int i = 0; i < 2 * kGridSize; ++i)
                    xp[i] = static_cast<float>(c0 * x0p[i] + c1 * xp[i] +
                                               pstd * rngs[b].gaussian());
            }
        }
    }

    std::vector<std::vector<std::complex<float>>> out(B);
    for (int b = 0; b < B; ++b) {
        out[b].resize(kGridSize);
        const float* xp = x0.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
        for (int i = 0; i < kGridSize; ++i) out[b][i] = {xp[i], xp[kGridSize + i]};
    }
    return out;
}

inline std::vector<std::complex<float>> estimate_channel(const PilotObservation& obs,
                                                         DiffusionEstimator& model,
                                                         std::uint64_t seed) {
    return estimate_channels({&obs}, model, seed)[0];
}

// Estimator checkpoint: JSON header (schedule, config, tag) framed ahead of
// the neural_core parameter payload.
inline void save_estimator(const DiffusionEstimator& est, const std::string& path) {
    nlohmann::json head;
    head["schedule"] = {{"T", est.schedule.T},
                        {"beta_1", est.schedule.beta.front()},
                        {"beta_T", est.schedule.beta.back()}};
    head["scenario_tag"] = est.scenario_tag;
    head["data_consistency"] = est.data_consistency;
    head["pilot"] = {{"spacing", est.pilot.spacing},
                     {"snr_lo_db", est.pilot.snr_lo_db},
                     {"snr_hi_db", est.pilot.snr_hi_db}};
    const auto& c = est.denoiser.config();
    head["denoiser"] = {{"base_channels", c.base_channels},
                        {"num_blocks", c.num_blocks},
                        {"attention", c.attention},
                        {"time_embed_dim", c.time_embed_dim}};
    const std::string hs = head.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write estimator " + path);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(hs.data(), len);
    f.close();
    // parameter payload appended in neural_core checkpoint format
    std::string tmp = path + ".params";
    auto ps = const_cast<DiffusionEstimator&>(est).denoiser.params();
    nn::save_checkpoint<float>({ps.begin(), ps.end()}, tmp);
    std::ifstream pf(tmp, std::ios::binary);
    std::ofstream af(path, std::ios::binary | std::ios::app);
    af << pf.rdbuf();
    pf.close();
    std::filesystem::remove(tmp);
}

inline DiffusionEstimator load_estimator(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read estimator " + path);
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string hs(len, '\0');
    f.read(hs.data(), len);
    if (!f) throw std::runtime_error("truncated estimator header");
    nlohmann::json head = nlohmann::json::parse(hs);

    DiffusionEstimator est;
    est.schedule = make_schedule(head["schedule"]["T"].get<int>(),
                                 head["schedule"]["beta_1"].get<double>(),
                                 head["schedule"]["beta_T"].get<double>());
    est.scenario_tag = head["scenario_tag"].get<std::string>();
    est.data_consistency = head["data_consistency"].get<bool>();
    est.pilot.spacing = head["pilot"]["spacing"].get<int>();
    est.pilot.snr_lo_db = head["pilot"]["snr_lo_db"].get<double>();
    est.pilot.snr_hi_db = head["pilot"]["snr_hi_db"].get<double>();
    DenoiserConfig cfg;
    cfg.base_channels = head["denoiser"]["base_channels"].get<int>();
    cfg.num_blocks = head["denoiser"]["num_blocks"].get<int>();
    cfg.attention = head["denoiser"]["attention"].get<bool>();
    cfg.time_embed_dim = head["denoiser"]["time_embed_dim"].get<int>();
    est.denoiser.init(cfg, 0);

    // copy the parameter payload to a temp file for the checkpoint reader
    std::string tmp = path + ".params.tmp";
    {
        std::ofstream tf(tmp, std::ios::binary);
        tf << f.rdbuf();
    }
    nn::load_checkpoint<float>(est.denoiser.params(), tmp);
    std::filesystem::remove(tmp);
    return est;
}

}  // namespace chanest
