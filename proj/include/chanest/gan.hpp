#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanest/dataset.hpp"
#include "chanest/nn.hpp"

namespace chanest {

struct GanConfig {
    int latent_dim = 32;
    nn::TrainConfig train{.learning_rate = 2e-4, .batch_size = 64, .epochs = 64, .beta1 = 0.5};
    std::set<ScenarioClass> coverage;  // scenario subset the generator represents
    bool wasserstein = false;          // survey option, off: non-saturating loss
    double noise_anchor = 0.2;         // weight of scaled-noise negatives for the discriminator
    double diversity_warn_ratio = 0.1; // warn when generated diversity falls below this x real
};

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// y_i = x_i * sqrt(P / sum x^2), per batch element
template <class S>
struct PowerNorm {
    double target = static_cast<double>(kGridSize);  // unit mean per-entry |h|^2 over the grid
    nn::Tensor<S> x_cache;
    std::vector<double> scale;

    nn::Tensor<S> forward(const nn::Tensor<S>& x) {
        x_cache = x;
        const int B = x.shape[0];
        const std::size_t n = x.v.size() / B;
        nn::Tensor<S> y(x.shape);
        scale.assign(B, 0.0);
        for (int b = 0; b < B; ++b) {
            const S* xp = x.data() + b * n;
            double pw = 0.0;
            for (std::size_t i = 0; i < n; ++i) pw += static_cast<double>(xp[i]) * xp[i];
            const double s = std::sqrt(target / std::max(pw, 1e-20));
            scale[b] = s;
            S* yp = y.data() + b * n;
            for (std::size_t i = 0; i < n; ++i) yp[i] = static_cast<S>(xp[i] * s);
        }
        return y;
    }
    nn::Tensor<S> backward(const nn::Tensor<S>& dy) {
        const int B = x_cache.shape[0];
        const std::size_t n = x_cache.v.size() / B;
        nn::Tensor<S> dx(x_cache.shape);
        for (int b = 0; b < B; ++b) {
            const S* xp = x_cache.data() + b * n;
            const S* gp = dy.data() + b * n;
            S* dp = dx.data() + b * n;
            double pw = 0.0, xg = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                pw += static_cast<double>(xp[i]) * xp[i];
                xg += static_cast<double>(xp[i]) * gp[i];
            }
            pw = std::max(pw, 1e-20);
            const double s = scale[b];
            for (std::size_t i = 0; i < n; ++i)
                dp[i] = static_cast<S>(s * gp[i] - s * xg / pw * xp[i]);
        }
        return dx;
    }
};

// Fixed unitary delay -> frequency transform along the subcarrier axis.
// Input is interpreted as a complex per-antenna delay profile G[a,k]
// (channels 0/1 = re/im); output is H[a,s] = (1/sqrt(N)) sum_k G[a,k]
// e^{-j 2 pi s k / N}. Physical channels concentrate their energy in a few
// early delay taps, so letting the conv stack work in the delay domain is a
// much easier synthesis problem than producing the oscillatory frequency
// response directly. No parameters; backward is the transpose map.
template <class S>
struct DelayToFreq {
    std::vector<double> cos_, sin_;  // [N, N] tables, phi = 2 pi s k / N
    int n_ = 0;

    void ensure_tables(int n) {
        if (n_ == n) return;
        n_ = n;
        cos_.resize(static_cast<std::size_t>(n) * n);
        sin_.resize(static_cast<std::size_t>(n) * n);
        const double inv = 1.0 / std::sqrt(static_cast<double>(n));
        for (int s = 0; s < n; ++s)
            for (int k = 0; k < n; ++k) {
                const double phi = 2.0 * M_PI * s * k / n;
                cos_[static_cast<std::size_t>(s) * n + k] = std::cos(phi) * inv;
                sin_[static_cast<std::size_t>(s) * n + k] = std::sin(phi) * inv;
            }
    }

    // x [B, 2, A, N] -> y [B, 2, A, N]
    nn::Tensor<S> forward(const nn::Tensor<S>& x) {
        const int B = x.shape[0], A = x.shape[2], N = x.shape[3];
        ensure_tables(N);
        nn::Tensor<S> y(x.shape);
        for (int b = 0; b < B; ++b)
            for (int a = 0; a < A; ++a) {
                const S* gr = x.data() + ((static_cast<std::size_t>(b) * 2 + 0) * A + a) * N;
                const S* gi = x.data() + ((static_cast<std::size_t>(b) * 2 + 1) * A + a) * N;
                S* hr = y.data() + ((static_cast<std::size_t>(b) * 2 + 0) * A + a) * N;
                S* hi = y.data() + ((static_cast<std::size_t>(b) * 2 + 1) * A + a) * N;
                for (int s = 0; s < N; ++s) {
                    const double* cs = cos_.data() + static_cast<std::size_t>(s) * N;
                    const double* sn = sin_.data() + static_cast<std::size_t>(s) * N;
                    double re = 0.0, im = 0.0;
                    for (int k = 0; k < N; ++k) {
                        re += gr[k] * cs[k] + gi[k] * sn[k];
                        im += gi[k] * cs[k] - gr[k] * sn[k];
                    }
                    hr[s] = static_cast<S>(re);
                    hi[s] = static_cast<S>(im);
                }
            }
        return y;
    }

    // Transpose of the forward map (the transform is unitary as a real
    // linear operator, so the adjoint swaps the sign of the sine terms).
    nn::Tensor<S> backward(const nn::Tensor<S>& dy) {
        const int B = dy.shape[0], A = dy.shape[2], N = dy.shape[3];
        nn::Tensor<S> dx(dy.shape);
        for (int b = 0; b < B; ++b)
            for (int a = 0; a < A; ++a) {
                const S* dr = dy.data() + ((static_cast<std::size_t>(b) * 2 + 0) * A + a) * N;
                const S* di = dy.data() + ((static_cast<std::size_t>(b) * 2 + 1) * A + a) * N;
                S* gr = dx.data() + ((static_cast<std::size_t>(b) * 2 + 0) * A + a) * N;
                S* gi = dx.data() + ((static_cast<std::size_t>(b) * 2 + 1) * A + a) * N;
                for (int k = 0; k < N; ++k) {
                    double re = 0.0, im = 0.0;
                    for (int s = 0; s < N; ++s) {
                        const double c = cos_[static_cast<std::size_t>(s) * N + k];
                        const double sn = sin_[static_cast<std::size_t>(s) * N + k];
                        re += dr[s] * c - di[s] * sn;
                        im += di[s] * c + dr[s] * sn;
                    }
                    gr[k] = static_cast<S>(re);
                    gi[k] = static_cast<S>(im);
                }
            }
        return dx;
    }
};

}  // namespace detail

// One-hot class vector over the canonical scenario enumeration; the GAN
// conditions generation and discrimination on it.
template <class S>
inline nn::Tensor<S> scenario_onehot(const std::vector<ScenarioClass>& classes) {
    nn::Tensor<S> c({static_cast<int>(classes.size()), kNumScenarioClasses});
    for (std::size_t b = 0; b < classes.size(); ++b)
        c.v[b * kNumScenarioClasses + scenario_index(classes[b])] = S(1);
    return c;
}

// (latent, scenario one-hot) -> dense -> two stride-2 transposed-conv blocks
// -> conv head emitting a per-antenna delay profile -> fixed delay-to-
// frequency transform, power-normalized so every sample has unit mean
// per-entry power.
template <class S>
class Generator {
public:
    void init(int latent_dim, std::uint64_t seed) {
        latent_ = latent_dim;
        Rng rng(derive_seed(seed, "gen-init"));
        fc_.init("g.fc", latent_dim + kNumScenarioClasses, 64 * 2 * 8, rng);
        t1_.init("g.t1", 64, 32, rng);
        t2_.init("g.t2", 32, 16, rng);
        out_.init("g.out", 16, 2, rng);
    }
    int latent_dim() const { return latent_; }

    std::vector<nn::Param<S>*> params() {
        return {&fc_.w, &fc_.b, &t1_.w, &t1_.b, &t2_.w, &t2_.b, &out_.w, &out_.b};
    }

    // z [B, latent], cond [B, kNumScenarioClasses] one-hot
    nn::Tensor<S> forward(const nn::Tensor<S>& z, const nn::Tensor<S>& cond) {
        const int B = z.shape[0];
        if (cond.shape.size() != 2 || cond.shape[0] != B || cond.shape[1] != kNumScenarioClasses)
            throw std::invalid_argument("generator: condition shape mismatch");
        nn::Tensor<S> zc({B, latent_ + kNumScenarioClasses});
        for (int b = 0; b < B; ++b) {
            std::copy(z.data() + static_cast<std::size_t>(b) * latent_,
                      z.data() + static_cast<std::size_t>(b + 1) * latent_,
                      zc.data() + static_cast<std::size_t>(b) * (latent_ + kNumScenarioClasses));
            std::copy(cond.data() + static_cast<std::size_t>(b) * kNumScenarioClasses,
                      cond.data() + static_cast<std::size_t>(b + 1) * kNumScenarioClasses,
                      zc.data() + static_cast<std::size_t>(b) * (latent_ + kNumScenarioClasses) +
                          latent_);
        }
        nn::Tensor<S> h = a0_.forward(fc_.forward(zc));
        h.shape = {B, 64, 2, 8};
        h = a1_.forward(t1_.forward(h));
        h = a2_.forward(t2_.forward(h));
        return norm_.forward(d2f_.forward(out_.forward(h)));
    }
    void backward(const nn::Tensor<S>& dy) {
        nn::Tensor<S> d = out_.backward(d2f_.backward(norm_.backward(dy)));
        d = t2_.backward(a2_.backward(d));
        d = t1_.backward(a1_.backward(d));
        d.shape = {d.shape[0], 64 * 2 * 8};
        fc_.backward(a0_.backward(d));
    }

private:
    int latent_ = 0;
    nn::Dense<S> fc_;
    nn::ConvTranspose2d<S> t1_, t2_;
    nn::Conv2d<S> out_;
    nn::SiLU<S> a0_, a1_, a2_;
    detail::DelayToFreq<S> d2f_;
    detail::PowerNorm<S> norm_;
};

// Three conv blocks with pooling -> dense logit. The unconditional logit is
// the realism score used by the validators; during adversarial training a
// projection term <embed(class), mean-pooled features> is added so the
// generator is held to the claimed scenario class, not just to realism.
template <class S>
class Discriminator {
public:
    static constexpr int kFeat = 32;

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "disc-init"));
        c1_.init("d.c1", 2, 16, rng);
        c2_.init("d.c2", 16, 32, rng);
        c3_.init("d.c3", 32, kFeat, rng);
        fc_.init("d.fc", kFeat * 2 * 8, 1, rng);
        embed_.resize("d.embed", {kNumScenarioClasses, kFeat});
        nn::kaiming_init(embed_, kFeat, rng);
    }
    std::vector<nn::Param<S>*> params() {
        return {&c1_.w, &c1_.b, &c2_.w, &c2_.b, &c3_.w, &c3_.b, &fc_.w, &fc_.b, &embed_};
    }

    // Unconditional logits [B] (realism score path).
    nn::Tensor<S> forward(const nn::Tensor<S>& x) {
        classes_.clear();
        return trunk(x);
    }

    // Class-conditional logits [B]: unconditional logit + projection term.
    nn::Tensor<S> forward(const nn::Tensor<S>& x, const std::vector<ScenarioClass>& classes) {
        nn::Tensor<S> y = trunk(x);
        const int B = y.shape[0];
        if (static_cast<int>(classes.size()) != B)
            throw std::invalid_argument("discriminator: class count mismatch");
        classes_ = classes;
        constexpr int L = 2 * 8;
        for (int b = 0; b < B; ++b) {
            const S* f = feat_.data() + static_cast<std::size_t>(b) * kFeat * L;
            const S* e = embed_.w.data() + static_cast<std::size_t>(scenario_index(classes[b])) * kFeat;
            double acc = 0.0;
            for (int d = 0; d < kFeat; ++d) {
                double pooled = 0.0;
                for (int i = 0; i < L; ++i) pooled += f[d * L + i];
                acc += e[d] * pooled / L;
            }
            y.v[b] += static_cast<S>(acc);
        }
        return y;
    }

    nn::Tensor<S> backward(const nn::Tensor<S>& dlogit) {
        nn::Tensor<S> d = dlogit;
        d.shape = {d.shape[0], 1};
        d = fc_.backward(d);
        d.shape = {d.shape[0], kFeat, 2, 8};
        if (!classes_.empty()) {
            constexpr int L = 2 * 8;
            const int B = d.shape[0];
            for (int b = 0; b < B; ++b) {
                const S g = dlogit.v[b];
                const int ci = scenario_index(classes_[b]);
                const S* f = feat_.data() + static_cast<std::size_t>(b) * kFeat * L;
                const S* e = embed_.w.data() + static_cast<std::size_t>(ci) * kFeat;
                S* eg = embed_.g.data() + static_cast<std::size_t>(ci) * kFeat;
                S* dp = d.data() + static_cast<std::size_t>(b) * kFeat * L;
                for (int dd = 0; dd < kFeat; ++dd) {
                    double pooled = 0.0;
                    for (int i = 0; i < L; ++i) pooled += f[dd * L + i];
                    eg[dd] += g * static_cast<S>(pooled / L);
                    const S gi = g * e[dd] / L;
                    for (int i = 0; i < L; ++i) dp[dd * L + i] += gi;
                }
            }
        }
        d = c3_.backward(a3_.backward(d));
        d = c2_.backward(a2_.backward(p2_.backward(d)));
        return c1_.backward(a1_.backward(p1_.backward(d)));
    }

private:
    nn::Tensor<S> trunk(const nn::Tensor<S>& x) {
        const int B = x.shape[0];
        nn::Tensor<S> h = p1_.forward(a1_.forward(c1_.forward(x)));
        h = p2_.forward(a2_.forward(c2_.forward(h)));
        h = a3_.forward(c3_.forward(h));
        feat_ = h;
        h.shape = {B, kFeat * 2 * 8};
        nn::Tensor<S> y = fc_.forward(h);
        y.shape = {B};
        return y;
    }

    nn::Conv2d<S> c1_, c2_, c3_;
    nn::Dense<S> fc_;
    nn::Param<S> embed_;
    nn::SiLU<S> a1_, a2_, a3_;
    nn::AvgPool2<S> p1_, p2_;
    nn::Tensor<S> feat_;
    std::vector<ScenarioClass> classes_;
};

struct GanTrainResult {
    std::vector<double> g_loss, d_loss;  // per epoch
    std::vector<double> diversity;       // generated-batch mean pairwise distance, per epoch
    bool collapse_warning = false;
};

struct Gan {
    GanConfig cfg;
    Generator<float> generator;
    Discriminator<float> discriminator;
    std::uint64_t checkpoint_hash = 0;
};

namespace detail {

template <class S>
std::uint64_t params_hash_u64(std::vector<nn::Param<S>*> ps) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto* p : ps)
        for (S v : p->w) {
            const std::int64_t q = std::llround(static_cast<double>(v) * 1e6);
            const auto* bytes = reinterpret_cast<const unsigned char*>(&q);
            for (int i = 0; i < 8; ++i) h = (h ^ bytes[i]) * 1099511628211ull;
        }
    return h;
}

template <class S>
double mean_pairwise_distance(const nn::Tensor<S>& x, int max_pairs, Rng& rng) {
    const int B = x.shape[0];
    if (B < 2) return 0.0;
    const std::size_t n = x.v.size() / B;
    double acc = 0.0;
    for (int p = 0; p < max_pairs; ++p) {
        const int i = static_cast<int>(rng.uniform_index(B));
        int j = static_cast<int>(rng.uniform_index(B - 1));
        if (j >= i) ++j;
        const S* a = x.data() + i * n;
        const S* b = x.data() + j * n;
        double d2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = static_cast<double>(a[k]) - b[k];
            d2 += d * d;
        }
        acc += std::sqrt(d2);
    }
    return acc / max_pairs;
}

}  // namespace detail

// Non-saturating GAN on real NLoS channels; alternating single steps. The
// discriminator also sees power-jittered Gaussian negatives so that
// structureless inputs (including near-zero power) score low, which the
// fabricated-output validator relies on.
inline GanTrainResult train_gan(Gan& gan, const std::vector<const ChannelSample*>& nlos,
                                const GanConfig& cfg) {
    if (nlos.size() < 256) throw std::invalid_argument("train_gan: need at least 256 NLoS samples");
    if (cfg.latent_dim < 1) throw std::invalid_argument("train_gan: latent_dim must be >= 1");
    if (cfg.wasserstein) throw std::invalid_argument("train_gan: Wasserstein objective not implemented");
    gan.cfg = cfg;
    gan.generator.init(cfg.latent_dim, cfg.train.seed);
    gan.discriminator.init(derive_seed(cfg.train.seed, "disc"));

    nn::Adam<float> og(gan.generator.params(), cfg.train.learning_rate, cfg.train.beta1,
                       cfg.train.beta2, cfg.train.eps);
    nn::Adam<float> od(gan.discriminator.params(), cfg.train.learning_rate, cfg.train.beta1,
                       cfg.train.beta2, cfg.train.eps);
    Rng rng(derive_seed(cfg.train.seed, "gan-train"));

    const int B = cfg.train.batch_size;
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(nlos.size() / static_cast<std::size_t>(B)));
    GanTrainResult res;

    nn::Tensor<float> xr({B, 2, kNumAntennas, kNumSubcarriers});
    nn::Tensor<float> xn({B, 2, kNumAntennas, kNumSubcarriers});
    nn::Tensor<float> z({B, cfg.latent_dim});
    std::vector<ScenarioClass> real_classes(B), fake_classes(B);
    double real_diversity = 0.0;

    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        double gl_acc = 0.0, dl_acc = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            // --- discriminator step ---
            od.zero_grad();
            for (int b = 0; b < B; ++b) {
                const ChannelSample& s = *nlos[rng.uniform_index(nlos.size())];
                detail::write_channel(xr.data() + static_cast<std::size_t>(b) * 2 * kGridSize,
                                      s.h);
                real_classes[b] = s.scenario;
            }
            for (auto& v : z.v) v = static_cast<float>(rng.gaussian());
            for (int b = 0; b < B; ++b)
                fake_classes[b] = nlos[rng.uniform_index(nlos.size())]->scenario;
            // detached: no G backward here
            nn::Tensor<float> xf =
                gan.generator.forward(z, scenario_onehot<float>(fake_classes));

            double dl = 0.0;
            nn::Tensor<float> lr = gan.discriminator.forward(xr, real_classes);
            nn::Tensor<float> dgrad({B});
            for (int b = 0; b < B; ++b) {
                dl += detail::softplus(-lr.v[b]) / B;
                dgrad.v[b] = static_cast<float>(-(1.0 - nn::sigmoid(lr.v[b])) / B);
            }
            gan.discriminator.backward(dgrad);
            nn::Tensor<float> lf = gan.discriminator.forward(xf, fake_classes);
            for (int b = 0; b < B; ++b) {
                dl += detail::softplus(lf.v[b]) / B;
                dgrad.v[b] = static_cast<float>(nn::sigmoid(lf.v[b]) / B);
            }
            gan.discriminator.backward(dgrad);
            if (cfg.noise_anchor > 0.0) {
                for (int b = 0; b < B; ++b) {
                    const double scale = rng.uniform(0.0, 2.0) * std::sqrt(0.5);
                    float* p = xn.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
                    for (int i = 0; i < 2 * kGridSize; ++i)
                        p[i] = static_cast<float>(scale * rng.gaussian());
                }
                nn::Tensor<float> ln = gan.discriminator.forward(xn);
                for (int b = 0; b < B; ++b) {
                    dl += cfg.noise_anchor * detail::softplus(ln.v[b]) / B;
                    dgrad.v[b] = static_cast<float>(cfg.noise_anchor * nn::sigmoid(ln.v[b]) / B);
                }
                gan.discriminator.backward(dgrad);
            }
            if (!std::isfinite(dl))
                throw std::runtime_error("train_gan: discriminator loss diverged at epoch " +
                                         std::to_string(epoch));
            od.step();

            // --- generator step ---
            og.zero_grad();
            for (auto& v : z.v) v = static_cast<float>(rng.gaussian());
            for (int b = 0; b < B; ++b)
                fake_classes[b] = nlos[rng.uniform_index(nlos.size())]->scenario;
            nn::Tensor<float> xg =
                gan.generator.forward(z, scenario_onehot<float>(fake_classes));
            nn::Tensor<float> lg = gan.discriminator.forward(xg, fake_classes);
            double gl = 0.0;
            for (int b = 0; b < B; ++b) {
                gl += detail::softplus(-lg.v[b]) / B;
                dgrad.v[b] = static_cast<float>(-(1.0 - nn::sigmoid(lg.v[b])) / B);
            }
            if (!std::isfinite(gl))
                throw std::runtime_error("train_gan: generator loss diverged at epoch " +
                                         std::to_string(epoch));
            nn::Tensor<float> dx = gan.discriminator.backward(dgrad);
            gan.generator.backward(dx);
            og.step();
            gl_acc += gl;
            dl_acc += dl;
        }
        res.g_loss.push_back(gl_acc / steps_per_epoch);
        res.d_loss.push_back(dl_acc / steps_per_epoch);
        // mode-collapse guard: generated diversity vs real diversity
        if (epoch == 0) real_diversity = detail::mean_pairwise_distance(xr, 64, rng);
        for (auto& v : z.v) v = static_cast<float>(rng.gaussian());
        for (int b = 0; b < B; ++b)
            fake_classes[b] = nlos[rng.uniform_index(nlos.size())]->scenario;
        nn::Tensor<float> sample =
            gan.generator.forward(z, scenario_onehot<float>(fake_classes));
        const double div = detail::mean_pairwise_distance(sample, 64, rng);
        res.diversity.push_back(div);
        if (div < cfg.diversity_warn_ratio * real_diversity) res.collapse_warning = true;
    }
    gan.checkpoint_hash = detail::params_hash_u64(gan.generator.params());
    return res;
}

struct RealismScore {
    double value = 0.0;  // sigmoid of the discriminator logit, in [0,1]
};

inline RealismScore realism_score(Discriminator<float>& disc,
                                  const std::vector<std::complex<float>>& h) {
    nn::Tensor<float> x({1, 2, kNumAntennas, kNumSubcarriers});
    detail::write_channel(x.data(), h);
    nn::Tensor<float> logit = disc.forward(x);
    return {nn::sigmoid(static_cast<double>(logit.v[0]))};
}

inline RealismScore realism_score(Discriminator<float>& disc, const ChannelSample& sample) {
    return realism_score(disc, sample.h);
}

inline std::vector<ChannelSample> synthesize_nlos(Gan& gan, int n, const ScenarioClass& scenario,
                                                  std::uint64_t seed) {
    if (scenario.environment != Environment::NLOS)
        throw std::invalid_argument("synthesize_nlos: scenario must be NLOS");
    if (!gan.cfg.coverage.empty() && !gan.cfg.coverage.count(scenario))
        throw std::invalid_argument("synthesize_nlos: scenario outside generator coverage");
    std::vector<ChannelSample> out;
    out.reserve(n);
    Rng rng(derive_seed(seed, "synthesize"));
    const int chunk = 64;
    for (int done = 0; done < n; done += chunk) {
        const int B = std::min(chunk, n - done);
        nn::Tensor<float> z({B, gan.cfg.latent_dim});
        for (auto& v : z.v) v = static_cast<float>(rng.gaussian());
        nn::Tensor<float> x = gan.generator.forward(
            z, scenario_onehot<float>(std::vector<ScenarioClass>(B, scenario)));
        for (int b = 0; b < B; ++b) {
            ChannelSample s;
            s.scenario = scenario;
            s.origin = SampleOrigin::GAN_SYNTHETIC;
            s.seed = derive_seed(seed, "synth-sample", done + b);
            s.generator_hash = gan.checkpoint_hash;
            const float* p = x.data() + static_cast<std::size_t>(b) * 2 * kGridSize;
            for (int i = 0; i < kGridSize; ++i) s.h[i] = {p[i], p[kGridSize + i]};
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Appends synthetic NLoS samples until the NLoS count matches the LoS count.
// Synthetic samples cycle over the dataset's existing NLoS scenario classes,
// always topping up the emptiest class first.
inline ChannelDataset balance_dataset(const ChannelDataset& ds, Gan& gan, std::uint64_t seed) {
    std::size_t n_los = 0, n_nlos = 0;
    std::map<ScenarioClass, std::size_t> nlos_counts;
    for (const auto& s : ds.samples) {
        if (s.scenario.environment == Environment::LOS)
            ++n_los;
        else {
            ++n_nlos;
            ++nlos_counts[s.scenario];
        }
    }
    ChannelDataset out = ds;
    if (n_nlos >= n_los) return out;
    if (nlos_counts.empty())
        throw std::invalid_argument("balance_dataset: no NLoS samples to model");
    const std::size_t need = n_los - n_nlos;
    // plan per-class counts: fill the least-populated class first
    std::map<ScenarioClass, int> plan;
    auto counts = nlos_counts;
    for (std::size_t i = 0; i < need; ++i) {
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (it->second < best->second) best = it;
        ++best->second;
        ++plan[best->first];
    }
    int class_idx = 0;
    for (const auto& [sc, cnt] : plan) {
        auto batch = synthesize_nlos(gan, cnt, sc, derive_seed(seed, "balance", class_idx++));
        for (auto& s : batch) out.samples.push_back(std::move(s));
    }
    out.recount();
    return out;
}

inline void save_gan(Gan& gan, const std::string& gen_path, const std::string& disc_path) {
    auto gp = gan.generator.params();
    auto dp = gan.discriminator.params();
    nn::save_checkpoint<float>({gp.begin(), gp.end()}, gen_path);
    nn::save_checkpoint<float>({dp.begin(), dp.end()}, disc_path);
}

inline void load_gan(Gan& gan, const GanConfig& cfg, const std::string& gen_path,
                     const std::string& disc_path) {
    gan.cfg = cfg;
    gan.generator.init(cfg.latent_dim, 0);
    gan.discriminator.init(0);
    nn::load_checkpoint<float>(gan.generator.params(), gen_path);
    nn::load_checkpoint<float>(gan.discriminator.params(), disc_path);
    gan.checkpoint_hash = detail::params_hash_u64(gan.generator.params());
}

}  // namespace chanest
