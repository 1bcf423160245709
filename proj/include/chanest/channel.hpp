#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chanest/rng.hpp"
#include "chanest/scenario.hpp"

namespace chanest {

inline constexpr int kNumAntennas = 8;
inline constexpr int kNumSubcarriers = 32;
inline constexpr int kGridSize = kNumAntennas * kNumSubcarriers;

// Subcarrier spacing per carrier band. Chosen so the NLoS delay profile
// spans several delay taps while staying inside the unambiguous window of
// the default spacing-4 pilot comb.
inline double subcarrier_spacing_hz(CarrierBand b) {
    return b == CarrierBand::LOW ? 200e3 : 400e3;
}

inline double tap_duration_s(CarrierBand b) {
    return 1.0 / (kNumSubcarriers * subcarrier_spacing_hz(b));
}

enum class SampleOrigin { SIMULATED, GAN_SYNTHETIC, IMPORTED };

inline const char* to_string(SampleOrigin o) {
    switch (o) {
        case SampleOrigin::SIMULATED: return "simulated";
        case SampleOrigin::GAN_SYNTHETIC: return "gan_synthetic";
        default: return "imported";
    }
}

inline SampleOrigin parse_origin(const std::string& s) {
    if (s == "simulated") return SampleOrigin::SIMULATED;
    if (s == "gan_synthetic") return SampleOrigin::GAN_SYNTHETIC;
    if (s == "imported") return SampleOrigin::IMPORTED;
    throw std::invalid_argument("bad origin: " + s);
}

struct ChannelSample {
    // Row-major [antenna][subcarrier].
    std::vector<std::complex<float>> h = std::vector<std::complex<float>>(kGridSize);
    ScenarioClass scenario;
    std::uint64_t seed = 0;
    SampleOrigin origin = SampleOrigin::SIMULATED;
    bool augmented = false;
    std::uint64_t generator_hash = 0;  // checkpoint hash for GAN_SYNTHETIC samples

    std::complex<float>& at(int a, int s) { return h[a * kNumSubcarriers + s]; }
    const std::complex<float>& at(int a, int s) const { return h[a * kNumSubcarriers + s]; }

    double total_power() const {
        double p = 0.0;
        for (auto v : h) p += std::norm(std::complex<double>(v));
        return p;
    }
};

struct PilotObservation {
    std::vector<std::complex<float>> y = std::vector<std::complex<float>>(kGridSize);
    std::vector<std::uint8_t> mask = std::vector<std::uint8_t>(kGridSize);
    double snr_db = 0.0;
    double sigma2 = 1.0;
};

namespace detail {

// Inverse-CDF sample of an exponential truncated to [0, cap].
inline double trunc_exp(Rng& rng, double mean, double cap) {
    double u = rng.uniform();
    return -mean * std::log(1.0 - u * (1.0 - std::exp(-cap / mean)));
}

inline double mobility_jitter_std(Mobility m) {
    switch (m) {
        case Mobility::STATIC: return 0.0;
        case Mobility::URBAN: return 0.1;
        default: return 0.4;
    }
}

inline void normalize_power(std::vector<std::complex<double>>& h) {
    double p = 0.0;
    for (auto v : h) p += std::norm(v);
    double scale = std::sqrt(static_cast<double>(h.size()) / p);
    for (auto& v : h) v *= scale;
}

// packs a complex grid into two planar channels [re | im]
template <class S>
void write_channel(S* dst2ch, const std::vector<std::complex<float>>& h) {
    for (int i = 0; i < kGridSize; ++i) {
        dst2ch[i] = static_cast<S>(h[i].real());
        dst2ch[kGridSize + i] = static_cast<S>(h[i].imag());
    }
}

}  // namespace detail

// Clustered multipath snapshot on the 8x32 antenna/subcarrier grid.
// LoS: dominant path at zero delay (Rician K = 10 dB) plus 4 weak paths
// with truncated-exponential delays (mean 30 ns). NLoS: 12 Rayleigh paths
// (mean 300 ns). Delays are capped at 90% of the spacing-4 comb's
// unambiguous window. Mobility enters as per-path, per-antenna phase
// jitter. Deterministic given (scenario, seed).
inline ChannelSample generate_channel(const ScenarioClass& scenario, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "channel", scenario_index(scenario)));
    const double df = subcarrier_spacing_hz(scenario.carrier_band);
    const double cap = 0.9 / (4.0 * df);
    const bool los = scenario.environment == Environment::LOS;
    const int n_paths = los ? 5 : 12;

    std::vector<double> tau(n_paths), theta(n_paths);
    std::vector<std::complex<double>> gain(n_paths);
    if (los) {
        tau[0] = 0.0;
        gain[0] = std::polar(std::sqrt(10.0), rng.uniform(0.0, 2.0 * M_PI));
        const double wstd = std::sqrt(1.0 / (2.0 * (n_paths - 1)));
        for (int p = 1; p < n_paths; ++p) {
            tau[p] = detail::trunc_exp(rng, 30e-9, cap);
            gain[p] = {wstd * rng.gaussian(), wstd * rng.gaussian()};
        }
    } else {
        const double wstd = std::sqrt(1.0 / (2.0 * n_paths));
        for (int p = 0; p < n_paths; ++p) {
            tau[p] = detail::trunc_exp(rng, 300e-9, cap);
            gain[p] = {wstd * rng.gaussian(), wstd * rng.gaussian()};
        }
    }
    for (int p = 0; p < n_paths; ++p) theta[p] = rng.uniform(-M_PI / 2.0, M_PI / 2.0);

    const double jstd = detail::mobility_jitter_std(scenario.mobility);
    std::vector<double> jitter(static_cast<std::size_t>(n_paths) * kNumAntennas, 0.0);
    if (jstd > 0.0)
        for (auto& j : jitter) j = jstd * rng.gaussian();

    std::vector<std::complex<double>> h(kGridSize, {0.0, 0.0});
    for (int p = 0; p < n_paths; ++p) {
        const double spatial = M_PI * std::sin(theta[p]);  // d/lambda = 0.5
        for (int a = 0; a < kNumAntennas; ++a) {
            const std::complex<double> steer =
                gain[p] * std::polar(1.0, spatial * a + jitter[p * kNumAntennas + a]);
            for (int s = 0; s < kNumSubcarriers; ++s)
                h[a * kNumSubcarriers + s] += steer * std::polar(1.0, -2.0 * M_PI * s * df * tau[p]);
        }
    }
    detail::normalize_power(h);

    ChannelSample out;
    out.scenario = scenario;
    out.seed = seed;
    out.origin = SampleOrigin::SIMULATED;
    for (int i = 0; i < kGridSize; ++i) out.h[i] = std::complex<float>(h[i]);
    return out;
}

// Comb pilot observation: every pilot_spacing-th subcarrier on all
// antennas, additive circular complex Gaussian noise of variance
// sigma2 = 10^(-snr_db/10) per entry, zero outside the mask.
inline PilotObservation make_pilot_observation(const ChannelSample& sample, int pilot_spacing,
                                               double snr_db, std::uint64_t seed) {
    if (pilot_spacing <= 0) throw std::invalid_argument("pilot_spacing must be >= 1");
    if (kNumSubcarriers % pilot_spacing != 0)
        throw std::invalid_argument("pilot_spacing must divide the subcarrier count");
    PilotObservation obs;
    obs.snr_db = snr_db;
    obs.sigma2 = std::pow(10.0, -snr_db / 10.0);
    const double nstd = std::sqrt(obs.sigma2 / 2.0);
    Rng rng(derive_seed(seed, "pilot-noise"));
    for (int a = 0; a < kNumAntennas; ++a) {
        for (int s = 0; s < kNumSubcarriers; ++s) {
            const int i = a * kNumSubcarriers + s;
            if (s % pilot_spacing == 0) {
                obs.mask[i] = 1;
                std::complex<double> n(nstd * rng.gaussian(), nstd * rng.gaussian());
                obs.y[i] = std::complex<float>(std::complex<double>(sample.h[i]) + n);
            }
        }
    }
    return obs;
}

// RMS delay spread in seconds: per-antenna IDFT across subcarriers, PDP
// averaged over antennas, square-root second central moment over signed
// delay taps (taps >= N/2 counted as negative), times the tap duration.
inline double rms_delay_spread(const std::vector<std::complex<float>>& grid, CarrierBand band) {
    std::vector<double> pdp(kNumSubcarriers, 0.0);
    for (int a = 0; a < kNumAntennas; ++a) {
        for (int k = 0; k < kNumSubcarriers; ++k) {
            std::complex<double> acc{0.0, 0.0};
            for (int s = 0; s < kNumSubcarriers; ++s)
                acc += std::complex<double>(grid[a * kNumSubcarriers + s]) *
                       std::polar(1.0, 2.0 * M_PI * k * s / kNumSubcarriers);
            pdp[k] += std::norm(acc / static_cast<double>(kNumSubcarriers));
        }
    }
    double total = 0.0;
    for (double p : pdp) total += p;
    if (total <= 0.0) return 0.0;
    double mu = 0.0;
    for (int k = 0; k < kNumSubcarriers; ++k) {
        double ks = k >= kNumSubcarriers / 2 ? k - kNumSubcarriers : k;
        mu += ks * pdp[k] / total;
    }
    double m2 = 0.0;
    for (int k = 0; k < kNumSubcarriers; ++k) {
        double ks = k >= kNumSubcarriers / 2 ? k - kNumSubcarriers : k;
        m2 += (ks - mu) * (ks - mu) * pdp[k] / total;
    }
    return std::sqrt(m2) * tap_duration_s(band);
}

inline double rms_delay_spread(const ChannelSample& sample) {
    return rms_delay_spread(sample.h, sample.scenario.carrier_band);
}

enum class AugmentKind { NOISE, TIME_SHIFT, FREQ_OFFSET };

// Classic augmentation. NOISE adds complex Gaussian perturbation of the
// given variance and renormalizes; TIME_SHIFT applies the phase ramp of a
// delay in taps; FREQ_OFFSET circularly shifts the subcarrier axis.
inline ChannelSample augment_classic(const ChannelSample& sample, AugmentKind kind, double param,
                                     std::uint64_t seed) {
    ChannelSample out = sample;
    switch (kind) {
        case AugmentKind::NOISE: {
            if (param < 0.0) throw std::invalid_argument("noise variance must be >= 0");
            if (param == 0.0) return out;
            Rng rng(derive_seed(seed, "augment-noise"));
            const double nstd = std::sqrt(param / 2.0);
            std::vector<std::complex<double>> h(kGridSize);
            for (int i = 0; i < kGridSize; ++i)
                h[i] = std::complex<double>(sample.h[i]) +
                       std::complex<double>(nstd * rng.gaussian(), nstd * rng.gaussian());
            detail::normalize_power(h);
            for (int i = 0; i < kGridSize; ++i) out.h[i] = std::complex<float>(h[i]);
            break;
        }
        case AugmentKind::TIME_SHIFT: {
            if (param == 0.0) return out;
            for (int a = 0; a < kNumAntennas; ++a)
                for (int s = 0; s < kNumSubcarriers; ++s)
                    out.at(a, s) = std::complex<float>(
                        std::complex<double>(sample.at(a, s)) *
                        std::polar(1.0, -2.0 * M_PI * s * param / kNumSubcarriers));
            break;
        }
        case AugmentKind::FREQ_OFFSET: {
            int shift = static_cast<int>(std::llround(param)) % kNumSubcarriers;
            if (shift < 0) shift += kNumSubcarriers;
            if (shift == 0) return out;
            for (int a = 0; a < kNumAntennas; ++a)
                for (int s = 0; s < kNumSubcarriers; ++s)
                    out.at(a, (s + shift) % kNumSubcarriers) = sample.at(a, s);
            break;
        }
    }
    out.augmented = true;
    return out;
}

}  // namespace chanest
