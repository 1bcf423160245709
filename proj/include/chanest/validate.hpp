#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "chanest/channel.hpp"
#include "chanest/gan.hpp"

namespace chanest {

// Thresholds are calibrated from data, never hard-coded: theta_r from the
// discriminator's score distribution on held-out real samples, tau_b from
// the LoS/NLoS delay-spread separation on the training set.
struct ValidatorConfig {
    double power_lo = 0.25;          // x expected total power
    double power_hi = 4.0;
    double entry_cap = 10.0;         // per-entry magnitude bound
    double realism_threshold = 0.0;  // theta_r, in (0,1) once calibrated
    double spread_boundary = 0.0;    // tau_b, log10 seconds
};

enum class FlagType { CONSTRAINT, FABRICATED, CONTEXT };

inline const char* to_string(FlagType t) {
    switch (t) {
        case FlagType::CONSTRAINT: return "CONSTRAINT";
        case FlagType::FABRICATED: return "FABRICATED";
        default: return "CONTEXT";
    }
}

struct ValidationFlag {
    FlagType type;
    std::string detail;
    double measured = 0.0;
};

struct ValidationReport {
    std::vector<ValidationFlag> flags;
    bool passed = true;  // passed <=> flags empty
};

// Physical/technical constraint check: finiteness, total power within its
// calibrated band around the expected grid power, per-entry magnitude cap.
inline std::vector<ValidationFlag> check_constraints(const std::vector<std::complex<float>>& h,
                                                     const ValidatorConfig& cfg) {
    std::vector<ValidationFlag> flags;
    int non_finite = 0;
    double power = 0.0, max_abs = 0.0;
    for (const auto& v : h) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            ++non_finite;
            continue;
        }
        const double m2 = std::norm(std::complex<double>(v));
        power += m2;
        max_abs = std::max(max_abs, std::sqrt(m2));
    }
    if (non_finite > 0)
        flags.push_back({FlagType::CONSTRAINT, "non-finite entries", double(non_finite)});
    const double expected = static_cast<double>(h.size());
    if (non_finite == 0 && (power < cfg.power_lo * expected || power > cfg.power_hi * expected))
        flags.push_back({FlagType::CONSTRAINT, "total power outside bounds", power / expected});
    if (max_abs > cfg.entry_cap)
        flags.push_back({FlagType::CONSTRAINT, "entry magnitude above cap", max_abs});
    return flags;
}

// Fabricated-output check: discriminator realism score below the calibrated
// 5th-percentile threshold of held-out real data. Input is power-normalized
// first so that pure scaling trips only the constraint check.
inline std::vector<ValidationFlag> check_fabricated(const std::vector<std::complex<float>>& h,
                                                    Discriminator<float>& disc,
                                                    const ValidatorConfig& cfg) {
    std::vector<ValidationFlag> flags;
    double power = 0.0;
    for (const auto& v : h) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return flags;  // constraint's job
        power += std::norm(std::complex<double>(v));
    }
    if (power <= 0.0) return flags;  // power faults are the constraint check's job
    std::vector<std::complex<float>> hn(h.size());
    const float s = static_cast<float>(std::sqrt(static_cast<double>(h.size()) / power));
    for (std::size_t i = 0; i < h.size(); ++i) hn[i] = h[i] * s;
    const double score = realism_score(disc, hn).value;
    if (score < cfg.realism_threshold)
        flags.push_back({FlagType::FABRICATED, "realism score below threshold", score});
    return flags;
}

// Context-detachment check: the RMS delay spread must fall on the declared
// environment's side of the calibrated boundary. NaN spreads never compare
// true, so non-finite inputs are left to the constraint check.
inline std::vector<ValidationFlag> check_context(const std::vector<std::complex<float>>& h,
                                                 const ScenarioClass& declared,
                                                 const ValidatorConfig& cfg) {
    std::vector<ValidationFlag> flags;
    for (const auto& v : h)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return flags;  // constraint's job
    const double spread = rms_delay_spread(h, declared.carrier_band);
    const double log_spread = spread > 0.0 ? std::log10(spread) : -12.0;
    const bool los = declared.environment == Environment::LOS;
    if ((los && log_spread > cfg.spread_boundary) || (!los && log_spread < cfg.spread_boundary))
        flags.push_back({FlagType::CONTEXT,
                         std::string("delay spread inconsistent with declared ") +
                             (los ? "LOS" : "NLOS"),
                         log_spread});
    return flags;
}

inline ValidationReport validate_estimate(const std::vector<std::complex<float>>& h,
                                          const ScenarioClass& declared,
                                          Discriminator<float>& disc,
                                          const ValidatorConfig& cfg) {
    ValidationReport r;
    for (auto& f : check_constraints(h, cfg)) r.flags.push_back(std::move(f));
    for (auto& f : check_fabricated(h, disc, cfg)) r.flags.push_back(std::move(f));
    for (auto& f : check_context(h, declared, cfg)) r.flags.push_back(std::move(f));
    r.passed = r.flags.empty();
    return r;
}

struct HallucinationRate {
    double total = 0.0;  // fraction of samples with at least one flag
    double constraint = 0.0, fabricated = 0.0, context = 0.0;
};

inline HallucinationRate hallucination_rate(
    const std::vector<std::vector<std::complex<float>>>& estimates,
    const std::vector<ScenarioClass>& contexts, Discriminator<float>& disc,
    const ValidatorConfig& cfg) {
    if (estimates.empty()) throw std::invalid_argument("hallucination_rate: empty batch");
    if (estimates.size() != contexts.size())
        throw std::invalid_argument("hallucination_rate: batch length mismatch");
    HallucinationRate r;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        auto rep = validate_estimate(estimates[i], contexts[i], disc, cfg);
        bool c = false, f = false, x = false;
        for (const auto& fl : rep.flags) {
            c |= fl.type == FlagType::CONSTRAINT;
            f |= fl.type == FlagType::FABRICATED;
            x |= fl.type == FlagType::CONTEXT;
        }
        r.total += !rep.passed;
        r.constraint += c;
        r.fabricated += f;
        r.context += x;
    }
    const double n = static_cast<double>(estimates.size());
    r.total /= n;
    r.constraint /= n;
    r.fabricated /= n;
    r.context /= n;
    return r;
}

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace detail

// theta_r = 5th percentile of discriminator scores on held-out real samples;
// tau_b = midpoint of the median LOS and median NLOS log10 delay spreads.
inline ValidatorConfig calibrate_validators(const std::vector<const ChannelSample*>& train,
                                            const std::vector<const ChannelSample*>& held_out_real,
                                            Discriminator<float>& disc,
                                            ValidatorConfig cfg = {}) {
    if (train.empty() || held_out_real.empty())
        throw std::invalid_argument("calibrate_validators: empty calibration sets");
    std::vector<double> scores;
    scores.reserve(held_out_real.size());
    for (const auto* s : held_out_real) scores.push_back(realism_score(disc, *s).value);
    cfg.realism_threshold = detail::percentile(scores, 0.05);

    std::vector<double> los_log, nlos_log;
    for (const auto* s : train) {
        const double sp = rms_delay_spread(*s);
        if (sp <= 0.0) continue;
        (s->scenario.environment == Environment::LOS ? los_log : nlos_log)
            .push_back(std::log10(sp));
    }
    if (los_log.empty() || nlos_log.empty())
        throw std::invalid_argument("calibrate_validators: need both LOS and NLOS samples");
    cfg.spread_boundary =
        0.5 * (detail::percentile(los_log, 0.5) + detail::percentile(nlos_log, 0.5));
    return cfg;
}

// One line per sample: id, pass/fail, flags with measured values.
inline void write_report_line(std::ostream& os, const std::string& sample_id,
                              const ValidationReport& r) {
    os << sample_id << (r.passed ? " pass" : " fail");
    for (const auto& f : r.flags)
        os << " " << to_string(f.type) << "[" << f.detail << "=" << f.measured << "]";
    os << '\n';
}

}  // namespace chanest
