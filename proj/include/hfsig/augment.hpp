#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hfsig/fir.hpp"
#include "hfsig/modem.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/signal.hpp"
#include "hfsig/watterson.hpp"

namespace hfsig {

constexpr size_t kRecordLength = 4096;
// Fixed crop start at 4 kHz; clears the decimation-filter startup.
constexpr size_t kCropStart = 128;

struct AugmentationPlan {
    double freq_offset_hz = 0.0;   // [-500, 500]
    double phase_rad = 0.0;        // [0, 2pi)
    double rate_offset_frac = 0.0; // [0, 0.01]
    double excess_bw_frac = 0.0;   // [0, 0.5]
    double snr_db = 25.0;          // [-10, 25]
    double impulse_prob = 0.0;     // [1e-4, 1e-2] when drawn
    double impulse_scale = 0.0;    // [10, 30] when drawn
    int preset_index = 0;          // into the preset table
    uint64_t channel_seed = 0;     // rng for fading + noise stages
    uint64_t channel_stream = 0;
};

struct PlanDrawOptions {
    double snr_min_db = -10.0;
    double snr_max_db = 25.0;
    // Indices eligible for the preset draw; empty means the whole table.
    std::vector<int> preset_indices;
};

// Field draw order below is a wire contract: evaluation re-derives plans
// from manifests by replaying it, so it must never change.
inline AugmentationPlan draw_plan(SeededRng& rng,
                                  const std::vector<WattersonPreset>& presets,
                                  const PlanDrawOptions& opt = {}) {
    if (presets.empty()) throw std::invalid_argument("empty preset table");
    AugmentationPlan p;
    p.freq_offset_hz = rng.uniform(-500.0, 500.0);
    p.phase_rad = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p.rate_offset_frac = rng.uniform(0.0, 0.01);
    p.excess_bw_frac = rng.uniform(0.0, 0.5);
    p.snr_db = rng.uniform(opt.snr_min_db, opt.snr_max_db);
    p.impulse_prob = rng.log_uniform(1e-4, 1e-2);
    p.impulse_scale = rng.uniform(10.0, 30.0);
    if (opt.preset_indices.empty()) {
        p.preset_index = static_cast<int>(rng.below(presets.size()));
    } else {
        const auto pick = rng.below(opt.preset_indices.size());
        p.preset_index = opt.preset_indices[pick];
    }
    if (p.preset_index < 0 || p.preset_index >= static_cast<int>(presets.size()))
        throw std::invalid_argument("preset index out of table range");
    p.channel_seed = rng.next_u64();
    p.channel_stream = rng.next_u64();
    return p;
}

inline IqSignal apply_freq_phase(const IqSignal& sig, double freq_offset_hz,
                                 double phase_rad) {
    if (std::abs(freq_offset_hz) > sig.sample_rate_hz / 2.0)
        throw std::invalid_argument("frequency offset beyond Nyquist");
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.resize(sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i) {
        const double ph = 2.0 * std::numbers::pi * freq_offset_hz *
                              static_cast<double>(i) / sig.sample_rate_hz +
                          phase_rad;
        out.samples[i] = sig.samples[i] * cplx{std::cos(ph), std::sin(ph)};
    }
    return out;
}

inline IqSignal apply_rate_offset(const IqSignal& sig, double rate_offset_frac) {
    if (rate_offset_frac < 0.0 || rate_offset_frac > 0.01)
        throw std::invalid_argument("rate offset outside [0, 0.01]");
    if (rate_offset_frac == 0.0) return sig;
    return resample(sig, 1.0 + rate_offset_frac);
}

// Kaiser lowpass shifted to center_hz, cutoff nominal*(1+excess)/2.
inline IqSignal apply_band_filter(const IqSignal& sig, double nominal_bw_hz,
                                  double excess_bw_frac, double center_hz = 0.0) {
    if (nominal_bw_hz * (1.0 + excess_bw_frac) > sig.sample_rate_hz)
        throw std::invalid_argument("cutoff above Nyquist");
    const double cutoff = nominal_bw_hz * (1.0 + excess_bw_frac) / 2.0;
    const double transition = std::clamp(0.2 * cutoff, 25.0, 100.0);
    const auto lp = design_kaiser_lowpass(sig.sample_rate_hz, cutoff, transition, 70.0);
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    if (center_hz == 0.0) {
        out.samples = fft_filter_same(sig.samples, lp);
    } else {
        out.samples = fft_filter_same(sig.samples, modulate_taps(lp, center_hz,
                                                                 sig.sample_rate_hz));
    }
    return out;
}

inline IqSignal apply_awgn(const IqSignal& sig, double snr_db, SeededRng& rng) {
    const double p_sig = measure_power(sig);
    if (p_sig <= 0.0) throw std::invalid_argument("silent signal");
    const double p_noise = p_sig / std::pow(10.0, snr_db / 10.0);
    const double scale = std::sqrt(p_noise);
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.resize(sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i)
        out.samples[i] = sig.samples[i] + scale * rng.cnormal();
    return out;
}

// Bernoulli-Gaussian atmospheric bursts.  Each sample independently
// receives, with probability impulse_prob, a complex Gaussian impulse of
// total power (impulse_scale^2 * P_sig).
inline IqSignal apply_impulsive_noise(const IqSignal& sig, double impulse_prob,
                                      double impulse_scale, SeededRng& rng) {
    if (impulse_prob < 0.0 || impulse_prob > 0.02)
        throw std::invalid_argument("impulse probability outside [0, 0.02]");
    if (impulse_prob == 0.0) return sig;
    const double p_sig = measure_power(sig);
    const double scale = impulse_scale * std::sqrt(p_sig);
    IqSignal out = sig;
    for (auto& s : out.samples)
        if (rng.bernoulli(impulse_prob)) s += scale * rng.cnormal();
    return out;
}

// Optional capture of the clean/noise decomposition of the final record
// (window-cropped, before normalization) for SNR verification.
struct PlanDebug {
    std::vector<cplx> clean;    // signal incl. impulses excluded, pre-noise
    std::vector<cplx> impulses; // impulse contribution in the window
    std::vector<cplx> awgn;     // thermal noise contribution in the window
    double norm_gain = 1.0;
};

// Full augmentation chain: band filter, fading, rate offset,
// decimation to 4 kHz, frequency/phase offset, impulsive noise, AWGN,
// crop to 4096, unit-power normalization.
inline IqSignal apply_plan(const ModemOutput& mo, const AugmentationPlan& plan,
                           const std::vector<WattersonPreset>& presets,
                           PlanDebug* debug = nullptr) {
    if (mo.signal.sample_rate_hz != kSynthRateHz)
        throw std::invalid_argument("apply_plan expects a 12 kHz modem signal");
    if (mo.signal.duration_s() < 1.5)
        throw std::invalid_argument("apply_plan needs >= 1.5 s of signal");
    if (plan.preset_index < 0 ||
        plan.preset_index >= static_cast<int>(presets.size()))
        throw std::invalid_argument("preset index out of table range");

    SeededRng ch(plan.channel_seed, plan.channel_stream);

    IqSignal x = apply_band_filter(mo.signal, mo.mode.nominal_bandwidth_hz,
                                   plan.excess_bw_frac, mo.carrier_offset_hz);
    x = apply_watterson(x, presets[static_cast<size_t>(plan.preset_index)], ch);
    x = apply_rate_offset(x, plan.rate_offset_frac);
    x = decimate(x, 3);
    x = apply_freq_phase(x, plan.freq_offset_hz, plan.phase_rad);

    if (kCropStart + kRecordLength > x.samples.size())
        throw std::runtime_error("record too short after resampling");

    // Noise levels are calibrated against the power of the crop window --
    // the record that actually survives to the dataset.
    const double p_win = measure_power(x.samples, kCropStart, kRecordLength);
    if (p_win <= 0.0) throw std::invalid_argument("silent signal");

    std::vector<cplx> impulses(x.samples.size(), cplx{0.0, 0.0});
    const double imp_scale = plan.impulse_scale * std::sqrt(p_win);
    if (plan.impulse_prob > 0.0) {
        for (auto& v : impulses)
            if (ch.bernoulli(plan.impulse_prob)) v = imp_scale * ch.cnormal();
    }
    const double noise_scale =
        std::sqrt(p_win / std::pow(10.0, plan.snr_db / 10.0));
    std::vector<cplx> awgn(x.samples.size());
    for (auto& v : awgn) v = noise_scale * ch.cnormal();

    IqSignal rec;
    rec.sample_rate_hz = x.sample_rate_hz;
    rec.samples.resize(kRecordLength);
    for (size_t i = 0; i < kRecordLength; ++i) {
        const size_t j = kCropStart + i;
        rec.samples[i] = x.samples[j] + impulses[j] + awgn[j];
    }
    const double p_rec = measure_power(rec);
    if (p_rec <= 0.0) throw std::invalid_argument("silent signal");
    const double g = 1.0 / std::sqrt(p_rec);
    for (auto& s : rec.samples) s *= g;

    if (debug) {
        debug->clean.assign(x.samples.begin() + kCropStart,
                            x.samples.begin() + kCropStart + kRecordLength);
        debug->impulses.assign(impulses.begin() + kCropStart,
                               impulses.begin() + kCropStart + kRecordLength);
        debug->awgn.assign(awgn.begin() + kCropStart,
                           awgn.begin() + kCropStart + kRecordLength);
        debug->norm_gain = g;
    }
    return rec;
}

}  // namespace hfsig
