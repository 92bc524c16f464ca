#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "hfsig/augment.hpp"
#include "hfsig/dataset.hpp"
#include "hfsig/spectrum.hpp"
#include "test_util.hpp"

using namespace hfsig;

namespace {

ModemOutput make_mode_output(const std::string& name, uint64_t seed) {
    static const ModeRegistry reg = default_registry();
    SeededRng sym(seed, 701);
    SeededRng rng(seed, 700);
    const ModeSpec& mode = find_mode(reg, name);
    SymbolSource src{symbol_kind_for(mode.kind), &sym, 0};
    return synthesize(mode, 1.75, src, rng);
}

double complex_corr(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx num{0.0, 0.0};
    double da = 0.0, db = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += a[i] * std::conj(b[i]);
        da += std::norm(a[i]);
        db += std::norm(b[i]);
    }
    return std::abs(num) / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("apply_freq_phase shifts and rotates") {
    IqSignal s = tu::tone(4000.0, 100.0, 8192);
    const IqSignal shifted = apply_freq_phase(s, 50.0, 0.0);
    REQUIRE(std::abs(peak_frequency(shifted) - 150.0) < 0.5);

    const IqSignal negated = apply_freq_phase(s, 0.0, std::numbers::pi);
    for (size_t i = 0; i < s.samples.size(); ++i)
        REQUIRE(std::abs(negated.samples[i] + s.samples[i]) < 1e-12);

    REQUIRE_THROWS_WITH(apply_freq_phase(s, 2100.0, 0.0),
                        Catch::Matchers::ContainsSubstring("Nyquist"));
}

TEST_CASE("apply_rate_offset honours range and identity") {
    IqSignal s = tu::tone(4000.0, 500.0, 4137);
    const IqSignal same = apply_rate_offset(s, 0.0);
    REQUIRE(same.samples == s.samples);
    const IqSignal warped = apply_rate_offset(s, 0.01);
    REQUIRE(warped.samples.size() >= 4096);
    REQUIRE(std::abs(peak_frequency(warped) - 505.0) < 1.0);
    REQUIRE_THROWS(apply_rate_offset(s, 0.02));
    REQUIRE_THROWS(apply_rate_offset(s, -0.001));
}

TEST_CASE("band filter: passband flat, stopband 60 dB down") {
    SeededRng rng(31, 0);
    IqSignal noise;
    noise.sample_rate_hz = 12000.0;
    noise.samples.resize(1 << 15);
    for (auto& v : noise.samples) v = rng.cnormal();

    const IqSignal filtered = apply_band_filter(noise, 1000.0, 0.0);
    const auto ps = welch_psd(filtered, 4096);
    double in_p = 0.0, out_p = 0.0;
    size_t n_in = 0, n_out = 0;
    for (size_t i = 0; i < ps.freq_hz.size(); ++i) {
        const double f = std::abs(ps.freq_hz[i]);
        if (f < 450.0) {
            in_p += ps.psd[i];
            ++n_in;
        } else if (f > 700.0) {
            out_p += ps.psd[i];
            ++n_out;
        }
    }
    const double gap_db = 10.0 * std::log10((in_p / n_in) / (out_p / n_out));
    REQUIRE(gap_db > 60.0);

    IqSignal t = tu::tone(12000.0, 100.0, 1 << 15);
    const IqSignal tf = apply_band_filter(t, 1000.0, 0.0);
    const double att_db = 10.0 * std::log10(measure_power(t) / measure_power(tf));
    REQUIRE(std::abs(att_db) < 0.5);

    // Shifted center: a tone at the center passes, one at zero does not.
    IqSignal tc = tu::tone(12000.0, 1000.0, 1 << 15);
    const IqSignal tc_f = apply_band_filter(tc, 800.0, 0.0, 1000.0);
    REQUIRE(measure_power(tc_f) > 0.8);
    // Steady-state rejection: skip the startup/tail transients of the
    // ~650-tap filter, which otherwise dominate a full-length power measure.
    const IqSignal t0_f = apply_band_filter(t, 800.0, 0.0, 1000.0);
    REQUIRE(measure_power(t0_f.samples, 2048, t0_f.samples.size() - 4096) < 1e-5);

    REQUIRE_THROWS_WITH(apply_band_filter(t, 13000.0, 0.0),
                        Catch::Matchers::ContainsSubstring("Nyquist"));
}

TEST_CASE("awgn power calibration across the SNR range") {
    IqSignal s = tu::tone(4000.0, 300.0, 4096);
    for (const double snr : {0.0, 25.0, -10.0}) {
        SeededRng rng(32, static_cast<uint64_t>(snr + 100));
        const IqSignal out = apply_awgn(s, snr, rng);
        double p_noise = 0.0;
        for (size_t i = 0; i < s.samples.size(); ++i)
            p_noise += std::norm(out.samples[i] - s.samples[i]);
        p_noise /= static_cast<double>(s.samples.size());
        const double expect = std::pow(10.0, -snr / 10.0);  // P_sig = 1
        REQUIRE(std::abs(p_noise - expect) < 0.05 * expect);
    }
}

TEST_CASE("impulsive noise: count interval and Gaussian magnitudes") {
    IqSignal s = tu::tone(4000.0, 300.0, 4096);
    SeededRng rng(33, 0);
    const IqSignal same = apply_impulsive_noise(s, 0.0, 20.0, rng);
    REQUIRE(same.samples == s.samples);

    const IqSignal out = apply_impulsive_noise(s, 0.005, 20.0, rng);
    size_t count = 0;
    for (size_t i = 0; i < s.samples.size(); ++i)
        if (out.samples[i] != s.samples[i]) ++count;
    REQUIRE(count >= 5);
    REQUIRE(count <= 45);

    // Larger record for stable statistics on the impulse magnitudes.
    IqSignal big = tu::tone(4000.0, 300.0, 1 << 16);
    SeededRng rng2(34, 0);
    const IqSignal bo = apply_impulsive_noise(big, 0.005, 20.0, rng2);
    size_t n_imp = 0, n_big = 0;
    double p_add = 0.0;
    for (size_t i = 0; i < big.samples.size(); ++i) {
        const cplx d = bo.samples[i] - big.samples[i];
        if (d != cplx{0.0, 0.0}) {
            ++n_imp;
            p_add += std::norm(d);
            if (std::abs(d) > 5.0) ++n_big;  // 5 * sqrt(P_sig), P_sig = 1
        }
    }
    REQUIRE(n_imp > 200);
    // Mean per-impulse power = scale^2 * P_sig = 400.
    REQUIRE(std::abs(p_add / static_cast<double>(n_imp) - 400.0) < 80.0);
    // P(|impulse| > 5) = exp(-25/400) = 0.9394 for a complex Gaussian
    // with mean square 400; the heavy tail dominates the signal scale.
    const double frac = static_cast<double>(n_big) / static_cast<double>(n_imp);
    REQUIRE(frac > 0.90);
    REQUIRE(frac < 0.97);

    REQUIRE_THROWS(apply_impulsive_noise(s, 0.05, 20.0, rng));
}

TEST_CASE("draw_plan respects every documented range") {
    const auto table = default_watterson_presets();
    SeededRng rng(35, 0);
    PlanDrawOptions opt;
    opt.snr_min_db = -4.0;
    opt.snr_max_db = 11.0;
    opt.preset_indices = {2, 5, 9};
    for (int i = 0; i < 2000; ++i) {
        const AugmentationPlan p = draw_plan(rng, table, opt);
        REQUIRE(p.freq_offset_hz >= -500.0);
        REQUIRE(p.freq_offset_hz <= 500.0);
        REQUIRE(p.phase_rad >= 0.0);
        REQUIRE(p.phase_rad < 2.0 * std::numbers::pi);
        REQUIRE(p.rate_offset_frac >= 0.0);
        REQUIRE(p.rate_offset_frac <= 0.01);
        REQUIRE(p.excess_bw_frac >= 0.0);
        REQUIRE(p.excess_bw_frac <= 0.5);
        REQUIRE(p.snr_db >= -4.0);
        REQUIRE(p.snr_db <= 11.0);
        REQUIRE(p.impulse_prob >= 1e-4);
        REQUIRE(p.impulse_prob <= 1e-2);
        REQUIRE(p.impulse_scale >= 10.0);
        REQUIRE(p.impulse_scale <= 30.0);
        const bool in_subset =
            p.preset_index == 2 || p.preset_index == 5 || p.preset_index == 9;
        REQUIRE(in_subset);
    }
}

TEST_CASE("apply_plan: shape, power, determinism") {
    const auto table = default_watterson_presets();
    const ModemOutput mo = make_mode_output("psk63", 51);
    SeededRng prng(52, 0);
    const AugmentationPlan plan = draw_plan(prng, table);
    const IqSignal a = apply_plan(mo, plan, table);
    const IqSignal b = apply_plan(mo, plan, table);
    REQUIRE(a.samples.size() == kRecordLength);
    REQUIRE(a.sample_rate_hz == 4000.0);
    REQUIRE(all_finite(a));
    REQUIRE(std::abs(measure_power(a) - 1.0) < 1e-12);
    REQUIRE(a.samples == b.samples);
}

TEST_CASE("apply_plan rejects malformed input") {
    const auto table = default_watterson_presets();
    ModemOutput mo = make_mode_output("psk63", 53);
    AugmentationPlan plan;
    plan.preset_index = 99;
    REQUIRE_THROWS(apply_plan(mo, plan, table));
    plan.preset_index = 0;
    mo.signal.sample_rate_hz = 4000.0;
    REQUIRE_THROWS(apply_plan(mo, plan, table));
}

TEST_CASE("near-identity plan reduces to decimate + crop + normalize") {
    const auto table = default_watterson_presets();
    const ModemOutput mo = make_mode_output("psk63", 54);
    AugmentationPlan plan;  // zero offsets, zero impulses
    plan.snr_db = 25.0;
    plan.preset_index = 0;  // identity
    plan.channel_seed = 9, plan.channel_stream = 1;
    const IqSignal out = apply_plan(mo, plan, table);

    IqSignal ref = crop(decimate(mo.signal, 3), kCropStart, kRecordLength);
    ref = normalize_power(ref);
    REQUIRE(complex_corr(out.samples, ref.samples) > 0.99);
}

TEST_CASE("per-record SNR calibration lands within half a dB") {
    const auto table = default_watterson_presets();
    static const ModeRegistry reg = default_registry();
    SeededRng prng(55, 0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const ModeSpec& mode = reg[static_cast<size_t>(i) % reg.size()];
        SeededRng sym(60 + i, 801);
        SeededRng mrng(60 + i, 800);
        SymbolSource src{symbol_kind_for(mode.kind), &sym, 0};
        const ModemOutput mo = synthesize(mode, 1.75, src, mrng);
        const AugmentationPlan plan = draw_plan(prng, table);
        PlanDebug dbg;
        (void)apply_plan(mo, plan, table, &dbg);
        const double p_sig = measure_power(dbg.clean, 0, dbg.clean.size());
        const double p_noise = measure_power(dbg.awgn, 0, dbg.awgn.size());
        const double snr_est = 10.0 * std::log10(p_sig / p_noise);
        worst = std::max(worst, std::abs(snr_est - plan.snr_db));
    }
    REQUIRE(worst <= 0.5);
}
