#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "hfsig/fft.hpp"
#include "hfsig/fir.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/spectrum.hpp"
#include "test_util.hpp"

using namespace hfsig;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
    const size_t n = x.size();
    std::vector<cplx> out(n);
    for (size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * std::numbers::pi *
                               static_cast<double>(k * j) / static_cast<double>(n);
            acc += x[j] * cplx{std::cos(ang), std::sin(ang)};
        }
        out[k] = acc;
    }
    return out;
}

// Complex frequency response of a real FIR at frequency f.
double fir_gain_db(const std::vector<double>& h, double f, double fs) {
    cplx acc{0.0, 0.0};
    for (size_t i = 0; i < h.size(); ++i) {
        const double ang = -2.0 * std::numbers::pi * f * static_cast<double>(i) / fs;
        acc += h[i] * cplx{std::cos(ang), std::sin(ang)};
    }
    return 20.0 * std::log10(std::abs(acc) + 1e-300);
}

}  // namespace

TEST_CASE("next_pow2") {
    REQUIRE(next_pow2(1) == 1);
    REQUIRE(next_pow2(2) == 2);
    REQUIRE(next_pow2(3) == 4);
    REQUIRE(next_pow2(4096) == 4096);
    REQUIRE(next_pow2(4097) == 8192);
}

TEST_CASE("fft matches the direct dft") {
    SeededRng rng(11, 0);
    std::vector<cplx> x(64);
    for (auto& v : x) v = rng.cnormal();
    auto ref = naive_dft(x);
    auto got = x;
    FftPlan plan(64);
    plan.forward(got);
    for (size_t k = 0; k < x.size(); ++k)
        REQUIRE(std::abs(got[k] - ref[k]) < 1e-9);
}

TEST_CASE("fft round trip is the identity") {
    SeededRng rng(12, 0);
    std::vector<cplx> x(256);
    for (auto& v : x) v = rng.cnormal();
    auto y = x;
    FftPlan plan(256);
    plan.forward(y);
    plan.inverse(y);
    for (size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(y[i] - x[i]) < 1e-12);
}

TEST_CASE("fft rejects non power of two lengths") {
    REQUIRE_THROWS(FftPlan(48));
}

TEST_CASE("kaiser lowpass: unity dc, 70 dB stopband") {
    const double fs = 12000.0, cutoff = 600.0, transition = 100.0;
    const auto h = design_kaiser_lowpass(fs, cutoff, transition, 70.0);
    REQUIRE(h.size() % 2 == 1);
    REQUIRE(std::abs(fir_gain_db(h, 0.0, fs)) < 0.01);
    REQUIRE(fir_gain_db(h, cutoff * 0.8, fs) > -0.5);
    for (double f = cutoff + transition; f < fs / 2; f += 50.0)
        REQUIRE(fir_gain_db(h, f, fs) < -60.0);
    REQUIRE_THROWS_WITH(design_kaiser_lowpass(4000.0, 2500.0, 100.0, 70.0),
                        Catch::Matchers::ContainsSubstring("Nyquist"));
}

TEST_CASE("fft_filter_same equals direct convolution with delay removed") {
    SeededRng rng(13, 0);
    std::vector<cplx> x(200);
    for (auto& v : x) v = rng.cnormal();
    std::vector<double> h(21);
    for (auto& v : h) v = rng.normal();
    const auto y = fft_filter_same(x, h);
    REQUIRE(y.size() == x.size());
    const size_t d = (h.size() - 1) / 2;
    for (size_t n = 0; n < x.size(); ++n) {
        cplx acc{0.0, 0.0};
        for (size_t k = 0; k < h.size(); ++k) {
            const auto idx = static_cast<ptrdiff_t>(n + d) - static_cast<ptrdiff_t>(k);
            if (idx >= 0 && idx < static_cast<ptrdiff_t>(x.size()))
                acc += h[k] * x[static_cast<size_t>(idx)];
        }
        REQUIRE(std::abs(y[n] - acc) < 1e-9);
    }
}

TEST_CASE("resample at ratio 1 is exact") {
    IqSignal s = tu::tone(4000.0, 333.0, 4096);
    IqSignal r = resample(s, 1.0);
    REQUIRE(r.samples.size() == s.samples.size());
    for (size_t i = 0; i < s.samples.size(); ++i)
        REQUIRE(std::abs(r.samples[i] - s.samples[i]) < 1e-9);
}

TEST_CASE("resample length contract: 4137 samples at 1.01 keeps 4096") {
    IqSignal s = tu::tone(4000.0, 100.0, 4137);
    IqSignal r = resample(s, 1.01);
    REQUIRE(r.samples.size() >= 4096);
}

TEST_CASE("resample shifts a 500 Hz tone to 505 Hz at ratio 1.01") {
    IqSignal s = tu::tone(4000.0, 500.0, 8192);
    IqSignal r = resample(s, 1.01);
    const double f = peak_frequency(r);
    REQUIRE(std::abs(f - 505.0) < 1.0);
}

TEST_CASE("decimate by 3 keeps in-band tones and kills aliases") {
    const size_t n = 12000 * 2;
    IqSignal in = tu::tone(12000.0, 300.0, n);
    const IqSignal alias_src = tu::tone(12000.0, 2500.0, n);
    for (size_t i = 0; i < n; ++i) in.samples[i] += alias_src.samples[i];

    IqSignal out = decimate(in, 3);
    REQUIRE(out.sample_rate_hz == 4000.0);
    REQUIRE(out.samples.size() == n / 3);

    const auto ps = welch_psd(out, 2048);
    double p300 = 0.0, p_alias = 0.0;
    for (size_t i = 0; i < ps.freq_hz.size(); ++i) {
        if (std::abs(ps.freq_hz[i] - 300.0) < 20.0) p300 += ps.psd[i];
        // 2500 Hz folds to -1500 after decimation to 4 kHz.
        if (std::abs(ps.freq_hz[i] + 1500.0) < 20.0) p_alias += ps.psd[i];
    }
    REQUIRE(p_alias < p300 * 1e-5);
}

TEST_CASE("analytic signal of a cosine is the complex exponential") {
    const double fs = 4000.0, f = 200.0;
    std::vector<double> x(8192);
    for (size_t i = 0; i < x.size(); ++i)
        x[i] = std::cos(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
    IqSignal a;
    a.sample_rate_hz = fs;
    a.samples = analytic_signal(x);
    REQUIRE(a.samples.size() == x.size());
    // Positive-frequency content only: the peak sits at +200 Hz and the
    // mirrored line at -200 Hz is suppressed.
    const auto ps = welch_psd(a, 2048);
    double pos = 0.0, neg = 0.0;
    for (size_t i = 0; i < ps.freq_hz.size(); ++i) {
        if (std::abs(ps.freq_hz[i] - f) < 10.0) pos += ps.psd[i];
        if (std::abs(ps.freq_hz[i] + f) < 10.0) neg += ps.psd[i];
    }
    REQUIRE(neg < pos * 1e-4);
    for (size_t i = 0; i < x.size(); ++i)
        REQUIRE(std::abs(a.samples[i].real() - x[i]) < 1e-6);
}
