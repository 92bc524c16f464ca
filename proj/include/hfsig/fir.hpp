#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hfsig/fft.hpp"
#include "hfsig/signal.hpp"

namespace hfsig {

namespace detail {

inline double bessel_i0(double x) {
    // Series expansion; converges quickly for the beta range used here.
    const double h = x * 0.5;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= (h / k) * (h / k);
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace detail

inline double kaiser_beta(double atten_db) {
    if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
    if (atten_db >= 21.0)
        return 0.5842 * std::pow(atten_db - 21.0, 0.4) +
               0.07886 * (atten_db - 21.0);
    return 0.0;
}

// Odd-length linear-phase Kaiser lowpass with unity DC gain.
inline std::vector<double> design_kaiser_lowpass(double sample_rate_hz,
                                                 double cutoff_hz,
                                                 double transition_hz,
                                                 double atten_db = 70.0) {
    if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate_hz / 2.0)
        throw std::invalid_argument("cutoff above Nyquist");
    if (transition_hz <= 0.0)
        throw std::invalid_argument("transition width must be positive");
    const double dw = 2.0 * std::numbers::pi * transition_hz / sample_rate_hz;
    size_t n = static_cast<size_t>(
        std::ceil((std::max(atten_db, 22.0) - 7.95) / (2.285 * dw)));
    if (n % 2 == 0) ++n;
    if (n < 11) n = 11;
    const double beta = kaiser_beta(atten_db);
    const double i0b = detail::bessel_i0(beta);
    const double fc = cutoff_hz / sample_rate_hz;  // cycles per sample
    const double mid = static_cast<double>(n - 1) / 2.0;
    std::vector<double> taps(n);
    double dc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) - mid;
        const double r = t / mid;
        const double w = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        taps[i] = 2.0 * fc * detail::sinc(2.0 * fc * t) * w;
        dc += taps[i];
    }
    for (double& t : taps) t /= dc;
    return taps;
}

// Shift a real lowpass prototype to a complex bandpass centered at
// center_hz.  Passband becomes [center - cutoff, center + cutoff].
inline std::vector<cplx> modulate_taps(const std::vector<double>& lowpass,
                                       double center_hz,
                                       double sample_rate_hz) {
    std::vector<cplx> out(lowpass.size());
    const double mid = static_cast<double>(lowpass.size() - 1) / 2.0;
    for (size_t i = 0; i < lowpass.size(); ++i) {
        const double a = 2.0 * std::numbers::pi * center_hz *
                         (static_cast<double>(i) - mid) / sample_rate_hz;
        out[i] = lowpass[i] * cplx{std::cos(a), std::sin(a)};
    }
    return out;
}

// Linear convolution via FFT, trimmed to the input length with the filter
// group delay removed, so a symmetric filter leaves features in place.
inline std::vector<cplx> fft_filter_same(const std::vector<cplx>& x,
                                         const std::vector<cplx>& taps) {
    if (x.empty()) throw std::invalid_argument("empty signal");
    if (taps.empty() || taps.size() % 2 == 0)
        throw std::invalid_argument("filter must have odd length");
    const size_t full = x.size() + taps.size() - 1;
    const size_t n = next_pow2(full);
    FftPlan plan(n);
    std::vector<cplx> fx(n), fh(n);
    std::copy(x.begin(), x.end(), fx.begin());
    std::copy(taps.begin(), taps.end(), fh.begin());
    plan.forward(fx);
    plan.forward(fh);
    for (size_t i = 0; i < n; ++i) fx[i] *= fh[i];
    plan.inverse(fx);
    const size_t delay = (taps.size() - 1) / 2;
    std::vector<cplx> y(x.size());
    std::copy(fx.begin() + static_cast<ptrdiff_t>(delay),
              fx.begin() + static_cast<ptrdiff_t>(delay + x.size()), y.begin());
    return y;
}

inline std::vector<cplx> fft_filter_same(const std::vector<cplx>& x,
                                         const std::vector<double>& taps) {
    std::vector<cplx> ct(taps.begin(), taps.end());
    return fft_filter_same(x, ct);
}

// Integer decimation with a built-in anti-alias lowpass.
inline IqSignal decimate(const IqSignal& sig, unsigned factor) {
    if (factor == 0) throw std::invalid_argument("decimation factor must be >= 1");
    if (factor == 1) return sig;
    const double out_rate = sig.sample_rate_hz / factor;
    const double cutoff = 0.475 * out_rate;
    const double transition = 0.075 * out_rate;
    const auto taps = design_kaiser_lowpass(sig.sample_rate_hz, cutoff, transition, 70.0);
    const auto filtered = fft_filter_same(sig.samples, taps);
    IqSignal out;
    out.sample_rate_hz = out_rate;
    out.samples.reserve(filtered.size() / factor + 1);
    for (size_t i = 0; i < filtered.size(); i += factor)
        out.samples.push_back(filtered[i]);
    return out;
}

// Arbitrary-ratio resampler (windowed-sinc, 33-tap kernel).  ratio is the
// input-time step per output sample, so ratio > 1 shortens the record.
// ratio == 1 reproduces the input exactly.
inline IqSignal resample(const IqSignal& sig, double ratio) {
    if (!(ratio > 0.0)) throw std::invalid_argument("resample ratio must be positive");
    constexpr int kHalf = 16;
    const double fc = 0.5 / std::max(1.0, ratio);
    const size_t n_in = sig.samples.size();
    if (n_in == 0) throw std::invalid_argument("empty signal");
    const size_t n_out =
        static_cast<size_t>(std::floor(static_cast<double>(n_in - 1) / ratio)) + 1;
    const double beta = 8.6;
    const double i0b = detail::bessel_i0(beta);
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.resize(n_out);
    for (size_t n = 0; n < n_out; ++n) {
        const double t = static_cast<double>(n) * ratio;
        const auto base = static_cast<ptrdiff_t>(std::floor(t));
        cplx acc{0.0, 0.0};
        for (ptrdiff_t k = base - kHalf + 1; k <= base + kHalf; ++k) {
            if (k < 0 || k >= static_cast<ptrdiff_t>(n_in)) continue;
            const double u = t - static_cast<double>(k);
            const double r = u / kHalf;
            if (r <= -1.0 || r >= 1.0) continue;
            const double w =
                detail::bessel_i0(beta * std::sqrt(1.0 - r * r)) / i0b;
            acc += sig.samples[static_cast<size_t>(k)] *
                   (2.0 * fc * detail::sinc(2.0 * fc * u) * w);
        }
        out.samples[n] = acc;
    }
    return out;
}

// Analytic signal of a real sequence (negative frequencies zeroed).
inline std::vector<cplx> analytic_signal(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("empty signal");
    const size_t n = next_pow2(x.size());
    std::vector<cplx> a(n);
    for (size_t i = 0; i < x.size(); ++i) a[i] = {x[i], 0.0};
    FftPlan plan(n);
    plan.forward(a);
    for (size_t k = 1; k < n / 2; ++k) a[k] *= 2.0;
    for (size_t k = n / 2 + 1; k < n; ++k) a[k] = {0.0, 0.0};
    plan.inverse(a);
    a.resize(x.size());
    return a;
}

}  // namespace hfsig
