#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/fft.hpp"
#include "hfsig/signal.hpp"

namespace hfsig {

struct PowerSpectrum {
    std::vector<double> freq_hz;  // ascending, negative to positive
    std::vector<double> psd;      // linear power per bin
};

// Welch periodogram with Hann windows and 50 % overlap.  The record is
// zero-padded up to one segment if it is shorter than seg_len.
inline PowerSpectrum welch_psd(const IqSignal& sig, size_t seg_len = 2048) {
    if (sig.samples.empty()) throw std::invalid_argument("empty signal");
    seg_len = next_pow2(seg_len);
    std::vector<double> window(seg_len);
    for (size_t i = 0; i < seg_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i /
                                         static_cast<double>(seg_len));
    FftPlan plan(seg_len);
    std::vector<double> acc(seg_len, 0.0);
    size_t count = 0;
    const size_t hop = seg_len / 2;
    const size_t n = sig.samples.size();
    for (size_t start = 0; start == 0 || start + seg_len <= n; start += hop) {
        std::vector<cplx> seg(seg_len, cplx{0.0, 0.0});
        const size_t m = std::min(seg_len, n - std::min(start, n));
        for (size_t i = 0; i < m; ++i)
            seg[i] = sig.samples[start + i] * window[i];
        plan.forward(seg);
        for (size_t k = 0; k < seg_len; ++k) acc[k] += std::norm(seg[k]);
        ++count;
        if (start + seg_len >= n) break;
    }
    PowerSpectrum out;
    out.freq_hz.resize(seg_len);
    out.psd.resize(seg_len);
    const double df = sig.sample_rate_hz / static_cast<double>(seg_len);
    for (size_t i = 0; i < seg_len; ++i) {
        // fftshift so frequencies run from -fs/2 to +fs/2.
        const size_t k = (i + seg_len / 2) % seg_len;
        const double f = (static_cast<double>(i) -
                          static_cast<double>(seg_len / 2)) * df;
        out.freq_hz[i] = f;
        out.psd[i] = acc[k] / static_cast<double>(count);
    }
    return out;
}

struct Band {
    double low_hz = 0.0;
    double high_hz = 0.0;
    double width() const { return high_hz - low_hz; }
};

// Outermost frequencies whose PSD is within rel_db of the peak.
inline Band occupied_band(const PowerSpectrum& ps, double rel_db = 30.0) {
    const double peak = *std::max_element(ps.psd.begin(), ps.psd.end());
    if (peak <= 0.0) throw std::invalid_argument("silent signal");
    const double thresh = peak * std::pow(10.0, -rel_db / 10.0);
    size_t lo = ps.psd.size(), hi = 0;
    for (size_t i = 0; i < ps.psd.size(); ++i) {
        if (ps.psd[i] >= thresh) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    return {ps.freq_hz[lo], ps.freq_hz[hi]};
}

// Dominant tone frequency via zero-padded FFT and parabolic refinement.
inline double peak_frequency(const IqSignal& sig, size_t min_fft = 1 << 16) {
    if (sig.samples.empty()) throw std::invalid_argument("empty signal");
    const size_t n = std::max(next_pow2(sig.samples.size()), next_pow2(min_fft));
    std::vector<cplx> buf(n, cplx{0.0, 0.0});
    for (size_t i = 0; i < sig.samples.size(); ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i /
                                              static_cast<double>(sig.samples.size()));
        buf[i] = sig.samples[i] * w;
    }
    FftPlan plan(n);
    plan.forward(buf);
    size_t best = 0;
    double best_mag = -1.0;
    for (size_t k = 0; k < n; ++k) {
        const double m = std::norm(buf[k]);
        if (m > best_mag) {
            best_mag = m;
            best = k;
        }
    }
    const auto mag_db = [&](size_t k) {
        return 10.0 * std::log10(std::norm(buf[k % n]) + 1e-300);
    };
    const double a = mag_db(best + n - 1), b = mag_db(best), c = mag_db(best + 1);
    double delta = 0.0;
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) delta = 0.5 * (a - c) / denom;
    double k = static_cast<double>(best) + delta;
    if (k > static_cast<double>(n) / 2.0) k -= static_cast<double>(n);
    return k * sig.sample_rate_hz / static_cast<double>(n);
}

// Spectrogram magnitudes in dB, clipped to clip_db below the peak.
// Rows are time frames, columns frequency bins from -fs/2 to +fs/2.
struct Spectrogram {
    size_t rows = 0, cols = 0;
    std::vector<double> db;  // row-major
    double at(size_t r, size_t c) const { return db[r * cols + c]; }
};

inline Spectrogram spectrogram(const IqSignal& sig, size_t fft_size = 256,
                               double overlap = 0.75, double clip_db = 60.0) {
    if (sig.samples.size() < fft_size)
        throw std::invalid_argument("record shorter than one frame");
    fft_size = next_pow2(fft_size);
    const size_t hop = std::max<size_t>(
        1, static_cast<size_t>(std::lround(fft_size * (1.0 - overlap))));
    std::vector<double> window(fft_size);
    for (size_t i = 0; i < fft_size; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i /
                                         static_cast<double>(fft_size));
    FftPlan plan(fft_size);
    Spectrogram sg;
    sg.cols = fft_size;
    std::vector<cplx> seg(fft_size);
    double peak = -1e300;
    for (size_t start = 0; start + fft_size <= sig.samples.size(); start += hop) {
        for (size_t i = 0; i < fft_size; ++i)
            seg[i] = sig.samples[start + i] * window[i];
        plan.forward(seg);
        for (size_t i = 0; i < fft_size; ++i) {
            const size_t k = (i + fft_size / 2) % fft_size;
            const double v = 10.0 * std::log10(std::norm(seg[k]) + 1e-300);
            sg.db.push_back(v);
            peak = std::max(peak, v);
        }
        ++sg.rows;
    }
    for (double& v : sg.db) v = std::max(v, peak - clip_db);
    return sg;
}

// 8-bit binary PGM, dark = quiet.  Any standard image viewer opens it.
inline void write_pgm(const Spectrogram& sg, const std::string& path) {
    if (sg.rows == 0 || sg.cols == 0) throw std::invalid_argument("empty spectrogram");
    const auto [mn_it, mx_it] = std::minmax_element(sg.db.begin(), sg.db.end());
    const double mn = *mn_it;
    const double span = std::max(*mx_it - mn, 1e-9);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << "P5\n" << sg.cols << " " << sg.rows << "\n255\n";
    for (double v : sg.db) {
        const int g = static_cast<int>(std::lround((v - mn) / span * 255.0));
        f.put(static_cast<char>(std::clamp(g, 0, 255)));
    }
    if (!f) throw std::runtime_error("failed writing: " + path);
}

}  // namespace hfsig
