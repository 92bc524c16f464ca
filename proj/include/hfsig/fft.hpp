#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hfsig {

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Iterative radix-2 FFT with precomputed twiddles.  Deliberately hand
// rolled: results must be bit-identical across builds, which rules out
// linking whatever FFT happens to be installed.
class FftPlan {
public:
    explicit FftPlan(size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0)
            throw std::invalid_argument("fft size must be a power of two");
        tw_.resize(n / 2);
        for (size_t k = 0; k < n / 2; ++k) {
            const double a = -2.0 * std::numbers::pi *
                             static_cast<double>(k) / static_cast<double>(n);
            tw_[k] = {std::cos(a), std::sin(a)};
        }
        rev_.resize(n);
        size_t bits = 0;
        while ((size_t{1} << bits) < n) ++bits;
        for (size_t i = 0; i < n; ++i) {
            size_t r = 0;
            for (size_t b = 0; b < bits; ++b)
                if (i & (size_t{1} << b)) r |= size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
    }

    size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& a) const { run(a, false); }

    // Unscaled inverse; caller divides by N when a true inverse is needed.
    void inverse_unscaled(std::vector<std::complex<double>>& a) const {
        run(a, true);
    }

    void inverse(std::vector<std::complex<double>>& a) const {
        run(a, true);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : a) v *= s;
    }

private:
    void run(std::vector<std::complex<double>>& a, bool inv) const {
        if (a.size() != n_) throw std::invalid_argument("fft size mismatch");
        for (size_t i = 0; i < n_; ++i) {
            const size_t j = rev_[i];
            if (i < j) std::swap(a[i], a[j]);
        }
        for (size_t len = 2; len <= n_; len <<= 1) {
            const size_t half = len >> 1;
            const size_t step = n_ / len;
            for (size_t i = 0; i < n_; i += len) {
                for (size_t k = 0; k < half; ++k) {
                    std::complex<double> w = tw_[k * step];
                    if (inv) w = std::conj(w);
                    const std::complex<double> u = a[i + k];
                    const std::complex<double> v = a[i + k + half] * w;
                    a[i + k] = u + v;
                    a[i + k + half] = u - v;
                }
            }
        }
    }

    size_t n_;
    std::vector<std::complex<double>> tw_;
    std::vector<size_t> rev_;
};

// Convenience one-shot transform (zero-pads to the next power of two only
// if asked; otherwise the length must already be a power of two).
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
    FftPlan plan(a.size());
    if (inverse)
        plan.inverse(a);
    else
        plan.forward(a);
}

}  // namespace hfsig
