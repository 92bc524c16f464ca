#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hfsig {

using cplx = std::complex<double>;

// Complex baseband record.  All processing in this library is done in
// double precision; storage formats downcast at the edges.
struct IqSignal {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;

    size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate_hz > 0.0
                   ? static_cast<double>(samples.size()) / sample_rate_hz
                   : 0.0;
    }
};

// Mean power (E|x|^2) over the whole record.
inline double measure_power(const IqSignal& sig) {
    if (sig.samples.empty()) throw std::invalid_argument("empty signal");
    double acc = 0.0;
    for (const cplx& s : sig.samples) acc += std::norm(s);
    return acc / static_cast<double>(sig.samples.size());
}

inline double measure_power(const std::vector<cplx>& v, size_t begin,
                            size_t count) {
    if (count == 0 || begin + count > v.size())
        throw std::invalid_argument("bad power window");
    double acc = 0.0;
    for (size_t i = begin; i < begin + count; ++i) acc += std::norm(v[i]);
    return acc / static_cast<double>(count);
}

// Scale so the mean power equals target_power exactly.
inline IqSignal normalize_power(const IqSignal& sig, double target_power = 1.0) {
    const double p = measure_power(sig);
    if (p <= 0.0) throw std::invalid_argument("silent signal");
    const double g = std::sqrt(target_power / p);
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.resize(sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i)
        out.samples[i] = sig.samples[i] * g;
    return out;
}

inline bool all_finite(const IqSignal& sig) {
    for (const cplx& s : sig.samples)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
    return true;
}

inline IqSignal crop(const IqSignal& sig, size_t start, size_t count) {
    if (start + count > sig.samples.size())
        throw std::out_of_range("crop window exceeds signal length");
    IqSignal out;
    out.sample_rate_hz = sig.sample_rate_hz;
    out.samples.assign(sig.samples.begin() + static_cast<ptrdiff_t>(start),
                       sig.samples.begin() + static_cast<ptrdiff_t>(start + count));
    return out;
}

}  // namespace hfsig
