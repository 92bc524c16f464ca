#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/rng.hpp"
#include "hfsig/signal.hpp"

namespace hfsig {

// Ionospheric channel preset: 1-2 paths, each a complex Gaussian gain
// process with a Gaussian Doppler power spectrum.  doppler_spread_hz is
// the two-sided spread 2*sigma of that spectrum (ITU convention).
struct WattersonPreset {
    std::string name;
    std::vector<double> tap_delays_ms;
    std::vector<double> tap_gains_db;
    std::vector<double> doppler_spread_hz;
    std::vector<double> frequency_shift_hz;

    size_t tap_count() const { return tap_delays_ms.size(); }
};

inline void validate_preset(const WattersonPreset& p) {
    const size_t k = p.tap_count();
    if (k < 1 || k > 2)
        throw std::invalid_argument("preset " + p.name + ": tap count must be 1 or 2");
    if (p.tap_gains_db.size() != k || p.doppler_spread_hz.size() != k ||
        p.frequency_shift_hz.size() != k)
        throw std::invalid_argument("preset " + p.name + ": field lengths differ");
    if (p.tap_delays_ms[0] != 0.0)
        throw std::invalid_argument("preset " + p.name + ": first delay must be 0");
    for (size_t i = 0; i < k; ++i) {
        if (p.tap_delays_ms[i] < 0.0 ||
            (i > 0 && p.tap_delays_ms[i] < p.tap_delays_ms[i - 1]))
            throw std::invalid_argument("preset " + p.name + ": delays must ascend");
        if (p.doppler_spread_hz[i] < 0.0)
            throw std::invalid_argument("preset " + p.name + ": negative spread");
    }
}

inline std::vector<WattersonPreset> default_watterson_presets() {
    std::vector<WattersonPreset> t;
    auto add1 = [&t](const std::string& name, double spread) {
        t.push_back({name, {0.0}, {0.0}, {spread}, {0.0}});
    };
    auto add2 = [&t](const std::string& name, double delay_ms, double spread) {
        t.push_back({name, {0.0, delay_ms}, {0.0, 0.0}, {spread, spread}, {0.0, 0.0}});
    };
    add1("identity", 0.0);
    add1("flutter_single", 10.0);
    add2("ccir_good", 0.5, 0.1);
    add2("ccir_moderate", 1.0, 0.5);
    add2("ccir_poor", 2.0, 1.0);
    add2("ccir_flutter", 0.5, 10.0);
    add2("itu_lowlat_quiet", 0.5, 0.5);
    add2("itu_lowlat_moderate", 2.0, 1.5);
    add2("itu_lowlat_disturbed", 6.0, 10.0);
    add2("itu_midlat_quiet", 0.5, 0.1);
    add2("itu_midlat_moderate", 1.0, 0.5);
    add2("itu_midlat_disturbed", 2.0, 1.0);
    add2("itu_highlat_quiet", 1.0, 0.5);
    add2("itu_highlat_moderate", 3.0, 10.0);
    add2("itu_highlat_disturbed", 7.0, 30.0);
    add2("deep_two_tap", 6.0, 5.0);
    for (const auto& p : t) validate_preset(p);
    return t;
}

inline const WattersonPreset& find_preset(const std::vector<WattersonPreset>& table,
                                          const std::string& name) {
    for (const auto& p : table)
        if (p.name == name) return p;
    throw std::invalid_argument("unknown channel preset: " + name);
}

inline int preset_index(const std::vector<WattersonPreset>& table,
                        const std::string& name) {
    for (size_t i = 0; i < table.size(); ++i)
        if (table[i].name == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown channel preset: " + name);
}

// Gain process generation rate; spreads up to 30 Hz stay alias-free.
constexpr double kTapProcessRateHz = 64.0;

// Complex Gaussian tap process with Gaussian Doppler PSD of two-sided
// spread spread_hz, unit mean-square, sampled at rate_hz.  spread 0 gives
// a constant unit gain.
inline std::vector<cplx> watterson_tap_process(double spread_hz, size_t count,
                                               double rate_hz, SeededRng& rng) {
    if (count == 0) throw std::invalid_argument("empty tap process");
    std::vector<cplx> g(count);
    if (spread_hz <= 0.0) {
        for (auto& v : g) v = {1.0, 0.0};
        return g;
    }
    const double sigma_f = spread_hz / 2.0;
    // Gaussian FIR whose squared magnitude response is the target PSD.
    const double sigma_t =
        1.0 / (2.0 * std::numbers::sqrt2 * std::numbers::pi * sigma_f);
    size_t len = static_cast<size_t>(std::ceil((8.0 / spread_hz) * rate_hz));
    len = std::max<size_t>(len, static_cast<size_t>(std::ceil(8.0 * sigma_t * rate_hz)));
    if (len % 2 == 0) ++len;
    std::vector<double> h(len);
    double e = 0.0;
    const double mid = static_cast<double>(len - 1) / 2.0;
    for (size_t i = 0; i < len; ++i) {
        const double ts = (static_cast<double>(i) - mid) / rate_hz;
        h[i] = std::exp(-0.5 * (ts / sigma_t) * (ts / sigma_t));
        e += h[i] * h[i];
    }
    const double norm = 1.0 / std::sqrt(e);
    for (double& v : h) v *= norm;  // white input -> unit output power
    std::vector<cplx> white(count + len - 1);
    for (auto& w : white) w = rng.cnormal();
    for (size_t i = 0; i < count; ++i) {
        cplx acc{0.0, 0.0};
        for (size_t k = 0; k < len; ++k) acc += white[i + k] * h[len - 1 - k];
        g[i] = acc;
    }
    return g;
}

namespace detail {

// Catmull-Rom interpolation of a coarse tap series at arbitrary time t
// (in coarse samples).
inline cplx cubic_at(const std::vector<cplx>& s, double t) {
    const auto n = static_cast<ptrdiff_t>(s.size());
    auto idx = static_cast<ptrdiff_t>(std::floor(t));
    idx = std::clamp<ptrdiff_t>(idx, 0, n - 1);
    const double u = t - static_cast<double>(idx);
    const auto at = [&](ptrdiff_t i) {
        return s[static_cast<size_t>(std::clamp<ptrdiff_t>(i, 0, n - 1))];
    };
    const cplx p0 = at(idx - 1), p1 = at(idx), p2 = at(idx + 1), p3 = at(idx + 2);
    return p1 + 0.5 * u * (p2 - p0 +
           u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
           u * (3.0 * (p1 - p2) + p3 - p0)));
}

}  // namespace detail

// y[n] = sum_i a_i * g_i[n] * x[n - d_i], with linear gains a_i normalized
// so sum a_i^2 = 1 and E[|g_i|^2] = 1 (power-neutral in expectation).
// The all-defaults single-tap preset is an exact passthrough.
inline IqSignal apply_watterson(const IqSignal& sig, const WattersonPreset& preset,
                                SeededRng& rng) {
    validate_preset(preset);
    if (sig.samples.empty()) throw std::invalid_argument("empty signal");
    const size_t k = preset.tap_count();
    const size_t n = sig.samples.size();
    const double fs = sig.sample_rate_hz;

    double gain_sq = 0.0;
    std::vector<double> a(k);
    for (size_t i = 0; i < k; ++i) {
        a[i] = std::pow(10.0, preset.tap_gains_db[i] / 20.0);
        gain_sq += a[i] * a[i];
    }
    for (double& v : a) v /= std::sqrt(gain_sq);

    if (k == 1 && preset.doppler_spread_hz[0] <= 0.0 &&
        preset.frequency_shift_hz[0] == 0.0 && preset.tap_delays_ms[0] == 0.0)
        return sig;  // degenerate channel

    IqSignal out;
    out.sample_rate_hz = fs;
    out.samples.assign(n, cplx{0.0, 0.0});
    for (size_t i = 0; i < k; ++i) {
        const auto d = static_cast<size_t>(
            std::llround(preset.tap_delays_ms[i] * 1e-3 * fs));
        const double spread = preset.doppler_spread_hz[i];
        const double shift = preset.frequency_shift_hz[i];
        std::vector<cplx> coarse;
        double step = 0.0;
        if (spread > 0.0) {
            const auto coarse_n = static_cast<size_t>(std::ceil(
                                      static_cast<double>(n) / fs * kTapProcessRateHz)) + 8;
            coarse = watterson_tap_process(spread, coarse_n, kTapProcessRateHz, rng);
            step = kTapProcessRateHz / fs;
        }
        for (size_t m = 0; m < n; ++m) {
            if (m < d) continue;
            cplx g{1.0, 0.0};
            if (spread > 0.0)
                g = detail::cubic_at(coarse, static_cast<double>(m) * step + 2.0);
            if (shift != 0.0) {
                const double ph = 2.0 * std::numbers::pi * shift *
                                  static_cast<double>(m) / fs;
                g *= cplx{std::cos(ph), std::sin(ph)};
            }
            out.samples[m] += a[i] * g * sig.samples[m - d];
        }
    }
    return out;
}

namespace detail {

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

// Text form, one preset per line:
//   name delays_ms gains_db spreads_hz shifts_hz   (fields comma-separated)
inline void save_presets(const std::vector<WattersonPreset>& table, std::ostream& os) {
    os << "# watterson presets: name delays_ms gains_db spreads_hz shifts_hz\n";
    auto join = [](const std::vector<double>& v) {
        std::string s;
        char buf[48];
        for (size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.10g", i ? "," : "", v[i]);
            s += buf;
        }
        return s;
    };
    for (const auto& p : table)
        os << p.name << " " << join(p.tap_delays_ms) << " " << join(p.tap_gains_db)
           << " " << join(p.doppler_spread_hz) << " " << join(p.frequency_shift_hz)
           << "\n";
}

inline std::vector<WattersonPreset> load_presets(std::istream& is) {
    std::vector<WattersonPreset> table;
    std::string line;
    size_t lineno = 0;
    auto split = [&](const std::string& s) {
        std::vector<double> v;
        std::istringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
        return v;
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        WattersonPreset p;
        std::string d, g, sp, sh;
        if (!(ls >> p.name)) continue;
        if (!(ls >> d >> g >> sp >> sh))
            throw std::invalid_argument("preset line " + std::to_string(lineno) +
                                        ": expected 5 fields");
        p.tap_delays_ms = split(d);
        p.tap_gains_db = split(g);
        p.doppler_spread_hz = split(sp);
        p.frequency_shift_hz = split(sh);
        validate_preset(p);
        table.push_back(std::move(p));
    }
    return table;
}

inline std::vector<WattersonPreset> load_presets_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open preset table: " + path);
    return load_presets(f);
}

inline void save_presets_file(const std::vector<WattersonPreset>& table,
                              const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    save_presets(table, f);
    if (!f) throw std::runtime_error("failed writing: " + path);
}

// Stable identifier of a preset table, recorded in dataset manifests.
inline uint64_t preset_table_hash(const std::vector<WattersonPreset>& table) {
    std::ostringstream ss;
    save_presets(table, ss);
    return detail::fnv1a64(ss.str());
}

}  // namespace hfsig
