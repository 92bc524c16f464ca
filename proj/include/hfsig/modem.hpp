#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/fft.hpp"
#include "hfsig/fir.hpp"
#include "hfsig/modes.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/signal.hpp"

namespace hfsig {

// Internal synthesis rate; records are decimated to 4 kHz later.
constexpr double kSynthRateHz = 12000.0;
constexpr double kSystemRateHz = 4000.0;

struct ModemOutput {
    IqSignal signal;               // at kSynthRateHz
    ModeSpec mode;
    double carrier_offset_hz = 0;  // where the mode was placed in the window
};

// Message content generator.  The preamble kind emits a fixed 32-symbol
// sweep before random payload, mimicking synchronization headers.
struct SymbolSource {
    enum class Kind { random_bits, random_text, preamble_payload };
    Kind kind = Kind::random_bits;
    SeededRng* rng = nullptr;
    size_t position = 0;

    int next_bit() {
        const int b = (kind == Kind::preamble_payload && position < 32)
                          ? static_cast<int>((0x9af1c3e5u >> (31 - position)) & 1u)
                          : static_cast<int>(rng->below(2));
        ++position;
        return b;
    }

    int next_symbol(int m) {
        int s;
        if (kind == Kind::preamble_payload && position < 32)
            s = static_cast<int>((position * 5) % static_cast<size_t>(m));
        else
            s = static_cast<int>(rng->below(static_cast<uint64_t>(m)));
        ++position;
        return s;
    }

    char next_char() {
        static const char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
        ++position;
        return alphabet[rng->below(36)];
    }
};

namespace detail {

inline const char* morse_code(char c) {
    switch (c) {
        case 'A': return ".-";    case 'B': return "-...";  case 'C': return "-.-.";
        case 'D': return "-..";   case 'E': return ".";     case 'F': return "..-.";
        case 'G': return "--.";   case 'H': return "....";  case 'I': return "..";
        case 'J': return ".---";  case 'K': return "-.-";   case 'L': return ".-..";
        case 'M': return "--";    case 'N': return "-.";    case 'O': return "---";
        case 'P': return ".--.";  case 'Q': return "--.-";  case 'R': return ".-.";
        case 'S': return "...";   case 'T': return "-";     case 'U': return "..-";
        case 'V': return "...-";  case 'W': return ".--";   case 'X': return "-..-";
        case 'Y': return "-.--";  case 'Z': return "--..";
        case '0': return "-----"; case '1': return ".----"; case '2': return "..---";
        case '3': return "...--"; case '4': return "....-"; case '5': return ".....";
        case '6': return "-...."; case '7': return "--..."; case '8': return "---..";
        case '9': return "----.";
    }
    return ".";
}

// Multiply a per-sample tone-index staircase into a smoothed instantaneous
// frequency track and integrate it into a complex exponential.
inline std::vector<cplx> integrate_frequency(const std::vector<double>& freq_hz,
                                             double fs, double phase0) {
    std::vector<cplx> out(freq_hz.size());
    double ph = phase0;
    for (size_t i = 0; i < freq_hz.size(); ++i) {
        out[i] = {std::cos(ph), std::sin(ph)};
        ph += 2.0 * std::numbers::pi * freq_hz[i] / fs;
        if (ph > 1e6) ph = std::fmod(ph, 2.0 * std::numbers::pi);
    }
    return out;
}

inline void smooth_inplace(std::vector<double>& x, const std::vector<double>& kernel) {
    const auto n = static_cast<ptrdiff_t>(x.size());
    const auto m = static_cast<ptrdiff_t>(kernel.size());
    std::vector<double> y(x.size());
    const ptrdiff_t half = m / 2;
    for (ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (ptrdiff_t k = 0; k < m; ++k) {
            ptrdiff_t j = i + k - half;
            j = std::clamp<ptrdiff_t>(j, 0, n - 1);
            acc += x[static_cast<size_t>(j)] * kernel[static_cast<size_t>(k)];
        }
        y[static_cast<size_t>(i)] = acc;
    }
    x.swap(y);
}

inline std::vector<double> hann_kernel(size_t len) {
    if (len < 1) len = 1;
    if (len % 2 == 0) ++len;
    std::vector<double> k(len);
    double sum = 0.0;
    for (size_t i = 0; i < len; ++i) {
        k[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) /
                                    static_cast<double>(len + 1));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

inline std::vector<double> gauss_kernel(double sigma_samples) {
    const auto half = static_cast<size_t>(std::ceil(4.0 * sigma_samples));
    std::vector<double> k(2 * half + 1);
    double sum = 0.0;
    for (size_t i = 0; i < k.size(); ++i) {
        const double u = (static_cast<double>(i) - static_cast<double>(half)) /
                         sigma_samples;
        k[i] = std::exp(-0.5 * u * u);
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Root-raised-cosine taps, unit energy, sps samples per symbol.
inline std::vector<double> rrc_taps(double beta, int sps, int span_symbols) {
    const int half = span_symbols * sps / 2;
    std::vector<double> taps(static_cast<size_t>(2 * half + 1));
    for (int i = -half; i <= half; ++i) {
        const double t = static_cast<double>(i) / sps;  // in symbols
        double v;
        if (std::abs(t) < 1e-9) {
            v = 1.0 - beta + 4.0 * beta / std::numbers::pi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
            v = (beta / std::numbers::sqrt2) *
                ((1.0 + 2.0 / std::numbers::pi) * std::sin(std::numbers::pi / (4.0 * beta)) +
                 (1.0 - 2.0 / std::numbers::pi) * std::cos(std::numbers::pi / (4.0 * beta)));
        } else {
            const double pt = std::numbers::pi * t;
            v = (std::sin(pt * (1.0 - beta)) +
                 4.0 * beta * t * std::cos(pt * (1.0 + beta))) /
                (pt * (1.0 - std::pow(4.0 * beta * t, 2)));
        }
        taps[static_cast<size_t>(i + half)] = v;
    }
    double e = 0.0;
    for (double v : taps) e += v * v;
    const double g = 1.0 / std::sqrt(e);
    for (double& v : taps) v *= g;
    return taps;
}

// Real band-limited Gaussian noise shaped by a magnitude mask over
// positive frequencies; mask(f) of 0 removes the bin entirely.
template <typename MaskFn>
std::vector<double> shaped_noise(size_t n, double fs, SeededRng& rng, MaskFn mask) {
    const size_t m = next_pow2(n);
    std::vector<cplx> buf(m);
    for (size_t i = 0; i < n; ++i) buf[i] = {rng.normal(), 0.0};
    FftPlan plan(m);
    plan.forward(buf);
    const double df = fs / static_cast<double>(m);
    buf[0] *= mask(0.0);
    buf[m / 2] *= mask(fs / 2.0);
    for (size_t k = 1; k < m / 2; ++k) {
        const double g = mask(df * static_cast<double>(k));
        buf[k] *= g;
        buf[m - k] *= g;  // keep Hermitian symmetry so the result is real
    }
    plan.inverse(buf);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

}  // namespace detail

struct VoiceProgram {
    std::vector<double> audio;     // unit power
    std::vector<double> envelope;  // nonnegative syllabic envelope
};

enum class VoiceKind { speech_like, music_like };

// Voice-content surrogate for AM/SSB.  Speech-like: band-limited Gaussian
// noise with a falling spectral tilt, gated by a slow syllabic envelope.
inline VoiceProgram synthesize_voice_program(VoiceKind kind, double duration_s,
                                             SeededRng& rng,
                                             double fs = kSynthRateHz,
                                             double band_lo_hz = 300.0,
                                             double band_hi_hz = 2700.0) {
    if (duration_s < 1.5) throw std::invalid_argument("duration must be >= 1.5 s");
    const auto n = static_cast<size_t>(std::llround(duration_s * fs));
    VoiceProgram out;
    if (kind == VoiceKind::speech_like) {
        auto shaped = detail::shaped_noise(n, fs, rng, [&](double f) {
            if (f < band_lo_hz || f > band_hi_hz) return 0.0;
            return std::pow(f / band_lo_hz, -1.5);  // -9 dB/octave power tilt
        });
        auto slow = detail::shaped_noise(n, fs, rng, [](double f) {
            return (f >= 2.0 && f <= 8.0) ? 1.0 : 0.0;
        });
        out.envelope.resize(n);
        out.audio.resize(n);
        for (size_t i = 0; i < n; ++i) {
            out.envelope[i] = slow[i] * slow[i];
            out.audio[i] = shaped[i] * out.envelope[i];
        }
    } else {
        const int voices = 3 + static_cast<int>(rng.below(3));
        std::vector<double> freq(voices), amp(voices), phase(voices);
        for (int v = 0; v < voices; ++v) {
            freq[v] = rng.uniform(200.0, 1500.0);
            amp[v] = rng.uniform(0.3, 1.0);
            phase[v] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        std::vector<std::vector<double>> envs(static_cast<size_t>(voices));
        for (int v = 0; v < voices; ++v) {
            auto slow = detail::shaped_noise(n, fs, rng, [](double f) {
                return (f >= 0.5 && f <= 2.0) ? 1.0 : 0.0;
            });
            for (double& s : slow) s = s * s;
            envs[static_cast<size_t>(v)] = std::move(slow);
        }
        auto bed = detail::shaped_noise(n, fs, rng, [](double f) {
            return (f >= 100.0 && f <= 2500.0) ? 0.1 : 0.0;
        });
        out.audio.resize(n);
        out.envelope.assign(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double s = bed[i];
            const double t = static_cast<double>(i) / fs;
            for (int v = 0; v < voices; ++v) {
                const auto& e = envs[static_cast<size_t>(v)];
                s += amp[v] * e[i] *
                     std::cos(2.0 * std::numbers::pi * freq[v] * t + phase[v]);
                out.envelope[i] += e[i];
            }
            out.audio[i] = s;
        }
    }
    double p = 0.0;
    for (double a : out.audio) p += a * a;
    p /= static_cast<double>(n);
    if (p <= 0.0) throw std::runtime_error("silent signal");
    const double g = 1.0 / std::sqrt(p);
    for (double& a : out.audio) a *= g;
    return out;
}

namespace detail {

inline std::vector<double> tone_staircase(size_t n, double fs, double baud,
                                          const std::vector<double>& tone_of_symbol) {
    std::vector<double> freq(n);
    for (size_t i = 0; i < n; ++i) {
        const auto k = static_cast<size_t>(static_cast<double>(i) * baud / fs);
        freq[i] = tone_of_symbol[std::min(k, tone_of_symbol.size() - 1)];
    }
    return freq;
}

inline std::vector<cplx> gen_cpfsk(size_t n, double fs, double baud,
                                   const std::vector<double>& tones_hz,
                                   SymbolSource& src, double carrier_hz,
                                   double phase0, double gauss_bt) {
    const auto n_sym = static_cast<size_t>(std::ceil(n * baud / fs)) + 1;
    std::vector<double> tone_of_symbol(n_sym);
    const int m = static_cast<int>(tones_hz.size());
    for (size_t k = 0; k < n_sym; ++k)
        tone_of_symbol[k] = tones_hz[static_cast<size_t>(src.next_symbol(m))] + carrier_hz;
    auto freq = tone_staircase(n, fs, baud, tone_of_symbol);
    if (gauss_bt > 0.0) {
        const double b = gauss_bt * baud;
        const double sigma_t = std::sqrt(std::numbers::ln2) /
                               (2.0 * std::numbers::pi * b);
        smooth_inplace(freq, gauss_kernel(sigma_t * fs));
    } else {
        const double ramp_s = std::min(0.002, 0.2 / baud);
        smooth_inplace(freq, hann_kernel(static_cast<size_t>(ramp_s * fs)));
    }
    return integrate_frequency(freq, fs, phase0);
}

inline std::vector<cplx> gen_morse(size_t n, double fs, double wpm, double edge_ms,
                                   SymbolSource& src, double carrier_hz,
                                   double phase0, SeededRng& rng) {
    const double dit_s = 1.2 / wpm;
    const auto dit = static_cast<size_t>(std::llround(dit_s * fs));
    std::vector<double> env(n, 0.0);
    const auto edge = static_cast<size_t>(std::llround(edge_ms * 1e-3 * fs));
    // Edges are centered on the nominal on/off instants so element
    // durations at half amplitude equal the timing chart exactly.
    auto mark = [&](size_t start, size_t dur) {
        const auto lo = static_cast<ptrdiff_t>(start) - static_cast<ptrdiff_t>(edge / 2);
        const auto hi = static_cast<ptrdiff_t>(start + dur + edge / 2);
        for (ptrdiff_t i = std::max<ptrdiff_t>(lo, 0);
             i < std::min<ptrdiff_t>(hi, static_cast<ptrdiff_t>(n)); ++i) {
            const auto u = static_cast<size_t>(i);
            double v = 1.0;
            const auto rise = static_cast<double>(i - lo);
            const auto fall = static_cast<double>(hi - 1 - i);
            if (rise < static_cast<double>(edge))
                v = std::min(v, 0.5 - 0.5 * std::cos(std::numbers::pi * (rise + 0.5) /
                                                     static_cast<double>(edge)));
            if (fall < static_cast<double>(edge))
                v = std::min(v, 0.5 - 0.5 * std::cos(std::numbers::pi * (fall + 0.5) /
                                                     static_cast<double>(edge)));
            env[u] = std::max(env[u], v);
        }
    };
    size_t t = dit;  // brief lead-in
    while (t < n) {
        const auto word_len = 2 + rng.below(5);
        for (uint64_t w = 0; w < word_len && t < n; ++w) {
            const char* code = morse_code(src.next_char());
            for (const char* e = code; *e && t < n; ++e) {
                const size_t dur = (*e == '-') ? 3 * dit : dit;
                mark(t, dur);
                t += dur + dit;
            }
            t += 2 * dit;  // inter-character gap totals 3 dits
        }
        t += 4 * dit;  // inter-word gap totals 7 dits
    }
    std::vector<cplx> x(n);
    for (size_t i = 0; i < n; ++i) {
        const double ph = phase0 + 2.0 * std::numbers::pi * carrier_hz *
                                       static_cast<double>(i) / fs;
        x[i] = env[i] * cplx{std::cos(ph), std::sin(ph)};
    }
    return x;
}

inline std::vector<cplx> gen_psk_hann(size_t n, double fs, double baud, int bits_per_sym,
                                      SymbolSource& src, double carrier_hz,
                                      double phase0) {
    const double period = fs / baud;  // samples per symbol, not integral
    const auto n_sym = static_cast<size_t>(std::ceil(n / period)) + 2;
    std::vector<double> psi(n_sym);
    double acc = 0.0;
    for (size_t k = 0; k < n_sym; ++k) {
        if (k > 0) {
            if (bits_per_sym == 1) {
                acc += src.next_bit() ? 0.0 : std::numbers::pi;
            } else {
                const int d = src.next_bit() * 2 + src.next_bit();
                acc += d * std::numbers::pi / 2.0;
            }
        }
        psi[k] = acc;
    }
    std::vector<cplx> x(n, cplx{0.0, 0.0});
    // Hann pulses of width 2T at 50 % overlap sum to a constant envelope
    // between reversals and dip through zero on them (PSK31 shape).
    for (size_t k = 0; k < n_sym; ++k) {
        const double center = static_cast<double>(k) * period;
        const cplx sym{std::cos(psi[k]), std::sin(psi[k])};
        const auto lo = std::max<ptrdiff_t>(0, static_cast<ptrdiff_t>(std::ceil(center - period)));
        const auto hi = std::min<ptrdiff_t>(static_cast<ptrdiff_t>(n) - 1,
                                            static_cast<ptrdiff_t>(std::floor(center + period)));
        for (ptrdiff_t i = lo; i <= hi; ++i) {
            const double u = (static_cast<double>(i) - center) / period;
            x[static_cast<size_t>(i)] +=
                sym * (0.5 + 0.5 * std::cos(std::numbers::pi * u));
        }
    }
    for (size_t i = 0; i < n; ++i) {
        const double ph = phase0 + 2.0 * std::numbers::pi * carrier_hz *
                                       static_cast<double>(i) / fs;
        x[i] *= cplx{std::cos(ph), std::sin(ph)};
    }
    return x;
}

inline std::vector<cplx> gen_psk8_serial(size_t n, double fs, double baud,
                                         double rolloff, SymbolSource& src,
                                         double carrier_hz, double phase0) {
    const int sps = static_cast<int>(std::llround(fs / baud));
    if (std::abs(fs / baud - sps) > 1e-9)
        throw std::invalid_argument("serial-tone baud must divide the synth rate");
    const size_t n_sym = n / static_cast<size_t>(sps) + 1;
    std::vector<cplx> train(n, cplx{0.0, 0.0});
    for (size_t k = 0; k < n_sym; ++k) {
        const size_t i = k * static_cast<size_t>(sps);
        if (i >= n) break;
        const double psi = src.next_symbol(8) * std::numbers::pi / 4.0 +
                           std::numbers::pi / 8.0;
        train[i] = {std::cos(psi), std::sin(psi)};
    }
    const auto taps = rrc_taps(rolloff, sps, 8);
    auto x = fft_filter_same(train, taps);
    for (size_t i = 0; i < n; ++i) {
        const double ph = phase0 + 2.0 * std::numbers::pi * carrier_hz *
                                       static_cast<double>(i) / fs;
        x[i] *= cplx{std::cos(ph), std::sin(ph)};
    }
    return x;
}

}  // namespace detail

// Clean-signal synthesis at 12 kHz.  Draw order from rng is fixed:
// carrier offset, initial phase, then kind-specific draws; symbol content
// comes only from src.
inline ModemOutput synthesize(const ModeSpec& mode, double duration_s,
                              SymbolSource& src, SeededRng& rng) {
    if (duration_s < 1.5)
        throw std::invalid_argument("duration must be >= 1.5 s");
    const double fs = kSynthRateHz;
    const auto n = static_cast<size_t>(std::llround(duration_s * fs));
    const double default_max_off =
        std::max(0.0, std::min(200.0, 1500.0 - mode.nominal_bandwidth_hz / 2.0));
    const double max_off = mode.param_or("max_offset_hz", default_max_off);
    const double c = max_off > 0.0 ? rng.uniform(-max_off, max_off) : 0.0;
    const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);

    std::vector<cplx> x;
    switch (mode.kind) {
        case ModemKind::carrier: {
            x.resize(n);
            for (size_t i = 0; i < n; ++i) {
                const double ph = phase0 + 2.0 * std::numbers::pi * c *
                                               static_cast<double>(i) / fs;
                x[i] = {std::cos(ph), std::sin(ph)};
            }
            break;
        }
        case ModemKind::ook:
            x = detail::gen_morse(n, fs, mode.param("wpm"),
                                  mode.param_or("edge_ms", 6.0), src, c, phase0, rng);
            break;
        case ModemKind::fsk: {
            const double shift = mode.param("shift_hz");
            x = detail::gen_cpfsk(n, fs, mode.param("baud"),
                                  {-shift / 2.0, shift / 2.0}, src, c, phase0, 0.0);
            break;
        }
        case ModemKind::mfsk:
        case ModemKind::gfsk: {
            const int tones = static_cast<int>(mode.param("tones"));
            const double spacing = mode.param("spacing_hz");
            std::vector<double> freqs(static_cast<size_t>(tones));
            for (int t = 0; t < tones; ++t)
                freqs[static_cast<size_t>(t)] =
                    (t - (tones - 1) / 2.0) * spacing;
            const double bt =
                mode.kind == ModemKind::gfsk ? mode.param_or("bt", 2.0) : 0.0;
            x = detail::gen_cpfsk(n, fs, mode.param("baud"), freqs, src, c,
                                  phase0, bt);
            break;
        }
        case ModemKind::bpsk:
            x = detail::gen_psk_hann(n, fs, mode.param("baud"), 1, src, c, phase0);
            break;
        case ModemKind::qpsk:
            x = detail::gen_psk_hann(n, fs, mode.param("baud"), 2, src, c, phase0);
            break;
        case ModemKind::psk8_serial:
            x = detail::gen_psk8_serial(n, fs, mode.param("baud"),
                                        mode.param_or("rolloff", 0.35), src, c,
                                        phase0);
            break;
        case ModemKind::am: {
            const double depth = rng.uniform(0.5, 0.9);
            const VoiceKind vk =
                rng.bernoulli(0.5) ? VoiceKind::speech_like : VoiceKind::music_like;
            auto prog = synthesize_voice_program(vk, duration_s, rng, fs);
            const double hi = mode.param_or("audio_high_hz", 1500.0);
            // Narrow the program so the DSB spectrum fits the window.
            std::vector<cplx> a(prog.audio.size());
            for (size_t i = 0; i < a.size(); ++i) a[i] = {prog.audio[i], 0.0};
            const auto lp = design_kaiser_lowpass(fs, hi, 150.0, 70.0);
            a = fft_filter_same(a, lp);
            double peak = 1e-12;
            for (const cplx& v : a) peak = std::max(peak, std::abs(v.real()));
            x.resize(n);
            for (size_t i = 0; i < n; ++i) {
                const double ph = phase0 + 2.0 * std::numbers::pi * c *
                                               static_cast<double>(i) / fs;
                const double env = 1.0 + depth * a[i].real() / peak;
                x[i] = env * cplx{std::cos(ph), std::sin(ph)};
            }
            break;
        }
        case ModemKind::usb:
        case ModemKind::lsb: {
            const double lo = mode.param_or("audio_low_hz", 300.0);
            const double hi = mode.param_or("audio_high_hz", 2700.0);
            auto prog = synthesize_voice_program(VoiceKind::speech_like,
                                                 duration_s, rng, fs, lo, hi);
            auto a = analytic_signal(prog.audio);
            const double band_center = (lo + hi) / 2.0;
            x.resize(n);
            for (size_t i = 0; i < n; ++i) {
                cplx v = a[i];
                if (mode.kind == ModemKind::lsb) v = std::conj(v);
                const double ph = phase0 + 2.0 * std::numbers::pi *
                                               (c - (mode.kind == ModemKind::usb
                                                         ? band_center
                                                         : -band_center)) *
                                               static_cast<double>(i) / fs;
                x[i] = v * cplx{std::cos(ph), std::sin(ph)};
            }
            break;
        }
    }

    ModemOutput out;
    out.mode = mode;
    out.carrier_offset_hz = c;
    out.signal.sample_rate_hz = fs;
    out.signal.samples = std::move(x);
    out.signal = normalize_power(out.signal, 1.0);
    return out;
}

inline ModemOutput synthesize(const ModeRegistry& reg, const std::string& mode_name,
                              double duration_s, SymbolSource& src, SeededRng& rng) {
    return synthesize(find_mode(reg, mode_name), duration_s, src, rng);
}

}  // namespace hfsig
