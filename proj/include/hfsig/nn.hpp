#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hfsig/parallel.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/tensor.hpp"

namespace hfsig {

// ---------------------------------------------------------------------
// Layers.  Every parameterized layer owns its weights, gradient buffers
// and Adam moments.  Parallel sections assign each output element to
// exactly one task, so results are bit-identical for any thread count.
// ---------------------------------------------------------------------

struct ConvLayer {
    size_t in_ch = 0, out_ch = 0, kernel = 0;
    std::vector<double> w, b;    // w: (out, in, kernel)
    std::vector<double> gw, gb;
    std::vector<double> mw, vw, mb, vb;

    void init_shapes() {
        w.assign(out_ch * in_ch * kernel, 0.0);
        b.assign(out_ch, 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
        mw.assign(w.size(), 0.0);
        vw.assign(w.size(), 0.0);
        mb.assign(b.size(), 0.0);
        vb.assign(b.size(), 0.0);
    }
    size_t pad() const { return (kernel - 1) / 2; }
};

struct ReluLayer {};

struct PoolLayer {
    std::vector<uint8_t> argmax;  // per output element: offset of the max
};

struct DenseLayer {
    size_t in_features = 0, units = 0;
    std::vector<double> w, b;  // w: (units, in_features)
    std::vector<double> gw, gb;
    std::vector<double> mw, vw, mb, vb;

    void init_shapes() {
        w.assign(units * in_features, 0.0);
        b.assign(units, 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
        mw.assign(w.size(), 0.0);
        vw.assign(w.size(), 0.0);
        mb.assign(b.size(), 0.0);
        vb.assign(b.size(), 0.0);
    }
};

struct DropoutLayer {
    double rate = 0.5;
    std::vector<uint8_t> mask;  // 1 = keep, refreshed every training forward
};

using Layer = std::variant<ConvLayer, ReluLayer, PoolLayer, DenseLayer, DropoutLayer>;

struct Model {
    size_t input_ch = 2, input_len = 4096;
    size_t class_count = 0;
    std::vector<Layer> layers;
    bool training = false;

    size_t param_count() const {
        size_t n = 0;
        for (const Layer& l : layers) {
            if (const auto* c = std::get_if<ConvLayer>(&l))
                n += c->w.size() + c->b.size();
            else if (const auto* d = std::get_if<DenseLayer>(&l))
                n += d->w.size() + d->b.size();
        }
        return n;
    }
};

// Architecture descriptor: a text block stored in checkpoints so a model
// can be rebuilt with no external config.
struct ArchStep {
    enum class Kind { conv, relu, pool, dense, dropout } kind;
    size_t width = 0;    // conv out channels / dense units
    size_t kernel = 0;   // conv only
    double rate = 0.0;   // dropout only
};

inline std::vector<ArchStep> desk_architecture(size_t class_count) {
    std::vector<ArchStep> a;
    for (size_t w : {16u, 32u, 48u, 64u, 96u, 128u}) {
        a.push_back({ArchStep::Kind::conv, w, 7, 0.0});
        a.push_back({ArchStep::Kind::relu, 0, 0, 0.0});
        a.push_back({ArchStep::Kind::pool, 0, 0, 0.0});
    }
    a.push_back({ArchStep::Kind::dense, 256, 0, 0.0});
    a.push_back({ArchStep::Kind::relu, 0, 0, 0.0});
    a.push_back({ArchStep::Kind::dropout, 0, 0, 0.5});
    a.push_back({ArchStep::Kind::dense, class_count, 0, 0.0});
    return a;
}

inline std::string arch_to_text(const std::vector<ArchStep>& arch, size_t in_ch,
                                size_t in_len) {
    std::ostringstream ss;
    ss << "input " << in_ch << " " << in_len << "\n";
    char buf[64];
    for (const ArchStep& s : arch) {
        switch (s.kind) {
            case ArchStep::Kind::conv:
                ss << "conv " << s.width << " " << s.kernel << "\n";
                break;
            case ArchStep::Kind::relu: ss << "relu\n"; break;
            case ArchStep::Kind::pool: ss << "pool 2\n"; break;
            case ArchStep::Kind::dense: ss << "dense " << s.width << "\n"; break;
            case ArchStep::Kind::dropout:
                std::snprintf(buf, sizeof buf, "dropout %.17g\n", s.rate);
                ss << buf;
                break;
        }
    }
    return ss.str();
}

inline std::vector<ArchStep> arch_from_text(const std::string& text, size_t& in_ch,
                                            size_t& in_len) {
    std::istringstream ss(text);
    std::string line;
    std::vector<ArchStep> arch;
    bool have_input = false;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string op;
        ls >> op;
        if (op == "input") {
            ls >> in_ch >> in_len;
            have_input = true;
        } else if (op == "conv") {
            ArchStep s{ArchStep::Kind::conv, 0, 0, 0.0};
            ls >> s.width >> s.kernel;
            arch.push_back(s);
        } else if (op == "relu") {
            arch.push_back({ArchStep::Kind::relu, 0, 0, 0.0});
        } else if (op == "pool") {
            arch.push_back({ArchStep::Kind::pool, 0, 0, 0.0});
        } else if (op == "dense") {
            ArchStep s{ArchStep::Kind::dense, 0, 0, 0.0};
            ls >> s.width;
            arch.push_back(s);
        } else if (op == "dropout") {
            ArchStep s{ArchStep::Kind::dropout, 0, 0, 0.0};
            ls >> s.rate;
            arch.push_back(s);
        } else {
            throw std::runtime_error("unknown architecture op: " + op);
        }
        if (ls.fail()) throw std::runtime_error("bad architecture line: " + line);
    }
    if (!have_input || arch.empty())
        throw std::runtime_error("architecture descriptor incomplete");
    return arch;
}

inline Model build_model(const std::vector<ArchStep>& arch, size_t in_ch = 2,
                         size_t in_len = 4096) {
    Model m;
    m.input_ch = in_ch;
    m.input_len = in_len;
    size_t ch = in_ch, len = in_len;
    for (const ArchStep& s : arch) {
        switch (s.kind) {
            case ArchStep::Kind::conv: {
                ConvLayer c;
                c.in_ch = ch;
                c.out_ch = s.width;
                c.kernel = s.kernel;
                if (c.kernel % 2 == 0)
                    throw std::invalid_argument("conv kernel must be odd");
                c.init_shapes();
                m.layers.emplace_back(std::move(c));
                ch = s.width;
                break;
            }
            case ArchStep::Kind::relu:
                m.layers.emplace_back(ReluLayer{});
                break;
            case ArchStep::Kind::pool:
                if (len % 2 != 0)
                    throw std::invalid_argument("pool input length must be even");
                m.layers.emplace_back(PoolLayer{});
                len /= 2;
                break;
            case ArchStep::Kind::dense: {
                DenseLayer d;
                d.in_features = ch * len;
                d.units = s.width;
                d.init_shapes();
                m.layers.emplace_back(std::move(d));
                ch = s.width;
                len = 1;
                break;
            }
            case ArchStep::Kind::dropout: {
                DropoutLayer d;
                d.rate = s.rate;
                if (d.rate < 0.0 || d.rate >= 1.0)
                    throw std::invalid_argument("dropout rate outside [0, 1)");
                m.layers.emplace_back(std::move(d));
                break;
            }
        }
    }
    if (len != 1)
        throw std::invalid_argument("model must end in a dense layer");
    m.class_count = ch;
    return m;
}

inline std::vector<ArchStep> model_arch(const Model& m) {
    std::vector<ArchStep> arch;
    for (const Layer& l : m.layers) {
        if (const auto* c = std::get_if<ConvLayer>(&l))
            arch.push_back({ArchStep::Kind::conv, c->out_ch, c->kernel, 0.0});
        else if (std::get_if<ReluLayer>(&l))
            arch.push_back({ArchStep::Kind::relu, 0, 0, 0.0});
        else if (std::get_if<PoolLayer>(&l))
            arch.push_back({ArchStep::Kind::pool, 0, 0, 0.0});
        else if (const auto* d = std::get_if<DenseLayer>(&l))
            arch.push_back({ArchStep::Kind::dense, d->units, 0, 0.0});
        else if (const auto* dr = std::get_if<DropoutLayer>(&l))
            arch.push_back({ArchStep::Kind::dropout, 0, 0, dr->rate});
    }
    return arch;
}

// He-uniform, biases zero; draw order is fixed by layer declaration order.
inline void he_init(Model& m, SeededRng& rng) {
    for (Layer& l : m.layers) {
        if (auto* c = std::get_if<ConvLayer>(&l)) {
            const double limit = std::sqrt(6.0 / static_cast<double>(c->in_ch * c->kernel));
            for (double& w : c->w) w = rng.uniform(-limit, limit);
            for (double& b : c->b) b = 0.0;
        } else if (auto* d = std::get_if<DenseLayer>(&l)) {
            const double limit = std::sqrt(6.0 / static_cast<double>(d->in_features));
            for (double& w : d->w) w = rng.uniform(-limit, limit);
            for (double& b : d->b) b = 0.0;
        }
    }
}

// Visit every (param, grad, adam-m, adam-v) quad in declaration order.
template <typename Fn>
void for_each_param(Model& m, Fn fn) {
    for (Layer& l : m.layers) {
        if (auto* c = std::get_if<ConvLayer>(&l)) {
            fn(c->w, c->gw, c->mw, c->vw);
            fn(c->b, c->gb, c->mb, c->vb);
        } else if (auto* d = std::get_if<DenseLayer>(&l)) {
            fn(d->w, d->gw, d->mw, d->vw);
            fn(d->b, d->gb, d->mb, d->vb);
        }
    }
}

// ---------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------

struct Workspace {
    std::vector<Tensor3> acts;    // acts[0] = input, acts[i+1] = layer i output
    std::vector<Tensor3> grads;   // same shapes as acts
    std::vector<Tensor3> padded;  // per-conv scratch, indexed by layer
    std::vector<Tensor3> padded_g;  // backward-side twin of `padded`
    Tensor3 probs;                // softmax output (B, C, 1)
};

namespace nn_detail {

// Interleaved dot product: four blocks of eight independent partial sums,
// so the compiler can keep SIMD accumulators with enough parallel chains
// to hide FMA latency, without reassociating one serial chain (which it
// rightly refuses to do outside fast-math).  The summation order is fixed,
// so results stay run-to-run identical.
inline double dotv(const double* __restrict__ a, const double* __restrict__ b,
                   size_t n) {
    double la[8] = {}, lb[8] = {}, lc[8] = {}, ld[8] = {};
    size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        for (size_t j = 0; j < 8; ++j) la[j] += a[i + j] * b[i + j];
        for (size_t j = 0; j < 8; ++j) lb[j] += a[i + 8 + j] * b[i + 8 + j];
        for (size_t j = 0; j < 8; ++j) lc[j] += a[i + 16 + j] * b[i + 16 + j];
        for (size_t j = 0; j < 8; ++j) ld[j] += a[i + 24 + j] * b[i + 24 + j];
    }
    for (; i + 8 <= n; i += 8)
        for (size_t j = 0; j < 8; ++j) la[j] += a[i + j] * b[i + j];
    for (; i < n; ++i) la[0] += a[i] * b[i];
    double acc = 0.0;
    for (size_t j = 0; j < 8; ++j) acc += la[j] + lb[j] + lc[j] + ld[j];
    return acc;
}

// Grow-only padded scratch: pad margins are zeroed when the geometry
// changes and stay zero afterwards because callers only write the
// interior.  Cuts a full clear per call in the training loop.
inline void ensure_padded(Tensor3& pad, size_t B, size_t C, size_t L) {
    if (pad.b != B || pad.c != C || pad.l != L) pad.resize(B, C, L);
}

#if defined(__GNUC__) || defined(__clang__)
#define HFSIG_VEC8 1
typedef double vd8 __attribute__((vector_size(8 * sizeof(double))));
inline vd8 vzero8() {
    vd8 v;
    std::memset(&v, 0, sizeof v);
    return v;
}
inline vd8 vload8(const double* p) {
    vd8 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
#endif

// Seven-lag correlation of one row pair: out[k] += sum_n d[n] * s[n+k].
// Fusing the lags into one pass touches each cache line of d and s once
// instead of seven times; the accumulators stay in registers.
inline void corr7_row(const double* __restrict__ d, const double* __restrict__ s,
                      size_t L, double* __restrict__ out) {
#ifdef HFSIG_VEC8
    vd8 a0 = vzero8(), a1 = vzero8(), a2 = vzero8(), a3 = vzero8(),
        a4 = vzero8(), a5 = vzero8(), a6 = vzero8();
    size_t n = 0;
    for (; n + 8 <= L; n += 8) {
        const vd8 dv = vload8(d + n);
        a0 += dv * vload8(s + n);
        a1 += dv * vload8(s + n + 1);
        a2 += dv * vload8(s + n + 2);
        a3 += dv * vload8(s + n + 3);
        a4 += dv * vload8(s + n + 4);
        a5 += dv * vload8(s + n + 5);
        a6 += dv * vload8(s + n + 6);
    }
    const vd8 acc[7] = {a0, a1, a2, a3, a4, a5, a6};
    for (size_t k = 0; k < 7; ++k) {
        double t = 0.0;
        for (size_t j = 0; j < 8; ++j) t += acc[k][j];
        for (size_t m = n; m < L; ++m) t += d[m] * s[m + k];
        out[k] += t;
    }
#else
    for (size_t k = 0; k < 7; ++k) {
        double t = 0.0;
        for (size_t n = 0; n < L; ++n) t += d[n] * s[n + k];
        out[k] += t;
    }
#endif
}

// Two d rows against one s row: the seven shifted s loads are shared
// between both lag sets, so the loop runs close to FMA throughput
// instead of load throughput.  Each accumulator sees the same addition
// order as corr7_row, so results match it bit for bit.
inline void corr7_row2(const double* __restrict__ d0,
                       const double* __restrict__ d1,
                       const double* __restrict__ s, size_t L,
                       double* __restrict__ o0, double* __restrict__ o1) {
#ifdef HFSIG_VEC8
    vd8 a0 = vzero8(), a1 = vzero8(), a2 = vzero8(), a3 = vzero8(),
        a4 = vzero8(), a5 = vzero8(), a6 = vzero8();
    vd8 b0 = vzero8(), b1 = vzero8(), b2 = vzero8(), b3 = vzero8(),
        b4 = vzero8(), b5 = vzero8(), b6 = vzero8();
    size_t n = 0;
    for (; n + 8 <= L; n += 8) {
        const vd8 dv0 = vload8(d0 + n), dv1 = vload8(d1 + n);
        const vd8 s0 = vload8(s + n), s1 = vload8(s + n + 1),
                  s2 = vload8(s + n + 2), s3 = vload8(s + n + 3),
                  s4 = vload8(s + n + 4), s5 = vload8(s + n + 5),
                  s6 = vload8(s + n + 6);
        a0 += dv0 * s0;
        a1 += dv0 * s1;
        a2 += dv0 * s2;
        a3 += dv0 * s3;
        a4 += dv0 * s4;
        a5 += dv0 * s5;
        a6 += dv0 * s6;
        b0 += dv1 * s0;
        b1 += dv1 * s1;
        b2 += dv1 * s2;
        b3 += dv1 * s3;
        b4 += dv1 * s4;
        b5 += dv1 * s5;
        b6 += dv1 * s6;
    }
    const vd8 accA[7] = {a0, a1, a2, a3, a4, a5, a6};
    const vd8 accB[7] = {b0, b1, b2, b3, b4, b5, b6};
    for (size_t k = 0; k < 7; ++k) {
        double ta = 0.0, tb = 0.0;
        for (size_t j = 0; j < 8; ++j) {
            ta += accA[k][j];
            tb += accB[k][j];
        }
        for (size_t m = n; m < L; ++m) {
            ta += d0[m] * s[m + k];
            tb += d1[m] * s[m + k];
        }
        o0[k] += ta;
        o1[k] += tb;
    }
#else
    corr7_row(d0, s, L, o0);
    corr7_row(d1, s, L, o1);
#endif
}

inline void conv_forward(ConvLayer& c, const Tensor3& x, Tensor3& y,
                         Tensor3& xpad, unsigned threads) {
    const size_t B = x.b, L = x.l, K = c.kernel, P = c.pad();
    y.resize_noinit(B, c.out_ch, L);
    ensure_padded(xpad, B, c.in_ch, L + 2 * P);
    parallel_for(B * c.in_ch, threads, [&](size_t t) {
        const size_t bi = t / c.in_ch, ic = t % c.in_ch;
        std::memcpy(xpad.row(bi, ic) + P, x.row(bi, ic), L * sizeof(double));
    });
    if (K == 7) {
        // Two output channels per pass: the seven x loads feed fourteen
        // FMAs, which moves the stencil from load-bound to FMA-bound.
        const size_t npair = (c.out_ch + 1) / 2;
        parallel_for(B * npair, threads, [&](size_t t) {
            const size_t bi = t / npair, oc = (t % npair) * 2;
            double* __restrict__ y0 = y.row(bi, oc);
            if (oc + 1 < c.out_ch) {
                double* __restrict__ y1 = y.row(bi, oc + 1);
                for (size_t ic = 0; ic < c.in_ch; ++ic) {
                    const double* __restrict__ xr = xpad.row(bi, ic);
                    const double* wa = &c.w[((oc + 0) * c.in_ch + ic) * 7];
                    const double* wb = &c.w[((oc + 1) * c.in_ch + ic) * 7];
                    const double a0 = wa[0], a1 = wa[1], a2 = wa[2], a3 = wa[3],
                                 a4 = wa[4], a5 = wa[5], a6 = wa[6];
                    const double b0 = wb[0], b1 = wb[1], b2 = wb[2], b3 = wb[3],
                                 b4 = wb[4], b5 = wb[5], b6 = wb[6];
                    if (ic == 0) {
                        const double ba = c.b[oc], bb = c.b[oc + 1];
                        for (size_t n = 0; n < L; ++n) {
                            const double x0 = xr[n], x1 = xr[n + 1],
                                         x2 = xr[n + 2], x3 = xr[n + 3],
                                         x4 = xr[n + 4], x5 = xr[n + 5],
                                         x6 = xr[n + 6];
                            y0[n] = ba + a0 * x0 + a1 * x1 + a2 * x2 + a3 * x3 +
                                    a4 * x4 + a5 * x5 + a6 * x6;
                            y1[n] = bb + b0 * x0 + b1 * x1 + b2 * x2 + b3 * x3 +
                                    b4 * x4 + b5 * x5 + b6 * x6;
                        }
                    } else {
                        for (size_t n = 0; n < L; ++n) {
                            const double x0 = xr[n], x1 = xr[n + 1],
                                         x2 = xr[n + 2], x3 = xr[n + 3],
                                         x4 = xr[n + 4], x5 = xr[n + 5],
                                         x6 = xr[n + 6];
                            y0[n] += a0 * x0 + a1 * x1 + a2 * x2 + a3 * x3 +
                                     a4 * x4 + a5 * x5 + a6 * x6;
                            y1[n] += b0 * x0 + b1 * x1 + b2 * x2 + b3 * x3 +
                                     b4 * x4 + b5 * x5 + b6 * x6;
                        }
                    }
                }
            } else {  // odd channel count: plain single-channel stencil
                const double bias = c.b[oc];
                for (size_t ic = 0; ic < c.in_ch; ++ic) {
                    const double* __restrict__ xr = xpad.row(bi, ic);
                    const double* wr = &c.w[(oc * c.in_ch + ic) * 7];
                    const double w0 = wr[0], w1 = wr[1], w2 = wr[2], w3 = wr[3],
                                 w4 = wr[4], w5 = wr[5], w6 = wr[6];
                    if (ic == 0) {
                        for (size_t n = 0; n < L; ++n)
                            y0[n] = bias + w0 * xr[n] + w1 * xr[n + 1] +
                                    w2 * xr[n + 2] + w3 * xr[n + 3] +
                                    w4 * xr[n + 4] + w5 * xr[n + 5] +
                                    w6 * xr[n + 6];
                    } else {
                        for (size_t n = 0; n < L; ++n)
                            y0[n] += w0 * xr[n] + w1 * xr[n + 1] + w2 * xr[n + 2] +
                                     w3 * xr[n + 3] + w4 * xr[n + 4] +
                                     w5 * xr[n + 5] + w6 * xr[n + 6];
                    }
                }
            }
        });
        return;
    }
    parallel_for(B * c.out_ch, threads, [&](size_t t) {
        const size_t bi = t / c.out_ch, oc = t % c.out_ch;
        double* __restrict__ yr = y.row(bi, oc);
        const double bias = c.b[oc];
        for (size_t ic = 0; ic < c.in_ch; ++ic) {
            const double* __restrict__ xr = xpad.row(bi, ic);
            const double* wr = &c.w[(oc * c.in_ch + ic) * K];
            if (ic == 0)
                for (size_t n = 0; n < L; ++n) yr[n] = bias;
            for (size_t k = 0; k < K; ++k) {
                const double wk = wr[k];
                const double* xs = xr + k;
                for (size_t n = 0; n < L; ++n) yr[n] += wk * xs[n];
            }
        }
    });
}

inline void conv_backward(ConvLayer& c, const Tensor3& x, const Tensor3& xpad,
                          const Tensor3& dy, Tensor3& dx, Tensor3& dypad,
                          unsigned threads, bool need_dx = true) {
    const size_t B = x.b, L = x.l, K = c.kernel, P = c.pad();
    // dW[oc,ic,k] = sum_b sum_n dy[b,oc,n] * xpad[b,ic,n+k]
    if (K == 7) {
        const size_t npair = (c.out_ch + 1) / 2;
        parallel_for(npair * c.in_ch, threads, [&](size_t t) {
            const size_t oc = (t / c.in_ch) * 2, ic = t % c.in_ch;
            if (oc + 1 < c.out_ch) {
                double a0[7] = {0, 0, 0, 0, 0, 0, 0};
                double a1[7] = {0, 0, 0, 0, 0, 0, 0};
                for (size_t bi = 0; bi < B; ++bi)
                    corr7_row2(dy.row(bi, oc), dy.row(bi, oc + 1),
                               xpad.row(bi, ic), L, a0, a1);
                double* g0 = &c.gw[((oc + 0) * c.in_ch + ic) * 7];
                double* g1 = &c.gw[((oc + 1) * c.in_ch + ic) * 7];
                for (size_t k = 0; k < 7; ++k) {
                    g0[k] += a0[k];
                    g1[k] += a1[k];
                }
            } else {
                double acc[7] = {0, 0, 0, 0, 0, 0, 0};
                for (size_t bi = 0; bi < B; ++bi)
                    corr7_row(dy.row(bi, oc), xpad.row(bi, ic), L, acc);
                double* gw = &c.gw[(oc * c.in_ch + ic) * 7];
                for (size_t k = 0; k < 7; ++k) gw[k] += acc[k];
            }
        });
    } else {
        parallel_for(c.out_ch * c.in_ch, threads, [&](size_t t) {
            const size_t oc = t / c.in_ch, ic = t % c.in_ch;
            double* gw = &c.gw[(oc * c.in_ch + ic) * K];
            for (size_t k = 0; k < K; ++k) {
                double acc = 0.0;
                for (size_t bi = 0; bi < B; ++bi)
                    acc += dotv(dy.row(bi, oc), xpad.row(bi, ic) + k, L);
                gw[k] += acc;
            }
        });
    }
    parallel_for(c.out_ch, threads, [&](size_t oc) {
        double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        for (size_t bi = 0; bi < B; ++bi) {
            const double* __restrict__ dyr = dy.row(bi, oc);
            size_t n = 0;
            for (; n + 8 <= L; n += 8)
                for (size_t j = 0; j < 8; ++j) lane[j] += dyr[n + j];
            for (; n < L; ++n) lane[0] += dyr[n];
        }
        double acc = 0.0;
        for (size_t j = 0; j < 8; ++j) acc += lane[j];
        c.gb[oc] += acc;
    });
    if (!need_dx) return;  // first layer: nothing consumes the input grad
    // dX = full correlation of dy with flipped weights; pad dy by P.
    dx.resize_noinit(B, c.in_ch, L);
    ensure_padded(dypad, B, c.out_ch, L + 2 * P);
    parallel_for(B * c.out_ch, threads, [&](size_t t) {
        const size_t bi = t / c.out_ch, oc = t % c.out_ch;
        std::memcpy(dypad.row(bi, oc) + P, dy.row(bi, oc), L * sizeof(double));
    });
    if (K == 7) {
        // Two input-channel rows per pass share every dy load, mirroring
        // the forward pairing.
        const size_t npair = (c.in_ch + 1) / 2;
        parallel_for(B * npair, threads, [&](size_t t) {
            const size_t bi = t / npair, ic = (t % npair) * 2;
            double* __restrict__ d0 = dx.row(bi, ic);
            if (ic + 1 < c.in_ch) {
                double* __restrict__ d1 = dx.row(bi, ic + 1);
                for (size_t oc = 0; oc < c.out_ch; ++oc) {
                    const double* __restrict__ dyr = dypad.row(bi, oc);
                    const double* wa = &c.w[(oc * c.in_ch + ic) * 7];
                    const double* wb = &c.w[(oc * c.in_ch + ic + 1) * 7];
                    const double a0 = wa[6], a1 = wa[5], a2 = wa[4], a3 = wa[3],
                                 a4 = wa[2], a5 = wa[1], a6 = wa[0];
                    const double b0 = wb[6], b1 = wb[5], b2 = wb[4], b3 = wb[3],
                                 b4 = wb[2], b5 = wb[1], b6 = wb[0];
                    if (oc == 0) {
                        for (size_t n = 0; n < L; ++n) {
                            const double g0 = dyr[n], g1 = dyr[n + 1],
                                         g2 = dyr[n + 2], g3 = dyr[n + 3],
                                         g4 = dyr[n + 4], g5 = dyr[n + 5],
                                         g6 = dyr[n + 6];
                            d0[n] = a0 * g0 + a1 * g1 + a2 * g2 + a3 * g3 +
                                    a4 * g4 + a5 * g5 + a6 * g6;
                            d1[n] = b0 * g0 + b1 * g1 + b2 * g2 + b3 * g3 +
                                    b4 * g4 + b5 * g5 + b6 * g6;
                        }
                    } else {
                        for (size_t n = 0; n < L; ++n) {
                            const double g0 = dyr[n], g1 = dyr[n + 1],
                                         g2 = dyr[n + 2], g3 = dyr[n + 3],
                                         g4 = dyr[n + 4], g5 = dyr[n + 5],
                                         g6 = dyr[n + 6];
                            d0[n] += a0 * g0 + a1 * g1 + a2 * g2 + a3 * g3 +
                                     a4 * g4 + a5 * g5 + a6 * g6;
                            d1[n] += b0 * g0 + b1 * g1 + b2 * g2 + b3 * g3 +
                                     b4 * g4 + b5 * g5 + b6 * g6;
                        }
                    }
                }
            } else {  // odd channel count tail
                for (size_t oc = 0; oc < c.out_ch; ++oc) {
                    const double* __restrict__ dyr = dypad.row(bi, oc);
                    const double* wr = &c.w[(oc * c.in_ch + ic) * 7];
                    const double w0 = wr[6], w1 = wr[5], w2 = wr[4], w3 = wr[3],
                                 w4 = wr[2], w5 = wr[1], w6 = wr[0];
                    if (oc == 0) {
                        for (size_t n = 0; n < L; ++n)
                            d0[n] = w0 * dyr[n] + w1 * dyr[n + 1] +
                                    w2 * dyr[n + 2] + w3 * dyr[n + 3] +
                                    w4 * dyr[n + 4] + w5 * dyr[n + 5] +
                                    w6 * dyr[n + 6];
                    } else {
                        for (size_t n = 0; n < L; ++n)
                            d0[n] += w0 * dyr[n] + w1 * dyr[n + 1] +
                                     w2 * dyr[n + 2] + w3 * dyr[n + 3] +
                                     w4 * dyr[n + 4] + w5 * dyr[n + 5] +
                                     w6 * dyr[n + 6];
                    }
                }
            }
        });
        return;
    }
    parallel_for(B * c.in_ch, threads, [&](size_t t) {
        const size_t bi = t / c.in_ch, ic = t % c.in_ch;
        double* __restrict__ dxr = dx.row(bi, ic);
        for (size_t oc = 0; oc < c.out_ch; ++oc) {
            const double* __restrict__ dyr = dypad.row(bi, oc);
            const double* wr = &c.w[(oc * c.in_ch + ic) * K];
            if (oc == 0)
                for (size_t n = 0; n < L; ++n) dxr[n] = 0.0;
            for (size_t k = 0; k < K; ++k) {
                const double wk = wr[K - 1 - k];
                const double* ds = dyr + k;
                for (size_t n = 0; n < L; ++n) dxr[n] += wk * ds[n];
            }
        }
    });
}

inline void pool_forward(PoolLayer& p, const Tensor3& x, Tensor3& y,
                         unsigned threads) {
    if (x.l % 2 != 0)
        throw std::invalid_argument("maxpool input length must be even");
    y.resize_noinit(x.b, x.c, x.l / 2);
    p.argmax.resize(y.size());
    parallel_for(x.b * x.c, threads, [&](size_t t) {
        const size_t bi = t / x.c, ci = t % x.c;
        const double* xr = x.row(bi, ci);
        double* yr = y.row(bi, ci);
        uint8_t* am = &p.argmax[(bi * x.c + ci) * (x.l / 2)];
        for (size_t n = 0; n < x.l / 2; ++n) {
            const double a = xr[2 * n], b = xr[2 * n + 1];
            // ties go to the first element
            if (b > a) {
                yr[n] = b;
                am[n] = 1;
            } else {
                yr[n] = a;
                am[n] = 0;
            }
        }
    });
}

inline void pool_backward(const PoolLayer& p, const Tensor3& x, const Tensor3& dy,
                          Tensor3& dx, unsigned threads) {
    dx.resize_noinit(x.b, x.c, x.l);
    parallel_for(x.b * x.c, threads, [&](size_t t) {
        const size_t bi = t / x.c, ci = t % x.c;
        const double* dyr = dy.row(bi, ci);
        double* dxr = dx.row(bi, ci);
        const uint8_t* am = &p.argmax[(bi * x.c + ci) * dy.l];
        // write both slots in one streaming pass instead of fill-then-scatter
        for (size_t n = 0; n < dy.l; ++n) {
            const double g = dyr[n];
            const bool hi = am[n] != 0;
            dxr[2 * n] = hi ? 0.0 : g;
            dxr[2 * n + 1] = hi ? g : 0.0;
        }
    });
}

inline void dense_forward(DenseLayer& d, const Tensor3& x, Tensor3& y,
                          unsigned threads) {
    if (x.features() != d.in_features)
        throw std::invalid_argument("dense input features mismatch");
    const size_t B = x.b, F = d.in_features, U = d.units;
    y.resize_noinit(B, U, 1);
    // Unit-block outer loop so a block of weight rows stays cached across
    // the whole batch instead of re-streaming the matrix per record.
    const size_t UB = 8, nub = (U + UB - 1) / UB;
    parallel_for(nub * B, threads, [&](size_t t) {
        const size_t ub = t / B, bi = t % B;
        const size_t u0 = ub * UB, u1 = std::min(u0 + UB, U);
        const double* xr = x.batch(bi);
        for (size_t u = u0; u < u1; ++u)
            y.v[bi * U + u] = d.b[u] + dotv(&d.w[u * F], xr, F);
    });
}

inline void dense_backward(DenseLayer& d, const Tensor3& x, const Tensor3& dy,
                           Tensor3& dx, unsigned threads) {
    const size_t B = x.b, F = d.in_features, U = d.units;
    dx.resize_noinit(x.b, x.c, x.l);
    const size_t UB = 8, nub = (U + UB - 1) / UB;
    parallel_for(nub, threads, [&](size_t ub) {
        const size_t u0 = ub * UB, u1 = std::min(u0 + UB, U);
#ifdef HFSIG_VEC8
        if (u1 - u0 == UB) {
            // Register-tile gw: eight unit rows accumulate over the whole
            // batch in registers, one store per row per feature vector.
            // Raises the flop-per-load ratio from 1 to 8.
            size_t f = 0;
            for (; f + 8 <= F; f += 8) {
                vd8 acc[UB];
                for (size_t j = 0; j < UB; ++j) acc[j] = vzero8();
                for (size_t bi = 0; bi < B; ++bi) {
                    const vd8 xv = vload8(x.batch(bi) + f);
                    const double* g = &dy.v[bi * U + u0];
                    acc[0] += g[0] * xv;
                    acc[1] += g[1] * xv;
                    acc[2] += g[2] * xv;
                    acc[3] += g[3] * xv;
                    acc[4] += g[4] * xv;
                    acc[5] += g[5] * xv;
                    acc[6] += g[6] * xv;
                    acc[7] += g[7] * xv;
                }
                for (size_t j = 0; j < UB; ++j) {
                    double* w = &d.gw[(u0 + j) * F + f];
                    const vd8 cur = vload8(w) + acc[j];
                    std::memcpy(w, &cur, sizeof cur);
                }
            }
            for (; f < F; ++f) {
                for (size_t u = u0; u < u1; ++u) {
                    double t = 0.0;
                    for (size_t bi = 0; bi < B; ++bi)
                        t += dy.v[bi * U + u] * x.batch(bi)[f];
                    d.gw[u * F + f] += t;
                }
            }
        } else
#endif
        {
            for (size_t bi = 0; bi < B; ++bi) {
                const double* __restrict__ xr = x.batch(bi);
                for (size_t u = u0; u < u1; ++u) {
                    const double g = dy.v[bi * U + u];
                    double* __restrict__ gw = &d.gw[u * F];
                    for (size_t f = 0; f < F; ++f) gw[f] += g * xr[f];
                }
            }
        }
        for (size_t u = u0; u < u1; ++u) {
            double gb = 0.0;
            for (size_t bi = 0; bi < B; ++bi) gb += dy.v[bi * U + u];
            d.gb[u] += gb;
        }
    });
    // dx in blocks of eight batch rows so one weight sweep feeds them all;
    // feature tiles keep the eight partial rows L1-resident across the
    // unit sweep.
    const size_t BB = 8, nbb = (B + BB - 1) / BB, FT = 512;
    parallel_for(nbb, threads, [&](size_t bb) {
        const size_t b0 = bb * BB, b1 = std::min(b0 + BB, B);
        if (b1 - b0 == BB) {
            for (size_t f0 = 0; f0 < F; f0 += FT) {
                const size_t fe = std::min(f0 + FT, F) - f0;
                double* __restrict__ r0 = dx.batch(b0 + 0) + f0;
                double* __restrict__ r1 = dx.batch(b0 + 1) + f0;
                double* __restrict__ r2 = dx.batch(b0 + 2) + f0;
                double* __restrict__ r3 = dx.batch(b0 + 3) + f0;
                double* __restrict__ r4 = dx.batch(b0 + 4) + f0;
                double* __restrict__ r5 = dx.batch(b0 + 5) + f0;
                double* __restrict__ r6 = dx.batch(b0 + 6) + f0;
                double* __restrict__ r7 = dx.batch(b0 + 7) + f0;
                for (size_t f = 0; f < fe; ++f)
                    r0[f] = r1[f] = r2[f] = r3[f] = r4[f] = r5[f] = r6[f] =
                        r7[f] = 0.0;
                for (size_t u = 0; u < U; ++u) {
                    const double* __restrict__ wr = &d.w[u * F] + f0;
                    const double g0 = dy.v[(b0 + 0) * U + u];
                    const double g1 = dy.v[(b0 + 1) * U + u];
                    const double g2 = dy.v[(b0 + 2) * U + u];
                    const double g3 = dy.v[(b0 + 3) * U + u];
                    const double g4 = dy.v[(b0 + 4) * U + u];
                    const double g5 = dy.v[(b0 + 5) * U + u];
                    const double g6 = dy.v[(b0 + 6) * U + u];
                    const double g7 = dy.v[(b0 + 7) * U + u];
                    for (size_t f = 0; f < fe; ++f) {
                        const double w = wr[f];
                        r0[f] += g0 * w;
                        r1[f] += g1 * w;
                        r2[f] += g2 * w;
                        r3[f] += g3 * w;
                        r4[f] += g4 * w;
                        r5[f] += g5 * w;
                        r6[f] += g6 * w;
                        r7[f] += g7 * w;
                    }
                }
            }
        } else {
            for (size_t bi = b0; bi < b1; ++bi) {
                double* __restrict__ dxr = dx.batch(bi);
                for (size_t f = 0; f < F; ++f) dxr[f] = 0.0;
                for (size_t u = 0; u < U; ++u) {
                    const double g = dy.v[bi * U + u];
                    const double* __restrict__ wr = &d.w[u * F];
                    for (size_t f = 0; f < F; ++f) dxr[f] += g * wr[f];
                }
            }
        }
    });
}

}  // namespace nn_detail

// Forward pass to class probabilities.  In training mode dropout masks
// are drawn serially from dropout_rng (one bernoulli per activation), so
// results stay independent of the thread count.
inline const Tensor3& forward(Model& m, const Tensor3& input, Workspace& ws,
                              SeededRng* dropout_rng = nullptr,
                              unsigned threads = 1) {
    if (input.c != m.input_ch || input.l != m.input_len)
        throw std::invalid_argument("input shape " + input.shape_str() +
                                    ", expected (B, " + std::to_string(m.input_ch) +
                                    ", " + std::to_string(m.input_len) + ")");
    if (m.training && !dropout_rng)
        throw std::invalid_argument("training forward needs a dropout rng");
    const size_t nl = m.layers.size();
    ws.acts.resize(nl + 1);
    ws.padded.resize(nl);
    ws.acts[0] = input;
    for (size_t i = 0; i < nl; ++i) {
        const Tensor3& x = ws.acts[i];
        Tensor3& y = ws.acts[i + 1];
        if (auto* c = std::get_if<ConvLayer>(&m.layers[i])) {
            nn_detail::conv_forward(*c, x, y, ws.padded[i], threads);
        } else if (std::get_if<ReluLayer>(&m.layers[i])) {
            y.resize_noinit(x.b, x.c, x.l);
            parallel_for(x.b, threads, [&](size_t bi) {
                const double* __restrict__ xr = x.batch(bi);
                double* __restrict__ yr = y.batch(bi);
                for (size_t j = 0; j < x.features(); ++j)
                    yr[j] = xr[j] > 0.0 ? xr[j] : 0.0;
            });
        } else if (auto* p = std::get_if<PoolLayer>(&m.layers[i])) {
            nn_detail::pool_forward(*p, x, y, threads);
        } else if (auto* d = std::get_if<DenseLayer>(&m.layers[i])) {
            nn_detail::dense_forward(*d, x, y, threads);
        } else if (auto* dr = std::get_if<DropoutLayer>(&m.layers[i])) {
            y.resize_noinit(x.b, x.c, x.l);
            if (m.training) {
                dr->mask.resize(x.size());
                for (size_t j = 0; j < x.size(); ++j)
                    dr->mask[j] = dropout_rng->bernoulli(dr->rate) ? 0 : 1;
                const double s = 1.0 / (1.0 - dr->rate);
                parallel_for(x.b, threads, [&](size_t bi) {
                    const size_t off = bi * x.features();
                    for (size_t j = 0; j < x.features(); ++j)
                        y.v[off + j] = dr->mask[off + j] ? x.v[off + j] * s : 0.0;
                });
            } else {
                y = x;  // inference: exact identity
            }
        }
    }
    const Tensor3& logits = ws.acts[nl];
    ws.probs.resize_noinit(logits.b, m.class_count, 1);
    for (size_t bi = 0; bi < logits.b; ++bi) {
        const double* zr = logits.batch(bi);
        double* pr = ws.probs.batch(bi);
        double mx = zr[0];
        for (size_t j = 1; j < m.class_count; ++j) mx = std::max(mx, zr[j]);
        double sum = 0.0;
        for (size_t j = 0; j < m.class_count; ++j) {
            pr[j] = std::exp(zr[j] - mx);
            sum += pr[j];
        }
        for (size_t j = 0; j < m.class_count; ++j) pr[j] /= sum;
    }
    return ws.probs;
}

inline void zero_grads(Model& m) {
    for_each_param(m, [](std::vector<double>&, std::vector<double>& g,
                         std::vector<double>&, std::vector<double>&) {
        std::fill(g.begin(), g.end(), 0.0);
    });
}

// Softmax cross-entropy loss; fills parameter gradients (accumulating on
// top of whatever is in them -- call zero_grads first for a fresh batch).
inline double loss_and_backward(Model& m, const Tensor3& input,
                                const std::vector<uint16_t>& labels, Workspace& ws,
                                SeededRng* dropout_rng, unsigned threads = 1) {
    if (labels.size() != input.b)
        throw std::invalid_argument("label count does not match batch size");
    for (uint16_t l : labels)
        if (l >= m.class_count)
            throw std::invalid_argument("label id " + std::to_string(l) +
                                        " outside class count " +
                                        std::to_string(m.class_count));
    const Tensor3& probs = forward(m, input, ws, dropout_rng, threads);
    const size_t B = input.b, nl = m.layers.size();
    double loss = 0.0;
    ws.grads.resize(nl + 1);
    ws.padded_g.resize(nl);
    Tensor3& dlogits = ws.grads[nl];
    dlogits.resize_noinit(B, m.class_count, 1);
    for (size_t bi = 0; bi < B; ++bi) {
        const double* pr = probs.batch(bi);
        double* dr = dlogits.batch(bi);
        loss += -std::log(std::max(pr[labels[bi]], 1e-300));
        for (size_t j = 0; j < m.class_count; ++j) {
            dr[j] = (pr[j] - (j == labels[bi] ? 1.0 : 0.0)) /
                    static_cast<double>(B);
        }
    }
    loss /= static_cast<double>(B);

    for (size_t ii = nl; ii-- > 0;) {
        const Tensor3& x = ws.acts[ii];
        const Tensor3& dy = ws.grads[ii + 1];
        Tensor3& dx = ws.grads[ii];
        if (auto* c = std::get_if<ConvLayer>(&m.layers[ii])) {
            nn_detail::conv_backward(*c, x, ws.padded[ii], dy, dx,
                                     ws.padded_g[ii], threads, ii != 0);
        } else if (std::get_if<ReluLayer>(&m.layers[ii])) {
            dx.resize_noinit(x.b, x.c, x.l);
            parallel_for(x.b, threads, [&](size_t bi) {
                const size_t off = bi * x.features();
                for (size_t j = 0; j < x.features(); ++j)
                    dx.v[off + j] = x.v[off + j] > 0.0 ? dy.v[off + j] : 0.0;
            });
        } else if (auto* p = std::get_if<PoolLayer>(&m.layers[ii])) {
            nn_detail::pool_backward(*p, x, dy, dx, threads);
        } else if (auto* d = std::get_if<DenseLayer>(&m.layers[ii])) {
            nn_detail::dense_backward(*d, x, dy, dx, threads);
        } else if (auto* dr = std::get_if<DropoutLayer>(&m.layers[ii])) {
            dx.resize_noinit(x.b, x.c, x.l);
            const double s = 1.0 / (1.0 - dr->rate);
            parallel_for(x.b, threads, [&](size_t bi) {
                const size_t off = bi * x.features();
                for (size_t j = 0; j < x.features(); ++j)
                    dx.v[off + j] = dr->mask[off + j] ? dy.v[off + j] * s : 0.0;
            });
        }
    }
    return loss;
}

// ---------------------------------------------------------------------
// Checkpoints: "HFNN" | u32 version | u32 desc_len | desc text |
// u64 param_count | packed f64 params in declaration order.
// ---------------------------------------------------------------------

constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(Model& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    const std::string desc = arch_to_text(model_arch(m), m.input_ch, m.input_len);
    f.write("HFNN", 4);
    const uint32_t version = kCheckpointVersion;
    const auto desc_len = static_cast<uint32_t>(desc.size());
    const uint64_t params = m.param_count();
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&desc_len), 4);
    f.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    f.write(reinterpret_cast<const char*>(&params), 8);
    for_each_param(m, [&f](std::vector<double>& w, std::vector<double>&,
                           std::vector<double>&, std::vector<double>&) {
        f.write(reinterpret_cast<const char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
    });
    if (!f) throw std::runtime_error("failed writing: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "HFNN", 4) != 0)
        throw std::runtime_error("bad checkpoint magic");
    uint32_t version = 0, desc_len = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&desc_len), 4);
    if (!f) throw std::runtime_error("truncated checkpoint");
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(version));
    std::string desc(desc_len, '\0');
    f.read(desc.data(), desc_len);
    uint64_t params = 0;
    f.read(reinterpret_cast<char*>(&params), 8);
    if (!f) throw std::runtime_error("truncated checkpoint");
    size_t in_ch = 0, in_len = 0;
    const std::vector<ArchStep> arch = arch_from_text(desc, in_ch, in_len);
    Model m = build_model(arch, in_ch, in_len);
    if (m.param_count() != params)
        throw std::runtime_error("checkpoint parameter count mismatch");
    for_each_param(m, [&f](std::vector<double>& w, std::vector<double>&,
                           std::vector<double>&, std::vector<double>&) {
        f.read(reinterpret_cast<char*>(w.data()),
               static_cast<std::streamsize>(w.size() * sizeof(double)));
    });
    if (!f) throw std::runtime_error("truncated checkpoint");
    return m;
}

}  // namespace hfsig
