#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfsig {

// Dense (batch, channels, length) tensor, row-major, double precision.
// Dense-layer outputs use length 1.
struct Tensor3 {
    size_t b = 0, c = 0, l = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(size_t B, size_t C, size_t L) { resize(B, C, L); }

    void resize(size_t B, size_t C, size_t L) {
        b = B;
        c = C;
        l = L;
        v.assign(B * C * L, 0.0);
    }

    // Reshape without clearing; for buffers the caller fully overwrites.
    void resize_noinit(size_t B, size_t C, size_t L) {
        b = B;
        c = C;
        l = L;
        v.resize(B * C * L);
    }

    size_t size() const { return v.size(); }
    size_t features() const { return c * l; }  // per-batch element count

    double* row(size_t bi, size_t ci) { return v.data() + (bi * c + ci) * l; }
    const double* row(size_t bi, size_t ci) const {
        return v.data() + (bi * c + ci) * l;
    }
    double* batch(size_t bi) { return v.data() + bi * c * l; }
    const double* batch(size_t bi) const { return v.data() + bi * c * l; }

    std::string shape_str() const {
        return "(" + std::to_string(b) + ", " + std::to_string(c) + ", " +
               std::to_string(l) + ")";
    }
};

}  // namespace hfsig
