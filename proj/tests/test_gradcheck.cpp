#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hfsig/nn.hpp"

using namespace hfsig;

namespace {

// Covers every layer kind once: conv, relu, pool, dense, dropout.
Model tiny_model() {
    Model m = build_model({{ArchStep::Kind::conv, 3, 7, 0.0},
                           {ArchStep::Kind::relu, 0, 0, 0.0},
                           {ArchStep::Kind::pool, 0, 0, 0.0},
                           {ArchStep::Kind::dense, 5, 0, 0.0},
                           {ArchStep::Kind::relu, 0, 0, 0.0},
                           {ArchStep::Kind::dropout, 0, 0, 0.5},
                           {ArchStep::Kind::dense, 3, 0, 0.0}},
                          2, 32);
    SeededRng rng(97, 0);
    he_init(m, rng);
    // Nonzero biases so their gradients are exercised away from zero.
    for_each_param(m, [](std::vector<double>& w, std::vector<double>&,
                         std::vector<double>&, std::vector<double>&) {
        if (w.size() < 8)
            for (size_t i = 0; i < w.size(); ++i)
                w[i] = 0.05 * static_cast<double>(i + 1);
    });
    m.training = true;  // dropout active; the mask is re-seeded per call
    return m;
}

double loss_of(Model& m, const Tensor3& x, const std::vector<uint16_t>& labels) {
    Workspace ws;
    SeededRng drop(1234, 0);  // identical mask on every evaluation
    zero_grads(m);
    return loss_and_backward(m, x, labels, ws, &drop);
}

}  // namespace

TEST_CASE("analytic gradients match central differences to 1e-4") {
    Model m = tiny_model();
    Tensor3 x;
    x.resize(2, 2, 32);
    SeededRng xr(98, 0);
    for (size_t i = 0; i < x.size(); ++i) x.v[i] = xr.normal();
    const std::vector<uint16_t> labels{0, 2};

    // Analytic gradients.
    (void)loss_of(m, x, labels);
    std::vector<std::vector<double>> grads;
    for_each_param(m, [&](std::vector<double>&, std::vector<double>& g,
                          std::vector<double>&, std::vector<double>&) {
        grads.push_back(g);
    });

    const double eps = 1e-5;
    size_t quad = 0, checked = 0;
    double worst = 0.0;
    for_each_param(m, [&](std::vector<double>& w, std::vector<double>&,
                          std::vector<double>&, std::vector<double>&) {
        for (size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + eps;
            const double up = loss_of(m, x, labels);
            w[i] = keep - eps;
            const double dn = loss_of(m, x, labels);
            w[i] = keep;
            const double num = (up - dn) / (2.0 * eps);
            const double ana = grads[quad][i];
            const double rel =
                std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
            worst = std::max(worst, rel);
            ++checked;
        }
        ++quad;
    });
    INFO("checked " << checked << " parameters, worst relative error " << worst);
    REQUIRE(checked == m.param_count());
    REQUIRE(worst < 1e-4);
}
