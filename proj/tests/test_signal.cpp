#include <catch2/catch_amalgamated.hpp>

#include "hfsig/signal.hpp"
#include "test_util.hpp"

using namespace hfsig;

TEST_CASE("measure_power basics") {
    IqSignal s = tu::tone(4000.0, 100.0, 4096, 1.0);
    REQUIRE(std::abs(measure_power(s) - 1.0) < 1e-12);

    IqSignal half = tu::tone(4000.0, 100.0, 4096, 0.5);
    REQUIRE(std::abs(measure_power(half) - 0.25) < 1e-12);

    IqSignal z;
    z.sample_rate_hz = 4000.0;
    REQUIRE_THROWS_WITH(measure_power(z), Catch::Matchers::ContainsSubstring("empty"));
}

TEST_CASE("windowed power overload") {
    IqSignal s;
    s.sample_rate_hz = 4000.0;
    s.samples.assign(10, cplx{0.0, 0.0});
    s.samples[3] = cplx{2.0, 0.0};
    REQUIRE(std::abs(measure_power(s.samples, 3, 1) - 4.0) < 1e-12);
    REQUIRE(std::abs(measure_power(s.samples, 0, 10) - 0.4) < 1e-12);
}

TEST_CASE("normalize_power hits the target and is idempotent") {
    IqSignal s = normalize_power(tu::tone(4000.0, 50.0, 2048, 3.7));
    REQUIRE(std::abs(measure_power(s) - 1.0) < 1e-12);
    const IqSignal again = normalize_power(s);
    for (size_t i = 0; i < s.samples.size(); ++i) {
        REQUIRE(std::abs(again.samples[i].real() - s.samples[i].real()) < 1e-12);
        REQUIRE(std::abs(again.samples[i].imag() - s.samples[i].imag()) < 1e-12);
    }

    IqSignal z;
    z.sample_rate_hz = 4000.0;
    z.samples.assign(64, cplx{0.0, 0.0});
    REQUIRE_THROWS_WITH(normalize_power(z), Catch::Matchers::ContainsSubstring("silent"));
}

TEST_CASE("crop keeps rate and slices exactly") {
    IqSignal s = tu::tone(12000.0, 10.0, 100);
    IqSignal c = crop(s, 10, 20);
    REQUIRE(c.samples.size() == 20);
    REQUIRE(c.sample_rate_hz == 12000.0);
    REQUIRE(c.samples[0] == s.samples[10]);
    REQUIRE(c.samples[19] == s.samples[29]);
}

TEST_CASE("all_finite flags bad samples") {
    IqSignal s = tu::tone(4000.0, 1.0, 16);
    REQUIRE(all_finite(s));
    s.samples[7] = cplx{std::nan(""), 0.0};
    REQUIRE_FALSE(all_finite(s));
}
