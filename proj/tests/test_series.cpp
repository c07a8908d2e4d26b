#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hts/errors.hpp"
#include "hts/sarima.hpp"
#include "hts/series.hpp"
#include "test_support.hpp"

using namespace hts;

TEST_CASE("box_cox known values") {
    const double e = std::numbers::e;
    auto z = box_cox(TimeSeries({1.0, e, e * e}), {0.0});
    CHECK(z[0] == doctest::Approx(0.0));
    CHECK(z[1] == doctest::Approx(1.0));
    CHECK(z[2] == doctest::Approx(2.0));

    z = box_cox(TimeSeries({3.0, 5.0}), {1.0});
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(4.0));

    CHECK(box_cox(TimeSeries({4.0}), {0.5})[0] == doctest::Approx(2.0));
}

TEST_CASE("box_cox keeps period and start") {
    const TimeSeries y({1.0, 2.0, 3.0}, 52, "2016-12-11");
    const auto z = box_cox(y, {0.3});
    CHECK(z.period() == 52);
    CHECK(z.start() == "2016-12-11");
}

TEST_CASE("box_cox rejects non-positive input") {
    try {
        (void)box_cox(TimeSeries({1.0, 0.0}), {0.5});
        FAIL("expected NonPositiveValue");
    } catch (const Error& err) {
        CHECK(err.code() == "NonPositiveValue");
        CHECK(err.category() == ErrorCategory::Data);
    }
    CHECK_THROWS_AS((void)box_cox(TimeSeries({-2.0}), {0.0}), Error);
}

TEST_CASE("inv_box_cox known values and domain") {
    const auto y = inv_box_cox(TimeSeries({0.0, 1.0}), {0.0});
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(std::numbers::e));
    CHECK(inv_box_cox(TimeSeries({2.0}), {1.0})[0] == doctest::Approx(3.0));
    try {
        (void)inv_box_cox(TimeSeries({-3.0}), {0.5});
        FAIL("expected DomainViolation");
    } catch (const Error& err) {
        CHECK(err.code() == "DomainViolation");
    }
}

TEST_CASE("box_cox round trip") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 500.0);
    std::vector<double> v(100);
    for (auto& x : v) x = u(rng);
    const TimeSeries y(v);
    for (double lambda : {-0.5, 0.0, 0.5, 1.0}) {
        const auto back = inv_box_cox(box_cox(y, {lambda}), {lambda});
        double worst = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(back[i] - v[i]) / v[i]);
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("select_lambda degenerate and simulated cases") {
    test::QuietWarnings quiet;
    CHECK(select_lambda(TimeSeries(std::vector<double>(60, 5.0), 12)).lambda == 1.0);

    int log_like = 0, flat = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        // exp of a Gaussian random walk: multiplicative noise.
        auto steps = test::white_noise(300, seed, 0.0, 0.05);
        std::vector<double> walk(300);
        double acc = 0.0;
        for (std::size_t t = 0; t < 300; ++t) {
            acc += steps[t];
            walk[t] = std::exp(3.0 + acc);
        }
        const double lam = select_lambda(TimeSeries(walk)).lambda;
        if (lam >= -0.3 - 1e-12 && lam <= 0.3 + 1e-12) ++log_like;

        const double lw = select_lambda(TimeSeries(test::white_noise(300, seed + 100, 100.0, 1.0))).lambda;
        if (lw >= 0.5 - 1e-12 && lw <= 1.5 + 1e-12) ++flat;
    }
    MESSAGE("random walk in [-0.3, 0.3]: " << log_like << "/100; white noise in [0.5, 1.5]: " << flat << "/100");
    // Block statistics are noisy; the bands must hold for a clear majority.
    CHECK(log_like >= 75);
    CHECK(flat >= 85);
}

TEST_CASE("select_lambda stays on the grid") {
    const auto y = test::white_noise(120, 3, 50.0, 5.0);
    const double lam = select_lambda(TimeSeries(y, 12)).lambda;
    CHECK(lam >= -1.0);
    CHECK(lam <= 2.0);
    CHECK(std::abs(lam * 10.0 - std::round(lam * 10.0)) < 1e-12);
}

TEST_CASE("difference known values") {
    auto d = difference(TimeSeries({1.0, 2.0, 4.0}), 1, 1);
    CHECK(d.series.data() == std::vector<double>{1.0, 2.0});
    CHECK(d.spec.initial_values == std::vector<double>{1.0});

    d = difference(TimeSeries({1.0, 2.0, 3.0, 5.0}), 2, 1);
    CHECK(d.series.data() == std::vector<double>{2.0, 3.0});

    std::vector<double> seasonal(52 * 3);
    const auto pattern = test::white_noise(52, 11);
    for (std::size_t t = 0; t < seasonal.size(); ++t) seasonal[t] = pattern[t % 52];
    d = difference(TimeSeries(seasonal, 52), 52, 1);
    CHECK(d.series.size() == 104);
    for (double v : d.series.data()) CHECK(v == 0.0);
}

TEST_CASE("difference rejects too-short input") {
    CHECK_THROWS_AS((void)difference(TimeSeries({1.0, 2.0}), 2, 1), Error);
    CHECK_THROWS_AS((void)difference(TimeSeries({1.0, 2.0, 3.0}), 0, 1), Error);
}

TEST_CASE("integrate known values") {
    auto y = integrate(TimeSeries({1.0, 2.0}), {1, 1, {1.0}});
    CHECK(y.data() == std::vector<double>{1.0, 2.0, 4.0});

    const std::vector<double> init{3.0, 1.0, 4.0, 1.0};
    y = integrate(TimeSeries(std::vector<double>(8, 0.0)), {4, 1, init});
    REQUIRE(y.size() == 12);
    for (std::size_t t = 0; t < 12; ++t) CHECK(y[t] == init[t % 4]);

    try {
        (void)integrate(TimeSeries({1.0}), {1, 1, {}});
        FAIL("expected SpecMismatch");
    } catch (const Error& err) {
        CHECK(err.code() == "SpecMismatch");
    }
}

TEST_CASE("difference / integrate round trip is exact on integer data") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> u(-1000, 1000);
    std::uniform_int_distribution<int> lag_d(1, 13), order_d(0, 2);
    for (int rep = 0; rep < 50; ++rep) {
        const int lag = lag_d(rng), order = order_d(rng);
        std::vector<double> v(static_cast<std::size_t>(lag * order + 20));
        for (auto& x : v) x = u(rng);
        const TimeSeries y(v);
        const auto d = difference(y, lag, order);
        CHECK(integrate(d.series, d.spec).data() == v);
    }
}

TEST_CASE("difference / integrate round trip on real data") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        const auto v = test::white_noise(80, 1000 + static_cast<std::uint64_t>(rep), 10.0, 3.0);
        const auto d = difference(TimeSeries(v), 1 + rep % 12, 1 + rep % 2);
        const auto back = integrate(d.series, d.spec);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == doctest::Approx(v[i]).epsilon(1e-12));
    }
}

TEST_CASE("differencing_polynomial") {
    CHECK(differencing_polynomial(1, 1) == std::vector<double>{1.0});
    CHECK(differencing_polynomial(1, 2) == std::vector<double>{2.0, -1.0});
    CHECK(differencing_polynomial(2, 1) == std::vector<double>{0.0, 1.0});
    CHECK(differencing_polynomial(3, 0).empty());
}

TEST_CASE("acf basics") {
    const auto y = test::white_noise(50, 2);
    CHECK(acf(y, 5)[0] == 1.0);

    std::vector<double> alt(400);
    for (std::size_t t = 0; t < alt.size(); ++t) alt[t] = t % 2 == 0 ? 1.0 : -1.0;
    CHECK(acf(alt, 1)[1] == doctest::Approx(-1.0).epsilon(0.01));

    const auto flat = acf(std::vector<double>(10, 3.0), 3);
    CHECK(flat == std::vector<double>{1.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS((void)acf(y, 50), Error);
}

TEST_CASE("acf of a simulated MA(1) matches theta/(1+theta^2)") {
    const double theta = 0.6;
    SarimaCoefficients c;
    c.theta = {theta};
    const auto y = simulate({0, 0, 1, 0, 0, 0, 1}, c, 20000, 2024);
    const double expected = theta / (1.0 + theta * theta);
    CHECK(expected == doctest::Approx(0.4412).epsilon(1e-4));
    CHECK(std::abs(acf(y.values(), 1)[1] - expected) <= 0.02);
}

TEST_CASE("pacf cuts off after the AR order") {
    SarimaCoefficients c;
    c.phi = {0.7};
    const auto y = simulate({1, 0, 0, 0, 0, 0, 1}, c, 20000, 77);
    const auto p = pacf(y.values(), 4);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == doctest::Approx(0.7).epsilon(0.05));
    for (std::size_t k = 2; k <= 4; ++k) CHECK(std::abs(p[k]) < 0.03);
}

TEST_CASE("durbin_levinson reproduces AR(2) partial autocorrelations") {
    // AR(2) with phi = (0.5, 0.3): r1 = phi1/(1-phi2), r2 = phi1 r1 + phi2.
    const double r1 = 0.5 / 0.7;
    const double r2 = 0.5 * r1 + 0.3;
    const double r3 = 0.5 * r2 + 0.3 * r1;
    const std::vector<double> r{1.0, r1, r2, r3};
    const auto p = durbin_levinson(r);
    CHECK(p[1] == doctest::Approx(r1));
    CHECK(p[2] == doctest::Approx(0.3));
    CHECK(p[3] == doctest::Approx(0.0));
}

TEST_CASE("TimeSeries slicing and validation") {
    const TimeSeries y({1, 2, 3, 4, 5}, 2, "w0");
    const auto s = y.slice(1, 3);
    CHECK(s.data() == std::vector<double>{2, 3, 4});
    CHECK(s.period() == 2);
    CHECK_THROWS_AS((void)y.slice(3, 5), Error);
    CHECK_THROWS_AS(TimeSeries({1.0}, 0), Error);
}

TEST_CASE("mean and stddev") {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(mean(v) == doctest::Approx(5.0));
    CHECK(stddev(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}
