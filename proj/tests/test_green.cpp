#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "slekrho/green.hpp"
#include "slekrho/rng.hpp"

using namespace slekrho;

namespace {

struct RandomConfig {
    double kappa;
    std::vector<double> rho;
    double w;
    std::vector<double> v;
    double u;
};

// Rejection-samples an admissible (kappa, rho) with ordered geometry.
RandomConfig draw_admissible(rng::NormalStream& rnd, int max_m = 4) {
    while (true) {
        RandomConfig c;
        c.kappa = 0.5 + 9.0 * rnd.uniform();
        const int m = 1 + static_cast<int>(rnd.uniform() * max_m) % max_m;
        c.rho.resize(m);
        for (auto& r : c.rho) r = -1.5 + 4.0 * rnd.uniform();
        double sum = 0;
        bool ok = true;
        for (int j = 0; j < m - 1; ++j) {
            sum += c.rho[j];
            if (2 + sum <= 0.05) ok = false;
        }
        sum += c.rho[m - 1];
        if (sum <= std::max(-2.0, c.kappa / 2 - 4) + 0.05) ok = false;
        if (!ok) continue;
        c.w = -1 + 2 * rnd.uniform();
        c.v.resize(m);
        double x = c.w;
        for (auto& vj : c.v) {
            x -= 0.1 + rnd.uniform();
            vj = x;
        }
        c.u = x - 0.1 - 2 * rnd.uniform();
        return c;
    }
}

}  // namespace

TEST_SUITE("green") {

TEST_CASE("kappa=6 rho=0 exponents") {
    const double rho[] = {0.0};
    const auto e = green::exponents(6.0, rho);
    CHECK(e.gamma == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(e.alpha == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(e.d == doctest::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(e.alpha_j[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(e.alpha_j[1] == 0.0);
    CHECK(e.beta_sigma == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(e.hits_real_line());
}

TEST_CASE("boundary case d = 0") {
    const double rho[] = {0.5};
    const auto e = green::exponents(5.0, rho);
    CHECK(e.d == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(!e.hits_real_line());
}

TEST_CASE("inadmissible configurations throw") {
    const double rho1[] = {-3.0};  // rho_sum <= -2
    CHECK_THROWS(green::exponents(6.0, rho1));
    const double rho2[] = {-2.5, 2.0};  // sigma_1 <= 0
    CHECK_THROWS(green::exponents(6.0, rho2));
    const double rho3[] = {0.0};
    CHECK_THROWS(green::exponents(-1.0, rho3));
    // rho_sum <= kappa/2 - 4 for large kappa
    const double rho4[] = {0.5};
    CHECK_THROWS(green::exponents(10.0, rho4));
}

TEST_CASE("green1 point value") {
    const double rho[] = {0.0};
    const auto e = green::exponents(6.0, rho);
    const double v[] = {-1.0};
    CHECK(green::green1(e, 0.0, v, -2.0) ==
          doctest::Approx(std::pow(2.0, -1.0 / 3)).epsilon(1e-14));
}

TEST_CASE("exponent algebra and rewrite identity over random admissible configs") {
    rng::NormalStream rnd(2024, 0, 0);
    for (int rep = 0; rep < 200; ++rep) {
        const auto c = draw_admissible(rnd);
        const auto e = green::exponents(c.kappa, c.rho);
        double asum = 0;
        for (double aj : e.alpha_j) asum += aj;
        CHECK(std::abs(asum - e.alpha) < 1e-12);
        const double dform = (e.rho_sum + 4) * (c.kappa - 4 - 2 * e.rho_sum) / (2 * c.kappa);
        CHECK(std::abs(e.d - dform) < 1e-12);
        CHECK(std::abs(e.d - (1 - e.alpha)) < 1e-12);
        const double g1 = green::green1(e, c.w, c.v, c.u);
        const double g2 = green::green1_rewrite(e, c.w, c.v, c.u);
        CHECK(std::abs(g1 - g2) <= 1e-12 * std::max(1.0, std::abs(g1)));
    }
}

TEST_CASE("translation and scale covariance") {
    rng::NormalStream rnd(7, 0, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const auto c = draw_admissible(rnd);
        const auto e = green::exponents(c.kappa, c.rho);
        const double g = green::green1(e, c.w, c.v, c.u);
        const double shift = 3.7;
        std::vector<double> vs = c.v;
        for (auto& x : vs) x += shift;
        CHECK(green::green1(e, c.w + shift, vs, c.u + shift) ==
              doctest::Approx(g).epsilon(1e-12));
        const double a = 2.5;
        std::vector<double> va = c.v;
        for (auto& x : va) x *= a;
        CHECK(green::green1(e, a * c.w, va, a * c.u) ==
              doctest::Approx(std::pow(a, -e.alpha) * g).epsilon(1e-12));
    }
}

TEST_CASE("one-point bounds sandwich") {
    rng::NormalStream rnd(99, 0, 0);
    for (int rep = 0; rep < 200; ++rep) {
        const auto c = draw_admissible(rnd);
        const auto e = green::exponents(c.kappa, c.rho);
        const double L0 = std::abs(c.w - c.v.back());
        const double L1 = std::abs(c.v.back() - c.u);
        const double r = L1 * std::pow(10, -3 * rnd.uniform());
        const double gr = green::green1(e, c.w, c.v, c.u) * std::pow(r, e.alpha);
        const double lo = std::pow(L1 / (L0 + L1), e.alpha_upper) * std::pow(r / L1, e.alpha);
        const double hi = std::pow(L1 / (L0 + L1), e.alpha_star) * std::pow(r / L1, e.alpha);
        CHECK(gr >= lo * (1 - 1e-12));
        CHECK(gr <= hi * (1 + 1e-12));
        CHECK(hi <= std::pow(r / L1, e.alpha) * (1 + 1e-12));
    }
}

TEST_CASE("green2 bounds bracket and example") {
    const double rho[] = {0.0};
    const auto e = green::exponents(6.0, rho);
    const double v[] = {-1.0};
    const auto [lo, hi] = green::green2_bounds(e, 0.0, v, -2.0, -3.0);
    CHECK(lo == doctest::Approx(std::pow(2.0, -1.0 / 3)).epsilon(1e-12));
    CHECK(lo <= hi);
    CHECK_THROWS(green::green2_bounds(e, 0.0, v, -3.0, -2.0));

    rng::NormalStream rnd(55, 0, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const auto c = draw_admissible(rnd);
        const auto ee = green::exponents(c.kappa, c.rho);
        const double u2 = c.u - 0.1 - rnd.uniform();
        const auto [l2, h2] = green::green2_bounds(ee, c.w, c.v, c.u, u2);
        CHECK(l2 <= h2 * (1 + 1e-12));
    }
}

TEST_CASE("green1 ordering errors") {
    const double rho[] = {0.0, 0.0};
    const auto e = green::exponents(6.0, rho);
    const double bad[] = {-2.0, -1.0};  // v_1 < v_2 violates ordering
    CHECK_THROWS(green::green1(e, 0.0, bad, -3.0));
    const double v[] = {-1.0, -2.0};
    CHECK_THROWS(green::green1(e, 0.0, v, -1.5));  // u >= v_m
}

TEST_CASE("integrate_green1 matches closed form for m=1 rho=0") {
    const double rho[] = {0.0};
    const auto e = green::exponents(6.0, rho);  // alpha_0 = 1/3, alpha_1 = 0
    const double v[] = {-1.0};
    const std::pair<double, double> s[] = {{-3.0, -1.5}};
    const auto grid = green::build_quad_grid(s, -1.0, 512);
    const double got = green::integrate_green1(e, 0.0, v, grid, 1.0);
    // int_{-3}^{-1.5} |u|^{-1/3} du = (3/2)(3^{2/3} - 1.5^{2/3})
    const double exact = 1.5 * (std::pow(3.0, 2.0 / 3) - std::pow(1.5, 2.0 / 3));
    CHECK(got == doctest::Approx(exact).epsilon(1e-6));
}

}  // TEST_SUITE
