#include <cmath>
#include <vector>

#include "doctest.h"
#include "slekrho/diffusion.hpp"
#include "slekrho/rng.hpp"

using namespace slekrho;
using diffusion::BoundaryCase;
using diffusion::DiffusionSpec;

namespace {

// Independent oracle: finite hypergeometric sum
// P_n^{(a,b)}(x) = Gamma(a+n+1)/(n! Gamma(n+a+b+1)) *
//                  sum_m C(n,m) Gamma(a+b+n+m+1)/Gamma(a+m+1) ((x-1)/2)^m
long double jacobi_sum_oracle(int n, long double a, long double b, long double x) {
    long double total = 0;
    for (int m = 0; m <= n; ++m) {
        long double lbinom = lgammal(n + 1.0L) - lgammal(m + 1.0L) -
                             lgammal(n - m + 1.0L);
        long double lterm = lbinom + lgammal(a + b + n + m + 1) -
                            lgammal(a + m + 1);
        total += expl(lterm) * powl((x - 1) / 2, m);
    }
    return expl(lgammal(a + n + 1) - lgammal(n + 1.0L) -
                     lgammal(a + b + n + 1)) *
           total;
}

double integrate(const diffusion::Quadrature& q, auto&& fn) {
    double s = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * fn(q.x[i]);
    return s;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("P_0 is identically 1") {
    CHECK(diffusion::jacobi_poly(0, 0.3, -0.2, 0.7) == 1.0);
    CHECK(diffusion::jacobi_poly(0, 2.0, 1.0, -1.0) == 1.0);
}

TEST_CASE("value at x = 1") {
    for (int n : {1, 2, 5, 9}) {
        const double a = 0.7, b = -0.3;
        const double expect =
            std::exp(std::lgamma(a + n + 1) - std::lgamma(n + 1.0) - std::lgamma(a + 1));
        CHECK(diffusion::jacobi_poly(n, a, b, 1.0) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("recurrence matches hypergeometric sum oracle") {
    CHECK(diffusion::jacobi_poly(3, 0.5, -0.25, 0.3) ==
          doctest::Approx(static_cast<double>(jacobi_sum_oracle(3, 0.5L, -0.25L, 0.3L)))
              .epsilon(1e-12));
    rng::NormalStream rnd(5, 0, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 1 + static_cast<int>(rnd.uniform() * 8);
        const double a = -0.9 + 3.0 * rnd.uniform();
        const double b = -0.9 + 3.0 * rnd.uniform();
        const double x = -1 + 2 * rnd.uniform();
        const double got = diffusion::jacobi_poly(n, a, b, x);
        const double want = static_cast<double>(jacobi_sum_oracle(n, a, b, x));
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("norms: trivial values and quadrature oracle") {
    CHECK(diffusion::jacobi_norm(0, 0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(diffusion::jacobi_norm(0, 1, 0) == doctest::Approx(2.0).epsilon(1e-14));
    // n=2, a=b=0.5 against Gauss-Legendre; s = sin(theta) regularizes the
    // endpoint square roots so the oracle itself converges to 1e-10
    const auto q = diffusion::gauss_legendre(200);
    const double want = integrate(q, [](double th) {
        const double s = std::sin(th * M_PI / 2);
        const double p2 = diffusion::jacobi_poly(2, 0.5, 0.5, s);
        const double c = std::cos(th * M_PI / 2);
        return (M_PI / 2) * c * c * p2 * p2;
    });
    CHECK(diffusion::jacobi_norm(2, 0.5, 0.5) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("orthogonality via gauss-jacobi") {
    rng::NormalStream rnd(11, 0, 0);
    for (int rep = 0; rep < 8; ++rep) {
        const double a = -0.9 + 3.0 * rnd.uniform();
        const double b = -0.9 + 3.0 * rnd.uniform();
        const auto q = diffusion::gauss_jacobi(64, a, b);
        for (int n = 0; n <= 10; ++n) {
            for (int m = n; m <= 10; ++m) {
                const double val = integrate(q, [&](double s) {
                    return diffusion::jacobi_poly(n, a, b, s) *
                           diffusion::jacobi_poly(m, a, b, s);
                });
                if (n == m)
                    CHECK(val == doctest::Approx(diffusion::jacobi_norm(n, a, b)).epsilon(1e-8));
                else
                    CHECK(std::abs(val) < 1e-8 * diffusion::jacobi_norm(n, a, b));
            }
        }
    }
}

TEST_CASE("sup-norm bound holds") {
    rng::NormalStream rnd(13, 0, 0);
    for (int n = 0; n <= 20; ++n) {
        const double a = -0.9 + 3.0 * rnd.uniform();
        const double b = -0.9 + 3.0 * rnd.uniform();
        const double bound = diffusion::jacobi_sup_bound(n, a, b);
        for (int k = 0; k < 50; ++k) {
            const double x = -1 + 2 * rnd.uniform();
            CHECK(std::abs(diffusion::jacobi_poly(n, a, b, x)) <= bound * (1 + 1e-12));
        }
    }
}

TEST_CASE("case parameter rules") {
    const auto s3 = DiffusionSpec::make(BoundaryCase::AbsorbLeft, 4.0, 0.0);
    CHECK(s3.alpha_plus == doctest::Approx(1.0));
    CHECK(s3.alpha_minus == doctest::Approx(1.0));
    CHECK(s3.beta(0) == doctest::Approx(1.0));

    const auto s1 = DiffusionSpec::make(BoundaryCase::Conservative, 2.0, 2.0);
    CHECK(s1.alpha_plus == 0.0);
    CHECK(s1.alpha_minus == 0.0);
    CHECK(s1.beta(0) == 0.0);

    CHECK_THROWS(DiffusionSpec::make(BoundaryCase::Conservative, -1.0, 2.0));
    CHECK_THROWS(DiffusionSpec::make(BoundaryCase::AbsorbBoth, 2.5, 1.0));
    CHECK_THROWS(DiffusionSpec::make(BoundaryCase::AbsorbLeft, 4.0, 2.5));
}

TEST_CASE("conservative case preserves mass") {
    const auto spec = DiffusionSpec::make(BoundaryCase::Conservative, 2.0, 2.0);
    const auto q = diffusion::gauss_legendre(128);
    for (double x : {-0.6, 0.0, 0.8}) {
        const double mass = integrate(q, [&](double y) {
            return diffusion::transition_density(spec, 0.5, x, y).value;
        });
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("detailed-balance symmetry h(x)p(x,y) = h(y)p(y,x)") {
    for (const auto& spec :
         {DiffusionSpec::make(BoundaryCase::Conservative, 3.0, 2.5),
          DiffusionSpec::make(BoundaryCase::AbsorbBoth, 1.2, 0.7),
          DiffusionSpec::make(BoundaryCase::AbsorbLeft, 4.0, 0.5)}) {
        for (double x : {-0.5, 0.2}) {
            for (double y : {-0.1, 0.6}) {
                const double lhs = spec.h(x) * diffusion::transition_density(spec, 0.8, x, y).value;
                const double rhs = spec.h(y) * diffusion::transition_density(spec, 0.8, y, x).value;
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("chapman-kolmogorov via matched quadrature") {
    const auto spec = DiffusionSpec::make(BoundaryCase::AbsorbLeft, 4.0, 0.5);
    const auto q = diffusion::gauss_jacobi(128, spec.alpha_plus, spec.alpha_minus);
    const double s = 0.3, t = 0.7, x = 0.15, y = -0.4;
    // p_s(x,z) p_t(z,y) carries g(z) f(z) = jacobi weight; integrate the rest.
    double conv = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
        const double z = q.x[i];
        const double ps = diffusion::transition_density(spec, s, x, z).value;
        const double pt = diffusion::transition_density(spec, t, z, y).value;
        const double wz = std::pow(1 - z, spec.alpha_plus) * std::pow(1 + z, spec.alpha_minus);
        conv += q.w[i] * ps * pt / wz;
    }
    const double direct = diffusion::transition_density(spec, s + t, x, y).value;
    CHECK(conv == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("mass is nonincreasing in t for absorbing cases") {
    for (const auto& spec : {DiffusionSpec::make(BoundaryCase::AbsorbBoth, 1.0, 0.5),
                             DiffusionSpec::make(BoundaryCase::AbsorbLeft, 3.0, 1.0)}) {
        const auto q = diffusion::gauss_jacobi(128, 0.0, 0.0);
        double prev = 2.0;
        for (double t : {0.2, 0.5, 1.0, 2.0}) {
            const double mass = integrate(q, [&](double y) {
                return diffusion::transition_density(spec, t, 0.1, y).value;
            });
            CHECK(mass <= prev + 1e-9);
            prev = mass;
        }
    }
}

TEST_CASE("density nonnegative up to tail bound") {
    const auto spec = DiffusionSpec::make(BoundaryCase::AbsorbBoth, 1.3, 0.4);
    rng::NormalStream rnd(3, 0, 0);
    for (int rep = 0; rep < 200; ++rep) {
        const double x = -0.99 + 1.98 * rnd.uniform();
        const double y = -0.99 + 1.98 * rnd.uniform();
        const auto ev = diffusion::transition_density(spec, 0.1 + rnd.uniform(), x, y, 60);
        CHECK(ev.value >= -ev.tail_bound);
    }
}

TEST_CASE("quasi-invariant density decays at rate beta0") {
    const auto spec = DiffusionSpec::make(BoundaryCase::AbsorbLeft, 4.0, 0.0);
    const auto qi = diffusion::quasi_invariant(spec);
    CHECK(qi.beta0 == doctest::Approx(1.0));
    // int p_inf(x) p_t(x,y) dx = p_inf(y) e^{-beta0 t}. The integrand carries
    // f(x)g(x) = jacobi weight, so divide it out and use matched nodes.
    const auto q = diffusion::gauss_jacobi(128, spec.alpha_plus, spec.alpha_minus);
    const double t = 0.7, y = 0.3;
    double val = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
        const double x = q.x[i];
        const double wx = std::pow(1 - x, spec.alpha_plus) * std::pow(1 + x, spec.alpha_minus);
        const double integrand = qi.p_inf(x) * diffusion::transition_density(spec, t, x, y).value;
        val += q.w[i] * integrand / wx;
    }
    const double want = qi.p_inf(y) * std::exp(-qi.beta0 * t);
    CHECK(val == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("conservative simulation never dies") {
    const auto spec = DiffusionSpec::make(BoundaryCase::Conservative, 3.0, 2.5);
    for (int p = 0; p < 20; ++p) {
        rng::NormalStream noise(77, 1, p);
        const auto r = diffusion::simulate_Z(spec, 0.2, 1e-3, 1.0, noise);
        CHECK(r.absorbed == 0);
        CHECK(r.lifetime == doctest::Approx(1.0));
    }
}

TEST_CASE("simulated histogram roughly matches density (smoke)") {
    const auto spec = DiffusionSpec::make(BoundaryCase::Conservative, 3.0, 2.5);
    const int n = 4000, bins = 20;
    std::vector<double> counts(bins, 0.0);
    for (int p = 0; p < n; ++p) {
        rng::NormalStream noise(99, 2, p);
        const auto r = diffusion::simulate_Z(spec, 0.2, 1e-3, 1.0, noise);
        const int b = std::min(bins - 1, static_cast<int>((r.z_end + 1) / 2 * bins));
        counts[b] += 1.0 / n;
    }
    const auto q = diffusion::gauss_legendre(64);
    double l1 = 0;
    for (int b = 0; b < bins; ++b) {
        const double lo = -1 + 2.0 * b / bins, hi = lo + 2.0 / bins;
        double mass = 0;
        for (std::size_t i = 0; i < q.x.size(); ++i) {
            const double y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * q.x[i];
            mass += 0.5 * (hi - lo) * q.w[i] *
                    diffusion::transition_density(spec, 1.0, 0.2, y).value;
        }
        l1 += std::abs(counts[b] - mass);
    }
    CHECK(l1 < 0.15);
}

TEST_CASE("coupled domination") {
    const double dp = 3.0, dm = 3.0;
    SUBCASE("equality case gives identical paths") {
        const auto rep = diffusion::coupled_domination(
            dp, dm, 0.5, 0.5, [&](double, double xt) { return 0.25 * dp * xt; }, 1e-3,
            1.0, 200, 42);
        CHECK(rep.violations == 0);
        CHECK(rep.max_excess <= 1e-12);
    }
    SUBCASE("zero drift dominates") {
        const auto rep = diffusion::coupled_domination(
            dp, dm, 0.5, 0.5, [](double, double) { return 0.0; }, 1e-3, 1.0, 200, 43);
        CHECK(rep.violations == 0);
    }
    SUBCASE("strict initial gap") {
        const auto rep = diffusion::coupled_domination(
            dp, dm, 0.2, 0.8, [](double, double) { return 0.0; }, 1e-3, 1.0, 200, 44);
        CHECK(rep.violations == 0);
    }
    SUBCASE("invalid drift rejected") {
        CHECK_THROWS(diffusion::coupled_domination(
            dp, dm, 0.5, 0.5, [&](double, double xt) { return dp * xt; }, 1e-3, 0.1, 1, 1));
    }
    SUBCASE("delta below 2 rejected") {
        CHECK_THROWS(diffusion::coupled_domination(
            1.5, 3.0, 0.5, 0.5, [](double, double) { return 0.0; }, 1e-3, 0.1, 1, 1));
    }
}

}  // TEST_SUITE
