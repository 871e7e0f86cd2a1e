#include "slekrho/diffusion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slekrho::diffusion {

double jacobi_poly(int n, double a, double b, double x) {
    if (n < 0) throw std::invalid_argument("jacobi_poly: n must be >= 0");
    if (!(a > -1.0) || !(b > -1.0))
        throw std::invalid_argument("jacobi_poly: indices must be > -1");
    if (n == 0) return 1.0;
    double pm1 = 1.0;
    double p = 0.5 * (a + b + 2) * x + 0.5 * (a - b);
    for (int k = 2; k <= n; ++k) {
        const double s = 2.0 * k + a + b;
        const double c1 = 2.0 * k * (k + a + b) * (s - 2);
        const double c2 = (s - 1) * (s * (s - 2) * x + a * a - b * b);
        const double c3 = 2.0 * (k + a - 1) * (k + b - 1) * s;
        const double next = (c2 * p - c3 * pm1) / c1;
        pm1 = p;
        p = next;
    }
    return p;
}

double jacobi_norm(int n, double a, double b) {
    if (n < 0) throw std::invalid_argument("jacobi_norm: n must be >= 0");
    if (!(a > -1.0) || !(b > -1.0))
        throw std::invalid_argument("jacobi_norm: indices must be > -1");
    if (n == 0) {
        // 2^{a+b+1} Gamma(a+1)Gamma(b+1)/Gamma(a+b+2); all arguments positive.
        return std::exp((a + b + 1) * std::log(2.0) + std::lgamma(a + 1) +
                        std::lgamma(b + 1) - std::lgamma(a + b + 2));
    }
    return std::exp((a + b + 1) * std::log(2.0) + std::lgamma(n + a + 1) +
                    std::lgamma(n + b + 1) - std::lgamma(n + 1.0) -
                    std::log(2.0 * n + a + b + 1) - std::lgamma(n + a + b + 1));
}

double jacobi_sup_bound(int n, double a, double b) {
    if (n == 0) return 1.0;
    const double m = std::max(a, b);
    const double t1 = std::exp(std::lgamma(a + n + 1) - std::lgamma(n + 1.0) -
                               std::lgamma(a + 1));
    const double t2 = n * (n + a + b + 1) *
                      std::exp(std::lgamma(m + n + 1) - std::lgamma(n + 1.0) -
                               std::lgamma(m + 2));
    return std::abs(t1) + std::abs(t2);
}

Quadrature gauss_jacobi(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_jacobi: n must be >= 1");
    if (!(a > -1.0) || !(b > -1.0))
        throw std::invalid_argument("gauss_jacobi: indices must be > -1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    J(0, 0) = (b - a) / (a + b + 2);
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        J(k, k) = (b * b - a * a) / (s * (s + 2));
        double beta_k;
        if (k == 1) {
            beta_k = 4.0 * (1 + a) * (1 + b) / ((2 + a + b) * (2 + a + b) * (3 + a + b));
        } else {
            beta_k = 4.0 * k * (k + a) * (k + b) * (k + a + b) /
                     (s * s * (s + 1) * (s - 1));
        }
        const double e = std::sqrt(beta_k);
        J(k, k - 1) = e;
        J(k - 1, k) = e;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::exp((a + b + 1) * std::log(2.0) + std::lgamma(a + 1) +
                                std::lgamma(b + 1) - std::lgamma(a + b + 2));
    Quadrature q;
    q.x.resize(n);
    q.w.resize(n);
    for (int i = 0; i < n; ++i) {
        q.x[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        q.w[i] = mu0 * v0 * v0;
    }
    return q;
}

double DiffusionSpec::beta(int n) const {
    switch (kind) {
        case BoundaryCase::Conservative:
            return 0.5 * n * (n + 1 + alpha_plus + alpha_minus);
        case BoundaryCase::AbsorbBoth:
            return 0.5 * (n + 1) * (n + alpha_plus + alpha_minus);
        case BoundaryCase::AbsorbLeft:
            return 0.5 * (n + 1 + alpha_plus) * (n + alpha_minus);
        case BoundaryCase::AbsorbRight:
            return 0.5 * (n + 1 + alpha_minus) * (n + alpha_plus);
    }
    return 0;
}

namespace {
// Endpoint offset for singular powers (densities may blow up at +-1).
double clamp_endpoint(double x) {
    return std::clamp(x, -1.0 + 1e-10, 1.0 - 1e-10);
}
double two_power(double x, double ep, double em) {
    if (ep == 0 && em == 0) return 1.0;
    const double xc = clamp_endpoint(x);
    return std::pow(1 - xc, ep) * std::pow(1 + xc, em);
}
}  // namespace

double DiffusionSpec::f(double x) const { return two_power(x, f_plus, f_minus); }
double DiffusionSpec::g(double y) const { return two_power(y, g_plus, g_minus); }
double DiffusionSpec::h(double x) const {
    return two_power(x, delta_plus / 2 - 1, delta_minus / 2 - 1);
}

DiffusionSpec DiffusionSpec::make(BoundaryCase kind, double dp, double dm) {
    DiffusionSpec s;
    s.kind = kind;
    s.delta_plus = dp;
    s.delta_minus = dm;
    switch (kind) {
        case BoundaryCase::Conservative:
            if (!(dp > 0 && dm > 0))
                throw std::invalid_argument("case (i) requires delta_+ > 0 and delta_- > 0");
            s.alpha_plus = dp / 2 - 1;
            s.alpha_minus = dm / 2 - 1;
            s.f_plus = s.f_minus = 0;
            s.g_plus = s.alpha_plus;
            s.g_minus = s.alpha_minus;
            break;
        case BoundaryCase::AbsorbBoth:
            if (!(dp < 2 && dm < 2))
                throw std::invalid_argument("case (ii) requires delta_+ < 2 and delta_- < 2");
            s.alpha_plus = 1 - dp / 2;
            s.alpha_minus = 1 - dm / 2;
            s.f_plus = s.alpha_plus;
            s.f_minus = s.alpha_minus;
            s.g_plus = s.g_minus = 0;
            break;
        case BoundaryCase::AbsorbLeft:
            if (!(dp > 0 && dm < 2))
                throw std::invalid_argument("case (iii) requires delta_+ > 0 and delta_- < 2");
            s.alpha_plus = dp / 2 - 1;
            s.alpha_minus = 1 - dm / 2;
            s.f_plus = 0;
            s.f_minus = s.alpha_minus;
            s.g_plus = s.alpha_plus;
            s.g_minus = 0;
            break;
        case BoundaryCase::AbsorbRight:
            if (!(dm > 0 && dp < 2))
                throw std::invalid_argument("case (iv) requires delta_- > 0 and delta_+ < 2");
            s.alpha_plus = 1 - dp / 2;
            s.alpha_minus = dm / 2 - 1;
            s.f_plus = s.alpha_plus;
            s.f_minus = 0;
            s.g_plus = 0;
            s.g_minus = s.alpha_minus;
            break;
    }
    return s;
}

DensityEvaluation transition_density(const DiffusionSpec& spec, double t, double x,
                                     double y, int max_terms, double tail_tol) {
    if (!(t > 0)) throw std::invalid_argument("transition_density: t must be > 0");
    DensityEvaluation ev;
    ev.t = t;
    ev.x = x;
    ev.y = y;
    const double a = spec.alpha_plus, b = spec.alpha_minus;
    const double fg = spec.f(x) * spec.g(y);
    const int cap = max_terms >= 0 ? max_terms : 4096;

    auto term_bound = [&](int k) {
        const double sb = jacobi_sup_bound(k, a, b);
        return sb * sb / jacobi_norm(k, a, b) * std::exp(-spec.beta(k) * t);
    };

    double sum = 0;
    int n = 0;
    double tail = 0;
    while (true) {
        sum += jacobi_poly(n, a, b, x) * jacobi_poly(n, a, b, y) /
               jacobi_norm(n, a, b) * std::exp(-spec.beta(n) * t);
        const double b1 = term_bound(n + 1);
        const double q = std::min(term_bound(n + 2) / std::max(b1, 1e-300), 0.95);
        // once the bound sequence decays geometrically the tail sums below this
        tail = fg * b1 / (1 - q);
        if (max_terms >= 0 ? n == cap : ((tail < tail_tol && n >= 2) || n >= cap))
            break;
        ++n;
    }
    ev.truncation = n;
    ev.value = fg * sum;
    ev.tail_bound = tail;
    ev.converged = tail <= std::max(tail_tol, 1e-8);
    return ev;
}

double QuasiInvariant::p_inf(double x) const {
    if (x < -1 || x > 1) return 0.0;
    return spec.g(x) / Z;
}

QuasiInvariant quasi_invariant(const DiffusionSpec& spec) {
    QuasiInvariant qi;
    qi.spec = spec;
    // int (1-x)^gp (1+x)^gm dx = 2^{gp+gm+1} B(gp+1, gm+1)
    qi.Z = std::exp((spec.g_plus + spec.g_minus + 1) * std::log(2.0) +
                    std::lgamma(spec.g_plus + 1) + std::lgamma(spec.g_minus + 1) -
                    std::lgamma(spec.g_plus + spec.g_minus + 2));
    qi.beta0 = spec.beta(0);
    return qi;
}

ZResult simulate_Z(const DiffusionSpec& spec, double z0, double dt, double horizon,
                   rng::NormalStream& noise) {
    const bool absorb_left = spec.kind == BoundaryCase::AbsorbBoth ||
                             spec.kind == BoundaryCase::AbsorbLeft;
    const bool absorb_right = spec.kind == BoundaryCase::AbsorbBoth ||
                              spec.kind == BoundaryCase::AbsorbRight;
    const double wall = std::sqrt(dt);  // absorption band at the killed ends
    const double sdt = std::sqrt(dt);
    double z = z0;
    double t = 0;
    while (t < horizon) {
        const double diff = std::sqrt(std::max(1 - z * z, 0.0));
        z += diff * sdt * noise.normal() - 0.25 * spec.delta_plus * (z + 1) * dt -
             0.25 * spec.delta_minus * (z - 1) * dt;
        t += dt;
        if (absorb_left && z <= -1 + wall) return {t, -1.0, -1};
        if (absorb_right && z >= 1 - wall) return {t, 1.0, +1};
        z = std::clamp(z, -1.0 + 1e-12, 1.0 - 1e-12);
    }
    return {horizon, z, 0};
}

DominationReport coupled_domination(double delta_plus, double delta_minus, double x0,
                                    double x0_til,
                                    const std::function<double(double, double)>& drift_P,
                                    double dt, double horizon, long n_paths,
                                    std::uint64_t seed, double tolerance) {
    if (!(delta_plus >= 2 && delta_minus >= 2))
        throw std::invalid_argument("coupled_domination: requires delta_+ and delta_- >= 2");
    if (!(x0 <= x0_til))
        throw std::invalid_argument("coupled_domination: requires X(0) <= X~(0)");
    const double tol = tolerance > 0 ? tolerance : 3 * std::sqrt(dt);
    const double sdt = std::sqrt(dt);
    const long nsteps = static_cast<long>(horizon / dt + 0.5);
    DominationReport rep;
    rep.paths = n_paths;
    for (long p = 0; p < n_paths; ++p) {
        rng::NormalStream noise(seed, 0xD0, static_cast<std::uint64_t>(p));
        double x = x0, xt = x0_til;
        for (long k = 0; k < nsteps; ++k) {
            const double t = k * dt;
            const double P = drift_P(t, xt);
            if (P > 0.25 * delta_plus * xt + 1e-12)
                throw std::invalid_argument("coupled_domination: P exceeds (delta_+/4) X~");
            if (xt < 0 || xt > 1)
                throw std::invalid_argument("coupled_domination: drift_P evaluated outside [0,1]");
            const double dB = sdt * noise.normal();
            x += std::sqrt(std::max(x * (1 - x), 0.0)) * dB -
                 0.25 * delta_plus * x * dt - 0.25 * delta_minus * (x - 1) * dt;
            xt += std::sqrt(std::max(xt * (1 - xt), 0.0)) * dB - P * dt -
                  0.25 * delta_minus * (xt - 1) * dt;
            x = std::clamp(x, 0.0, 1.0);
            xt = std::clamp(xt, 0.0, 1.0);
            const double excess = x - xt;
            rep.max_excess = std::max(rep.max_excess, excess);
            if (excess > tol) ++rep.violations;
            ++rep.steps_checked;
        }
    }
    return rep;
}

}  // namespace slekrho::diffusion
