#include "slekrho/green.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slekrho::green {

bool ExponentSet::hits_real_line() const {
    return rho_sum > kappa / 2 - 4 && rho_sum < kappa / 2 - 2;
}

ExponentSet exponents(double kappa, std::span<const double> rho) {
    if (!(kappa > 0)) throw std::invalid_argument("exponents: kappa must be > 0");
    ExponentSet e;
    e.kappa = kappa;
    const std::size_t m = rho.size();
    e.sigma_j.resize(m + 1);
    e.sigma_j[0] = 2.0;
    double sum = 0;
    for (std::size_t j = 0; j < m; ++j) {
        sum += rho[j];
        e.sigma_j[j + 1] = 2.0 + sum;
    }
    e.rho_sum = sum;
    if (!(e.rho_sum > std::max(-2.0, kappa / 2 - 4)))
        throw std::invalid_argument("exponents: rho_sum must exceed max(-2, kappa/2-4)");
    for (std::size_t j = 0; j < m; ++j) {
        if (!(e.sigma_j[j] > 0))
            throw std::invalid_argument("exponents: continuation threshold (sigma_j <= 0)");
    }

    e.gamma = (2 * e.rho_sum + 8 - kappa) / (2 * kappa);
    e.alpha = (e.rho_sum + 2) * e.gamma;
    e.alpha_j.resize(m + 1);
    e.alpha_j[0] = 2 * e.gamma;
    for (std::size_t j = 0; j < m; ++j) e.alpha_j[j + 1] = rho[j] * e.gamma;
    e.d = 1 - e.alpha;

    double smin = 2.0, smax = 2.0;
    for (std::size_t j = 0; j < m; ++j) {  // sigma_0..sigma_{m-1}
        smin = std::min(smin, e.sigma_j[j]);
        smax = std::max(smax, e.sigma_j[j]);
    }
    e.sigma_star = smin;
    e.sigma_upper = smax;
    e.alpha_star = e.sigma_star * e.gamma;
    e.alpha_upper = e.sigma_upper * e.gamma;

    e.beta_sigma = (e.rho_sum + 3) / (e.rho_sum + 4);
    e.beta_star = e.alpha_star / (e.alpha_star + 1);
    e.beta = 1.0 / (1.0 / e.beta_sigma + 1.0 / e.beta_star);
    e.zeta1 = e.alpha_star * e.beta / (e.alpha_star * e.beta + e.alpha_star + e.beta);
    e.zeta2 = e.alpha_star * e.beta / (e.alpha + e.alpha_star + e.beta);
    return e;
}

static void check_ordering(const ExponentSet& e, double w, std::span<const double> v,
                           double u) {
    if (v.size() + 1 != e.alpha_j.size())
        throw std::invalid_argument("green1: v size does not match exponent set");
    double prev = w;
    for (double vj : v) {
        if (vj > prev) throw std::invalid_argument("green1: ordering w >= v_1 >= ... violated");
        prev = vj;
    }
    if (!(prev > u)) throw std::invalid_argument("green1: requires v_m > u");
}

double green1(const ExponentSet& e, double w, std::span<const double> v, double u) {
    check_ordering(e, w, v, u);
    double lg = -e.alpha_j[0] * std::log(std::abs(w - u));
    for (std::size_t j = 0; j < v.size(); ++j)
        lg -= e.alpha_j[j + 1] * std::log(std::abs(v[j] - u));
    return std::exp(lg);
}

double green1_rewrite(const ExponentSet& e, double w, std::span<const double> v, double u) {
    check_ordering(e, w, v, u);
    const std::size_t m = v.size();
    double lg = 0;
    double prev = w;  // v_0 = w
    for (std::size_t j = 0; j < m; ++j) {
        lg += e.sigma_j[j] * e.gamma * (std::log(std::abs(v[j] - u)) - std::log(std::abs(prev - u)));
        prev = v[j];
    }
    lg -= e.sigma_j[m] * e.gamma * std::log(std::abs(v[m - 1] - u));
    return std::exp(lg);
}

double green1_evolved(const ExponentSet& e, double W, std::span<const double> V,
                      double U, double D_u, bool swallowed, double C_F) {
    if (swallowed) return 0.0;
    return C_F * std::pow(D_u, e.alpha) * green1(e, W, V, U);
}

GeometryScales geometry_scales(double w, std::span<const double> v, double u1, double u2) {
    if (v.empty()) throw std::invalid_argument("geometry_scales: need at least one force point");
    GeometryScales s;
    s.L0 = std::abs(w - v.back());
    s.L1 = std::abs(v.back() - u1);
    s.L2 = std::abs(u1 - u2);
    s.Lmin = std::min(s.L1, s.L2);
    return s;
}

std::pair<double, double> green2_bounds(const ExponentSet& e, double w,
                                        std::span<const double> v, double u1, double u2) {
    if (!(u2 < u1)) throw std::invalid_argument("green2_bounds: requires u2 < u1");
    const GeometryScales s = geometry_scales(w, v, u1, u2);
    const double lower = green1(e, w, v, u1) * std::pow(s.L2, -e.alpha);
    const double upper = std::pow(s.L1 / (s.L0 + s.L1), e.alpha_star) *
                         std::pow(s.L1, -e.alpha) * std::pow(s.L2, -e.alpha);
    return {lower, upper};
}

QuadGrid build_quad_grid(std::span<const std::pair<double, double>> intervals,
                         double v_m, int panels_per_interval) {
    QuadGrid g;
    for (const auto& [a, b] : intervals) {
        if (!(a < b)) throw std::invalid_argument("build_quad_grid: empty interval");
        if (!(b <= v_m)) throw std::invalid_argument("build_quad_grid: S must lie left of v_m");
        const int n = panels_per_interval;
        const double len = b - a;
        std::vector<double> edges;
        edges.reserve(n + 2);
        if (b == v_m) {
            // Geometric grading toward the integrable singularity at v_m;
            // smallest panel ~ 1e-8 * len.
            const double q = std::pow(1e-8, 1.0 / n);
            edges.push_back(a);
            for (int k = 1; k <= n; ++k)
                edges.push_back(b - len * std::pow(q, static_cast<double>(k)));
            edges.push_back(b);
        } else {
            for (int k = 0; k <= n; ++k)
                edges.push_back(a + len * static_cast<double>(k) / n);
        }
        for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
            const double h = edges[k + 1] - edges[k];
            if (h <= 0) continue;
            g.u.push_back(0.5 * (edges[k] + edges[k + 1]));
            g.weight.push_back(h);
        }
    }
    return g;
}

double integrate_green1(const ExponentSet& e, double w, std::span<const double> v,
                        const QuadGrid& grid, double C_R) {
    double acc = 0, c = 0;  // Kahan
    for (std::size_t i = 0; i < grid.u.size(); ++i) {
        const double term = grid.weight[i] * green1(e, w, v, grid.u[i]);
        const double y = term - c;
        const double t = acc + y;
        c = (t - acc) - y;
        acc = t;
    }
    return C_R * acc;
}

}  // namespace slekrho::green
