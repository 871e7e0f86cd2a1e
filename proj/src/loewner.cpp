#include "slekrho/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slekrho/rng.hpp"

namespace slekrho::loewner {

void Driver::validate() const {
    if (t.size() != w.size() || t.size() < 2)
        throw std::invalid_argument("driver: need matching t/w arrays with >= 2 samples");
    if (t.front() != 0.0) throw std::invalid_argument("driver: time grid must start at 0");
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        if (!(t[i + 1] > t[i])) throw std::invalid_argument("driver: times must increase");
    for (double x : w)
        if (!std::isfinite(x)) throw std::invalid_argument("driver: non-finite value");
}

double Driver::value(double time) const {
    if (time <= t.front()) return w.front();
    if (time >= t.back()) return w.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double frac = (time - t[i]) / (t[i + 1] - t[i]);
    return w[i] + frac * (w[i + 1] - w[i]);
}

double Driver::quadratic_variation_rate() const {
    double qv = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double dw = w[i + 1] - w[i];
        qv += dw * dw;
    }
    return qv / (t.back() - t.front());
}

Driver Driver::constant(double c, double horizon, double step) {
    Driver d;
    const long n = std::max(1L, std::lround(horizon / step));
    d.t.reserve(n + 1);
    d.w.assign(n + 1, c);
    for (long k = 0; k <= n; ++k) d.t.push_back(horizon * k / n);
    return d;
}

Driver Driver::brownian(double kappa, double horizon, double step, std::uint64_t seed,
                        std::uint64_t path) {
    Driver d;
    const long n = std::max(1L, std::lround(horizon / step));
    const double h = horizon / n;
    rng::NormalStream noise(seed, 0xB0, path);
    d.t.resize(n + 1);
    d.w.resize(n + 1);
    d.t[0] = 0;
    d.w[0] = 0;
    const double s = std::sqrt(kappa * h);
    for (long k = 1; k <= n; ++k) {
        d.t[k] = h * k;
        d.w[k] = d.w[k - 1] + s * noise.normal();
    }
    return d;
}

namespace {

struct PointState {
    double u;
    double log_deriv = 0;
    bool alive = true;
};

// Advances dU = 2dt/(U-W) over [t0,t1] against the linear segment (w0,w1).
// Stiffness rule: subdivide by 16 (at most twice) when |U-W|^2 < 8h.
// side < 0 means the point sits left of the driver. Sentinels reflect at
// gap 2 sqrt(h) (the slit startup scale); ordinary points swallow at
// eps_swallow and record the crossing time.
void advance(PointState& p, double t0, double t1, double w0, double w1, bool sentinel,
             int side, double eps_swallow, double* swallow_time) {
    const double span = t1 - t0;
    double t = t0;
    while (t < t1 - 1e-15 * (1 + t1) && p.alive) {
        const double W = w0 + (t - t0) / span * (w1 - w0);
        const double gap = side < 0 ? W - p.u : p.u - W;
        double h = t1 - t;
        while (gap * gap < 8 * h && h > span / 256) h /= 16;

        if (!sentinel && gap <= eps_swallow) {
            if (swallow_time) *swallow_time = t;
            p.alive = false;
            return;
        }
        if (sentinel && gap * gap < 2 * h) {
            // touching phase: keep the image glued at the startup scale
            const double hs = std::min(h, t1 - t);
            t += hs;
            const double Wn = w0 + (t - t0) / span * (w1 - w0);
            p.u = side < 0 ? Wn - 2 * std::sqrt(hs) : Wn + 2 * std::sqrt(hs);
            continue;
        }
        // RK4 for dU = 2/(U - W(t)), dlnD = -2/(U - W(t))^2 on the segment
        const double slope = (w1 - w0) / span;
        auto du = [&](double tt, double uu) { return 2.0 / (uu - (w0 + slope * (tt - t0))); };
        const double k1 = du(t, p.u);
        const double k2 = du(t + h / 2, p.u + h / 2 * k1);
        const double k3 = du(t + h / 2, p.u + h / 2 * k2);
        const double k4 = du(t + h, p.u + h * k3);
        p.u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        // dlnD/dt = -2/(U-W)^2 = -(dU/dt)^2 / 2
        p.log_deriv -= h / 12 * (k1 * k1 + 2 * k2 * k2 + 2 * k3 * k3 + k4 * k4);
        t += h;
    }
}

BoundaryPointPath evolve_impl(const Driver& d, double x, double step, bool sentinel,
                              int side) {
    if (!(step > 0)) throw std::invalid_argument("evolve_boundary_point: step must be > 0");
    for (std::size_t i = 0; i + 1 < d.t.size(); ++i)
        if (step > d.t[i + 1] - d.t[i] + 1e-12)
            throw std::invalid_argument("evolve_boundary_point: step exceeds grid spacing");
    const double kappa_hat = std::max(1.0, d.quadratic_variation_rate());
    const double eps_swallow = 10 * std::sqrt(kappa_hat * step);

    BoundaryPointPath out;
    out.start = x;
    out.sentinel = sentinel;
    out.t.reserve(d.t.size());
    out.g.reserve(d.t.size());
    out.deriv.reserve(d.t.size());
    out.t.push_back(0);
    out.g.push_back(x);
    out.deriv.push_back(1.0);

    PointState p{x, 0.0, true};
    PointState merged{d.w[0], 0.0, true};  // c_t (or d_t) continuation target
    double frozen_deriv = 1.0;

    for (std::size_t i = 0; i + 1 < d.t.size(); ++i) {
        const double t0 = d.t[i], t1 = d.t[i + 1];
        double s0 = t0;
        while (s0 < t1 - 1e-15) {
            const double s1 = std::min(t1, s0 + step);
            const double frac0 = (s0 - t0) / (t1 - t0), frac1 = (s1 - t0) / (t1 - t0);
            const double ww0 = d.w[i] + frac0 * (d.w[i + 1] - d.w[i]);
            const double ww1 = d.w[i] + frac1 * (d.w[i + 1] - d.w[i]);
            if (p.alive)
                advance(p, s0, s1, ww0, ww1, sentinel, side, sentinel ? 0.0 : eps_swallow,
                        &out.swallow_time);
            if (!p.alive && frozen_deriv == 1.0 && out.swallow_time < kNever)
                frozen_deriv = std::exp(p.log_deriv);
            advance(merged, s0, s1, ww0, ww1, true, side, 0.0, nullptr);
            s0 = s1;
        }
        out.t.push_back(t1);
        if (p.alive) {
            out.g.push_back(p.u);
            out.deriv.push_back(std::exp(p.log_deriv));
        } else {
            out.g.push_back(merged.u);
            out.deriv.push_back(frozen_deriv);
        }
    }
    return out;
}

}  // namespace

BoundaryPointPath evolve_boundary_point(const Driver& d, double x, double step) {
    d.validate();
    if (x == d.w[0])
        throw std::invalid_argument("evolve_boundary_point: x equals W(0); use a sentinel");
    return evolve_impl(d, x, step, false, x < d.w[0] ? -1 : +1);
}

BoundaryPointPath evolve_left_sentinel(const Driver& d, double step) {
    d.validate();
    return evolve_impl(d, d.w[0], step, true, -1);
}

BoundaryPointPath evolve_right_sentinel(const Driver& d, double step) {
    d.validate();
    return evolve_impl(d, d.w[0], step, true, +1);
}

ModifiedBoundaryImages modified_images(const Driver& d, double step) {
    const auto c = evolve_left_sentinel(d, step);
    const auto dd = evolve_right_sentinel(d, step);
    ModifiedBoundaryImages out;
    out.t = c.t;
    out.c = c.g;
    out.d = dd.g;
    return out;
}

Trace trace_curve(const Driver& d, int stride) {
    d.validate();
    if (stride < 1) throw std::invalid_argument("trace_curve: stride must be >= 1");
    const std::size_t n = d.t.size() - 1;

    std::vector<double> alpha(n), pp(n), qq(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double dt = d.t[j + 1] - d.t[j];
        const double dw = d.w[j + 1] - d.w[j];
        const double c = dw / std::sqrt(dt);
        const double s = c / std::sqrt(c * c + 16);
        alpha[j] = 0.5 * (1 + s);
        pp[j] = 2 * std::sqrt(dt * (1 - alpha[j]) / alpha[j]);
        qq[j] = 2 * std::sqrt(dt * alpha[j] / (1 - alpha[j]));
    }

    Trace tr;
    tr.t.push_back(0);
    tr.z.push_back({d.w[0], 0.0});
    using C = std::complex<double>;
    for (std::size_t k = 1; k <= n; k += stride) {
        const std::size_t j = k - 1;
        C z = std::pow(qq[j], alpha[j]) * std::pow(pp[j], 1 - alpha[j]) *
                  std::exp(C(0, M_PI * (1 - alpha[j]))) +
              d.w[j];
        for (std::size_t i = j; i-- > 0;) {
            const C base = z - d.w[i + 1];
            z = std::pow(base + qq[i], alpha[i]) * std::pow(base - pp[i], 1 - alpha[i]) +
                d.w[i];
        }
        tr.t.push_back(d.t[k]);
        tr.z.push_back(z);
    }
    return tr;
}

InteriorImage evolve_interior_point(const Driver& d, std::complex<double> z,
                                    double horizon) {
    d.validate();
    using C = std::complex<double>;
    C g = z, logd = 0;
    const double T = std::min(horizon, d.horizon());
    const double grid = d.t[1] - d.t[0];
    double t = 0;
    while (t < T - 1e-15) {
        const double gap = std::abs(g - d.value(t));
        const double h = std::min(T - t, std::min(grid, 0.05 * gap * gap));
        if (!(h > 0) || !std::isfinite(h))
            throw std::runtime_error("evolve_interior_point: probe reached the hull");
        auto rhs = [&](double tt, C zz) -> std::pair<C, C> {
            const C dz = zz - d.value(tt);
            return {2.0 / dz, -2.0 / (dz * dz)};
        };
        const auto [k1, l1] = rhs(t, g);
        const auto [k2, l2] = rhs(t + h / 2, g + h / 2 * k1);
        const auto [k3, l3] = rhs(t + h / 2, g + h / 2 * k2);
        const auto [k4, l4] = rhs(t + h, g + h * k3);
        g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        logd += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        t += h;
    }
    return {g, std::exp(logd)};
}

DistortionReport check_distortion_bounds(const Driver& d, double delta,
                                         std::span<const std::complex<double>> probes) {
    d.validate();
    Driver head;
    for (std::size_t i = 0; i < d.t.size() && d.t[i] <= delta + 1e-12; ++i) {
        head.t.push_back(d.t[i]);
        head.w.push_back(d.w[i]);
    }
    if (head.t.size() < 2)
        throw std::invalid_argument("check_distortion_bounds: delta below grid spacing");
    const auto tr = trace_curve(head, 1);
    DistortionReport rep;
    const double x0 = d.w[0];
    for (const auto& z : tr.z) rep.radius = std::max(rep.radius, std::abs(z - x0));
    rep.driver_move = std::abs(head.w.back() - x0);
    rep.driver_ok = rep.driver_move <= 2 * rep.radius + 1e-12;
    if (!rep.driver_ok) ++rep.violations;

    for (const auto& z : probes) {
        DistortionProbe pr;
        pr.z = z;
        if (std::abs(z - x0) <= rep.radius * 1.0001 && z.imag() >= 0) {
            pr.inside_hull_reach = true;
            rep.probes.push_back(pr);
            continue;
        }
        const auto im = evolve_interior_point(head, z, delta);
        pr.move = std::abs(im.g - z);
        pr.move_bound = 3 * rep.radius;
        pr.log_deriv = std::abs(std::log(im.gprime));
        pr.log_deriv_applicable = std::abs(z - x0) >= 10 * rep.radius;
        pr.log_deriv_bound = 5 * std::pow(rep.radius / std::abs(z - x0), 2);
        pr.violation = pr.move > pr.move_bound + 1e-9 ||
                       (pr.log_deriv_applicable && pr.log_deriv > pr.log_deriv_bound + 1e-9);
        if (pr.violation) ++rep.violations;
        rep.probes.push_back(pr);
    }
    return rep;
}

double semi_annulus_extremal_distance(double /*x*/, double r1, double r2) {
    if (!(r1 > 0) || !(r2 > r1))
        throw std::invalid_argument("semi_annulus_extremal_distance: need 0 < r1 < r2");
    return std::log(r2 / r1) / M_PI;
}

}  // namespace slekrho::loewner
