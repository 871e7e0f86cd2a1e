#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace slekrho::loewner {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Driver samples W(t_k) on a grid. Trace reconstruction treats each interval
// as a constant-plus-square-root profile; boundary/interior ODE steps
// interpolate linearly.
struct Driver {
    std::vector<double> t;
    std::vector<double> w;

    void validate() const;  // throws std::invalid_argument
    double horizon() const { return t.empty() ? 0.0 : t.back(); }
    double value(double time) const;  // piecewise-linear lookup
    // Mean squared increment per unit time; proxy for kappa when the driver
    // was sampled from sqrt(kappa) B.
    double quadratic_variation_rate() const;

    static Driver constant(double c, double horizon, double step);
    static Driver brownian(double kappa, double horizon, double step,
                           std::uint64_t seed, std::uint64_t path = 0);
};

struct BoundaryPointPath {
    double start = 0;
    bool sentinel = false;           // started as w^- / w^+
    std::vector<double> t;
    std::vector<double> g;           // U(t_k) = g_t(start); c_t/d_t after swallowing
    std::vector<double> deriv;       // D(t_k) = g_t'(start); frozen after swallowing
    double swallow_time = kNever;    // tau*_x
    bool swallowed() const { return swallow_time < kNever; }
};

// Integrates dU = 2dt/(U-W), dD/D = -2dt/(U-W)^2 at the given step until
// blow-up or the driver horizon. After tau*_x a left point continues as c_t.
// Requires x != W(0); use the sentinel variants for w^- / w^+.
BoundaryPointPath evolve_boundary_point(const Driver& d, double x, double step);
BoundaryPointPath evolve_left_sentinel(const Driver& d, double step);   // c_t
BoundaryPointPath evolve_right_sentinel(const Driver& d, double step);  // d_t

struct ModifiedBoundaryImages {
    std::vector<double> t, c, d;  // c_t <= W(t) <= d_t
};
ModifiedBoundaryImages modified_images(const Driver& d, double step);

struct Trace {
    std::vector<double> t;
    std::vector<std::complex<double>> z;
};

// Zipper reconstruction: eta(t_k) by composing inverse incremental slit maps
// from t_k down to 0. O(n^2 / stride); stride > 1 evaluates every stride-th
// grid time.
Trace trace_curve(const Driver& d, int stride = 1);

// g_T(z) and g_T'(z) for z away from the hull (RK4 on the Loewner ODE).
struct InteriorImage {
    std::complex<double> g;
    std::complex<double> gprime;
};
InteriorImage evolve_interior_point(const Driver& d, std::complex<double> z,
                                    double horizon);

struct DistortionProbe {
    std::complex<double> z;
    double move = 0;                  // |g_delta(z) - z|
    double move_bound = 0;            // 3r
    double log_deriv = 0;             // |ln g_delta'(z)|
    double log_deriv_bound = 0;       // 5 (r/|z-x0|)^2
    bool log_deriv_applicable = false;  // |z-x0| >= 10 r
    bool inside_hull_reach = false;     // probe rejected
    bool violation = false;
};

struct DistortionReport {
    double radius = 0;       // rad_{W(0)}(K_delta), measured from the trace
    double driver_move = 0;  // |W(delta) - W(0)|
    bool driver_ok = true;   // <= 2r
    std::vector<DistortionProbe> probes;
    int violations = 0;
};

DistortionReport check_distortion_bounds(const Driver& d, double delta,
                                         std::span<const std::complex<double>> probes);

// Extremal distance across the semi-annulus {r1 < |z-x| < r2} in the upper
// half-plane: (1/pi) ln(r2/r1). Requires 0 < r1 < r2.
double semi_annulus_extremal_distance(double x, double r1, double r2);

}  // namespace slekrho::loewner
