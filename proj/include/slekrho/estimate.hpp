#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slekrho/green.hpp"
#include "slekrho/sle.hpp"

namespace slekrho::estimate {

using IntervalList = std::vector<std::pair<double, double>>;

// F = R uses the swallow-order detector on the pair u +- r. F = C uses the
// conformal-radius proxy (W-U)/D, which tracks dist(u, eta) within the Koebe
// constants; the absolute constant is absorbed into the fitted C_F.
enum class Geometry { Real, Disc };

struct RunOptions {
    long n_samples = 10000;
    double dt = 1e-4;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0x11;
    double horizon_cap = 4000;   // hard cap; unresolved beyond becomes undetermined
    double escape_factor = 10;   // stop once (W-U)/D > factor * span
    double hit_margin = -1;      // swallow-order margin; default = dt
    int workers = 1;             // logical split; results are worker-count invariant
    bool tail_correction = true; // reweight unresolved paths by the Green martingale
};

struct HitTable {
    std::vector<double> r;
    std::vector<long> hits;
    std::vector<long> undetermined;
    std::vector<double> live_mass;  // sum over unresolved paths of G_T(u)/G_0
    long n = 0;
    double G0 = 0;
    std::vector<double> p, se;  // corrected estimate and standard error
};

HitTable estimate_hit_prob(const sle::ProcessConfig& cfg, double u,
                           std::vector<double> r_grid, Geometry F,
                           const RunOptions& opt);

struct FitResult {
    double slope = 0, intercept = 0, slope_se = 0;
};

// Weighted least squares of ln p against ln r with binomial errors.
FitResult fit_exponent(std::span<const double> r, std::span<const double> p,
                       std::span<const double> se);
FitResult fit_exponent(const HitTable& table);

struct CFEstimate {
    double value = 0;
    double spread = 0;  // max relative spread across the last decade
    std::vector<double> per_r;
    bool converged = true;
};

CFEstimate estimate_CF(const HitTable& table, const green::ExponentSet& e,
                       double green1_value);

struct TwoPointTable {
    std::vector<double> r1, r2;
    std::vector<std::vector<long>> hits;    // [i1][i2]
    std::vector<std::vector<double>> p;     // corrected
    std::vector<std::vector<bool>> usable;  // joint hits >= 100
    long n = 0;
    double G2_hat = 0, G2_se = 0;  // extrapolated r1^-a r2^-a p
};

TwoPointTable estimate_two_point(const sle::ProcessConfig& cfg, double u1, double u2,
                                 std::vector<double> r1_grid,
                                 std::vector<double> r2_grid, Geometry F, double C_R,
                                 const RunOptions& opt);

struct ContentProfile {
    std::vector<double> r;
    std::vector<double> meanY, seY;
    std::vector<double> mean_absdiff;         // E|Y_{r_{k+1}} - Y_{r_k}|
    std::vector<std::vector<float>> samples;  // [r][path]
    double xi_mean = 0, xi_se = 0;            // tail-corrected limit estimate
    std::vector<float> xi_samples;
};

// Y_r = r^-alpha lambda(B(eta cap R, r) cap S) from swallow-order touch-downs
// on a fine grid of spacing min(r)/10. C_R feeds the martingale tail term.
ContentProfile minkowski_profile(const sle::ProcessConfig& cfg, const IntervalList& S,
                                 std::vector<double> r_grid, double C_R,
                                 const RunOptions& opt);

struct MeasureProfile {
    std::vector<double> u;
    std::vector<double> mean_theta, se_theta;
    std::vector<std::vector<float>> theta_samples;  // [path][u index]
    double atom_diag_coarse = 0, atom_diag_fine = 0;
    double frostman = 0, frostman_refined = 0;  // (d - eps)-energy, eps = d/2
};

MeasureProfile measure_profile(const sle::ProcessConfig& cfg, std::vector<double> u_grid,
                               double r_small, double C_R, const RunOptions& opt);

struct DoobMeyerReport {
    std::vector<double> t;
    std::vector<double> mart_mean, mart_se;
    std::vector<double> content_mean, content_se;
    std::vector<double> sum_se;  // se of M_S(t) + Cont_t
    double M0 = 0;
    std::vector<double> mu_mean, mu_se;  // stopped single-point martingale
    double Mu0 = 0;
};

// Checks E[M_S(t) + Cont(eta[0,t] cap S)] = M_S(0) and the constancy of the
// stopped one-point weight E[M_u(t ^ tau)].
DoobMeyerReport doob_meyer_check(const sle::ProcessConfig& cfg,
                                 std::pair<double, double> S, double u_point,
                                 std::vector<double> t_list, double C_R,
                                 double r_small, int quad_panels,
                                 const RunOptions& opt);

struct BoundSweepCell {
    double kappa, rho1, r;
    double p_hat = 0, se = 0, bound = 0;
    double quotient() const { return bound > 0 ? p_hat / bound : 0; }
};

// One-point upper-bound expression at u = v_m with v_0 = w:
//   (r/|v_{j0}-u|)^{gamma sigma_{j0}} prod_{j<j0} (|v_{j+1}-u|/|v_j-u|)^{gamma sigma_j},
// j0 = max{j : v_j >= u + r}. Requires 0 < r < |w - u|.
double est1_bound(const green::ExponentSet& e, double w, std::span<const double> v,
                  double u, double r);

// Quotients p_hat / est1-bound over a (kappa, rho1, r) grid at u = v_1; the
// acceptance check is that one constant covers all of them.
std::vector<BoundSweepCell> one_point_bound_sweep(std::span<const double> kappas,
                                                  std::span<const double> rhos,
                                                  std::span<const double> rs,
                                                  const RunOptions& opt);

// Parallel map over path indices; output slots must be preallocated per path
// so results do not depend on the worker count.
void run_paths(long n, int workers, const std::function<void(long)>& body);

// Kahan sum in index order (order-insensitive reductions for the CSV layer).
double ordered_sum(std::span<const float> x);
double ordered_sum(std::span<const double> x);

}  // namespace slekrho::estimate
