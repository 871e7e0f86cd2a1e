#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "slekrho/rng.hpp"

namespace slekrho::diffusion {

// P_n^{(a,b)}(x) by the three-term recurrence. Requires a, b > -1.
double jacobi_poly(int n, double a, double b, double x);

// Normalization A_n = int w(s) P_n(s)^2 ds for the weight (1-s)^a (1+s)^b.
double jacobi_norm(int n, double a, double b);

// Sup-norm bound on [-1,1] valid for all a, b > -1:
//   Gamma(a+n+1)/(n! Gamma(a+1)) + n(n+a+b+1) Gamma(max(a,b)+n+1)/(n! Gamma(max(a,b)+2)).
double jacobi_sup_bound(int n, double a, double b);

// Gauss quadrature for the Jacobi weight (1-x)^a (1+x)^b on [-1,1]
// (Golub-Welsch). Exact for polynomials up to degree 2n-1.
struct Quadrature {
    std::vector<double> x, w;
};
Quadrature gauss_jacobi(int n, double a, double b);
inline Quadrature gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

// The four boundary regimes of dZ = sqrt(1-Z^2) dB - (dp/4)(Z+1)dt - (dm/4)(Z-1)dt.
enum class BoundaryCase {
    Conservative,  // (i)   dp, dm > 0, Z lives on [-1,1] forever
    AbsorbBoth,    // (ii)  dp, dm < 2, killed at either endpoint
    AbsorbLeft,    // (iii) dp > 0, dm < 2, killed at -1
    AbsorbRight,   // (iv)  dm > 0, dp < 2, killed at +1
};

struct DiffusionSpec {
    BoundaryCase kind;
    double delta_plus, delta_minus;
    double alpha_plus, alpha_minus;  // Jacobi indices
    double f_plus, f_minus;          // f(x) = (1-x)^f_plus (1+x)^f_minus
    double g_plus, g_minus;          // g(y) likewise

    double beta(int n) const;
    double f(double x) const;
    double g(double y) const;
    // h(x) = (1-x)^{dp/2-1} (1+x)^{dm/2-1}; h(x) p_t(x,y) = h(y) p_t(y,x).
    double h(double x) const;

    // Validates the case constraints; throws std::invalid_argument.
    static DiffusionSpec make(BoundaryCase kind, double delta_plus, double delta_minus);
};

struct DensityEvaluation {
    double t = 0, x = 0, y = 0;
    double value = 0;
    int truncation = 0;      // last index N included
    double tail_bound = 0;   // bound on the dropped tail
    bool converged = true;   // false if the bound cap was hit
};

// Truncated eigen-series p_t(x,y) = f(x) g(y) sum_n P_n(x)P_n(y)/A_n e^{-beta_n t}.
// If max_terms < 0 the truncation is chosen adaptively so the tail bound
// drops below tail_tol (flagged non-converged if that needs more than the cap).
DensityEvaluation transition_density(const DiffusionSpec& spec, double t, double x,
                                     double y, int max_terms = -1,
                                     double tail_tol = 1e-8);

struct QuasiInvariant {
    double Z;      // normalizer int_{-1}^1 g
    double beta0;  // decay rate; 0 in the conservative case
    DiffusionSpec spec;
    double p_inf(double x) const;
};
QuasiInvariant quasi_invariant(const DiffusionSpec& spec);

struct ZResult {
    double lifetime;   // horizon if still alive
    double z_end;      // state at min(lifetime, horizon)
    int absorbed;      // -1 / +1 endpoint, 0 if alive at horizon
};
ZResult simulate_Z(const DiffusionSpec& spec, double z0, double dt, double horizon,
                   rng::NormalStream& noise);

struct DominationReport {
    long violations = 0;    // grid times with X > X_til + tolerance
    double max_excess = 0;  // max over paths/times of X - X_til
    long paths = 0;
    long steps_checked = 0;
};
// Couples dX = sqrt(X(1-X))dB - (dp/4)X dt - (dm/4)(X-1)dt against
// dX~ = sqrt(X~(1-X~))dB - P(t, X~)dt - (dm/4)(X~-1)dt with shared noise.
// Requires dp, dm >= 2 and P <= (dp/4) X~ pointwise.
DominationReport coupled_domination(double delta_plus, double delta_minus, double x0,
                                    double x0_til,
                                    const std::function<double(double, double)>& drift_P,
                                    double dt, double horizon, long n_paths,
                                    std::uint64_t seed, double tolerance = -1);

}  // namespace slekrho::diffusion
