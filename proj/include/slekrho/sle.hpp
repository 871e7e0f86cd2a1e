#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "slekrho/green.hpp"
#include "slekrho/rng.hpp"

namespace slekrho::sle {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Left-sided configuration: force points v_m <= ... <= v_1 <= w, with
// v_j == w standing for the sentinel w^-.
struct ProcessConfig {
    double kappa = 4;
    std::vector<double> rho;
    double w = 0;
    std::vector<double> v;
    double horizon = 10;
    double dt = 1e-4;
    std::uint64_t seed = 1;

    // Throws std::invalid_argument on inadmissible parameters (continuation
    // threshold reachable, bad ordering, right-side force points, ...).
    void validate() const;
    green::ExponentSet exponents() const { return green::exponents(kappa, rho); }
    double rho_sum() const;
};

struct MergeEvent {
    double time;
    int j, k;  // original force point indices (0-based), j < k
};

struct DrivingPath {
    std::vector<double> t, W;
    std::vector<std::vector<double>> V;  // per original force point
    std::vector<MergeEvent> merges;
};

struct EngineOptions {
    bool coarsen = true;
    int max_coarsen_pow = 14;  // h <= dt * 2^14 far from all singularities
    int max_refine_pow = 28;   // h >= dt / 2^30 inside detection windows
    bool record = false;       // store (t, W, V) on the base grid
    double eps_mult = 10.0;    // swallow/reflect threshold multiplier
};

// Euler-Maruyama path of (W, V_1..V_m) plus passively tracked boundary
// points. A single force group runs in the gap coordinate X = W - V_1
// (dX = sqrt(kappa) dB + (rho+2) dt / X) with positivity by folding at 0;
// multiple groups use the coupled scheme with gap reflection at
// eps = 10 sqrt(kappa h). The step h moves in powers of two: it grows far
// from all singularities (Brownian self-similarity keeps the error profile
// flat) and is refined once a resolution-tracked probe enters its detection
// window, so swallow times resolve at the probe's own physical scale r
// rather than at sqrt(kappa dt).
class PathEngine {
public:
    // All probes integrate U = g_t(x). Swallowing is detected against the
    // running low-water mark of the front image c_t: images of distinct
    // points never cross, so x is swallowed exactly when min_s c_s drops
    // below U_x. The test is threshold-free; eps_r > 0 only controls how
    // deeply the step refines while the front is inside the probe's
    // detection window, which sets the spatial resolution of the verdict.
    struct Probe {
        double x0 = 0;
        bool need_deriv = false;
        double eps_r = 0;  // > 0: resolve the fate at physical scale eps_r
        double thr = 0;    // refinement depth driver, ~ eps_r * D / 4 frozen
                           // outside the dive window
        double U = 0;
        double lnz = 0;    // log front separation (eps_r mode)
        double logD = 0;
        double tau = kNever;     // swallow time, upper end of the verdict window
        double tau_lo = kNever;  // lower end of the verdict window
        bool alive = true;
        double min_crad = kNever;  // min over updates of (W-U)/D (if need_deriv)
        double freeze_level = 0;   // record state when (W-U)/D first <= level
        double frozen_t = kNever;
        double frozen_U = 0, frozen_D = 0, frozen_W = 0;
        std::vector<double> frozen_V;
        int stride_pow = 0;
        int bucket_pos = 0;
        double last_t = 0, last_W = 0;
    };

    PathEngine(const ProcessConfig& cfg, std::uint64_t stream, std::uint64_t path,
               EngineOptions opt = {});

    // x < w. Returns the probe id. Register all probes before stepping.
    // logD0 seeds the accumulated log-derivative (used when transporting a
    // tracked point across a domain-Markov restart). eps_r > 0 marks the
    // probe as resolution-tracked at physical scale eps_r (implies deriv).
    int add_probe(double x, bool need_deriv = false, double freeze_level = 0,
                  double logD0 = 0.0, double eps_r = 0.0);

    // Advance to t_target (rounded to the base grid).
    void run_to(double t_target);

    double time() const;
    double W() const { return W_; }
    // Image of original force point j (merged points share values).
    double V_of(int j) const { return group_value_[group_of_[j]]; }
    std::vector<double> V_all() const;
    int group_count() const { return static_cast<int>(group_value_.size()); }
    const Probe& probe(int id) const { return probes_[id]; }
    std::size_t probe_count() const { return probes_.size(); }
    const std::vector<MergeEvent>& merges() const { return merge_events_; }
    const DrivingPath& recorded() const { return record_; }
    std::uint64_t steps_taken() const { return steps_; }
    int alive_probe_count() const { return alive_count_; }

    // Evolved Green weight C_F D_u^alpha G(W, V; U) for an alive probe, 0 for
    // a swallowed one.
    double green_weight(const green::ExponentSet& e, int id, double C_F = 1.0) const;

private:
    void step_forces(double h);
    void advance_front(double dW_total, double h, int sub);
    void update_probe(int id);
    double probe_threshold(const Probe& p) const;
    int required_pow(double gap, const Probe& p) const;
    void place_in_bucket(int id, int k);
    void remove_from_bucket(int id);

    ProcessConfig cfg_;
    EngineOptions opt_;
    rng::NormalStream noise_;
    double dt_;
    double qdt_;           // finest step quantum, dt / 2^max_refine_pow
    int base_pow_ = 0;     // dt = qdt * 2^base_pow_
    double eps_base_;      // eps_mult * sqrt(kappa dt)
    double eps_min_;       // resolution floor ~ 4 sqrt(kappa qdt)
    std::uint64_t n_ = 0;  // time in qdt quanta
    double W_;
    std::vector<double> group_value_;
    std::vector<double> group_rho_;
    std::vector<int> group_of_;  // original index -> group
    double bessel_X_ = 0;   // gap coordinate when a single group
    double front_X_ = 0;    // W - c_t: gap of the modified-map image of w^-
    double front_min_ = 0;  // running min of the front image c_t
    std::vector<Probe> probes_;
    std::vector<std::vector<int>> bucket_;  // probe ids by stride power
    int alive_count_ = 0;
    std::vector<MergeEvent> merge_events_;
    DrivingPath record_;
    std::uint64_t steps_ = 0;
};

// Records (W, V) on the base grid up to config.horizon.
DrivingPath simulate_driving(const ProcessConfig& cfg, std::uint64_t path_index = 0);

struct HitResult {
    bool hit = false;
    bool undetermined = false;
    double first_hit_time = kNever;  // tau*_{u+r} proxy
};

// Swallow-order detector for eta hitting B_R(u, r) = [u-r, u+r]: hit iff
// tau*_{u+r} < tau*_{u-r} strictly at grid resolution. Requires u + r < v_m.
HitResult hit_interval_detector(const ProcessConfig& cfg, double u, double r,
                                std::uint64_t path_index = 0);

// Maps the state at time t (from a recorded path) to a restart configuration
// per the domain Markov property; V_j(t) == W(t) demotes to the sentinel w^-.
ProcessConfig restart_state(const ProcessConfig& cfg, const DrivingPath& path, double t);

}  // namespace slekrho::sle
