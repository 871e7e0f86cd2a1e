#include "slekrho/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace slekrho::estimate {

void run_paths(long n, int workers, const std::function<void(long)>& body) {
    if (workers <= 1) {
        for (long p = 0; p < n; ++p) body(p);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (long p = next.fetch_add(1); p < n; p = next.fetch_add(1)) body(p);
        });
    for (auto& th : pool) th.join();
}

namespace {
template <typename T>
double kahan(std::span<const T> x) {
    double acc = 0, c = 0;
    for (T v : x) {
        const double y = static_cast<double>(v) - c;
        const double t = acc + y;
        c = (t - acc) - y;
        acc = t;
    }
    return acc;
}
}  // namespace

double ordered_sum(std::span<const float> x) { return kahan(x); }
double ordered_sum(std::span<const double> x) { return kahan(x); }

namespace {

enum class Status : unsigned char { Pending, Hit, NoHit, Tail, Undetermined };

double mean_se(std::span<const float> xs, double& se) {
    const long n = static_cast<long>(xs.size());
    const double mean = kahan(xs) / n;
    double var = 0;
    for (float v : xs) var += (v - mean) * (v - mean);
    se = std::sqrt(var / n / std::max<long>(n - 1, 1));
    return mean;
}

// Two deaths in the same front sweep land within the detection-floor
// capacity scale thr^2/kappa of each other, while genuinely distinct sweeps
// are separated by the return capacity ~ (r D)^2/kappa, two orders above.
double pair_margin(const sle::PathEngine::Probe& plus, double kappa,
                   double fixed_margin) {
    if (fixed_margin > 0) return fixed_margin;
    return plus.thr * plus.thr / kappa;
}

Status pair_status(const sle::PathEngine::Probe& plus,
                   const sle::PathEngine::Probe& minus, double margin) {
    if (plus.alive) return Status::Pending;
    if (minus.alive) {
        // wait until the minus probe has been re-examined after the sweep
        return minus.last_t >= plus.tau ? Status::Hit : Status::Pending;
    }
    return plus.tau + margin < minus.tau ? Status::Hit : Status::NoHit;
}

}  // namespace

HitTable estimate_hit_prob(const sle::ProcessConfig& cfg, double u,
                           std::vector<double> r_grid, Geometry F,
                           const RunOptions& opt) {
    cfg.validate();
    if (r_grid.empty() || r_grid.size() > 63)
        throw std::invalid_argument("estimate_hit_prob: need 1..63 radii");
    const auto e = cfg.exponents();
    const double v_m = cfg.v.back();
    const double rmax = *std::max_element(r_grid.begin(), r_grid.end());
    if (F == Geometry::Real) {
        if (!(u + rmax < v_m))
            throw std::invalid_argument("estimate_hit_prob: requires u + r < v_m");
        if (!e.hits_real_line())
            throw std::invalid_argument(
                "estimate_hit_prob: rho_sum >= kappa/2 - 2 never hits the line "
                "left of the force points");
    } else if (!(u < v_m)) {
        throw std::invalid_argument("estimate_hit_prob: requires u < v_m");
    }
    const double esc = opt.escape_factor * (std::abs(cfg.w - u) + rmax);
    const double G0 = green::green1(e, cfg.w, cfg.v, u);
    const std::size_t R = r_grid.size();
    const long n = opt.n_samples;

    std::vector<std::uint64_t> hit_bits(n, 0), tail_bits(n, 0), undet_bits(n, 0);
    std::vector<double> live(n, 0.0);

    auto cfg_run = cfg;
    cfg_run.horizon = opt.horizon_cap;

    run_paths(n, opt.workers, [&](long path) {
        sle::PathEngine eng(cfg_run, opt.stream, static_cast<std::uint64_t>(path));
        std::vector<int> plus(R), minus(R);
        if (F == Geometry::Real)
            for (std::size_t i = 0; i < R; ++i) {
                plus[i] = eng.add_probe(u + r_grid[i], false, 0, 0, r_grid[i]);
                minus[i] = eng.add_probe(u - r_grid[i], false, 0, 0, r_grid[i]);
            }
        const double rres = *std::min_element(r_grid.begin(), r_grid.end());
        const int center = eng.add_probe(u, true, 0, 0, rres);

        bool escaped = false;
        double t = 0, chunk = 0.5, settle = sle::kNever;
        while (true) {
            t = std::min(t + chunk, opt.horizon_cap);
            chunk = std::min(chunk * 2, 64.0);
            eng.run_to(t);
            const auto& pc = eng.probe(center);
            if (F == Geometry::Real) {
                double last_death = 0;
                bool all_plus_dead = true;
                for (std::size_t i = 0; i < R && all_plus_dead; ++i) {
                    const auto& pp = eng.probe(plus[i]);
                    all_plus_dead = !pp.alive;
                    if (all_plus_dead) last_death = std::max(last_death, pp.tau);
                }
                if (all_plus_dead && settle == sle::kNever) settle = last_death;
                if (settle < sle::kNever && eng.time() > settle + 0.5) break;
            } else if (!pc.alive) {
                break;
            }
            if (pc.alive && (eng.W() - pc.U) / std::exp(pc.logD) > esc) {
                escaped = true;
                break;
            }
            if (t >= opt.horizon_cap) break;
        }

        std::vector<Status> st(R, Status::Pending);
        const auto& pc = eng.probe(center);
        if (F == Geometry::Real) {
            // exact monotonicity of swallow times across the ladder of
            // tracked points: isotonic pass shares each verdict consistently
            std::vector<int> ids = plus;
            ids.insert(ids.end(), minus.begin(), minus.end());
            std::sort(ids.begin(), ids.end(), [&](int a, int b) {
                return eng.probe(a).x0 < eng.probe(b).x0;
            });
            std::vector<double> hi(ids.size());
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const auto& p = eng.probe(ids[k]);
                hi[k] = p.alive ? sle::kNever : p.tau;
            }
            // deaths cascade upward: the front passing a point certainly
            // passed every point closer to w
            for (std::size_t k = 0; k + 1 < ids.size(); ++k)
                hi[k + 1] = std::min(hi[k + 1], hi[k]);
            auto death = [&](int id) {
                const auto it = std::lower_bound(
                    ids.begin(), ids.end(), id, [&](int a, int b) {
                        return eng.probe(a).x0 < eng.probe(b).x0;
                    });
                return hi[it - ids.begin()];
            };
            for (std::size_t i = 0; i < R; ++i) {
                const double tp = death(plus[i]);
                const double tm = death(minus[i]);
                if (tp == sle::kNever) {
                    st[i] = escaped ? Status::Tail : Status::Undetermined;
                } else {
                    const double m =
                        pair_margin(eng.probe(plus[i]), cfg.kappa, opt.hit_margin);
                    st[i] = tp + m < tm ? Status::Hit : Status::NoHit;
                }
            }
        } else {
            for (std::size_t i = 0; i < R; ++i) {
                if (pc.min_crad <= r_grid[i]) st[i] = Status::Hit;
                else if (!pc.alive) st[i] = Status::NoHit;
                else st[i] = escaped ? Status::Tail : Status::Undetermined;
            }
        }
        if (opt.tail_correction && escaped && pc.alive)
            live[path] = eng.green_weight(e, center) / G0;

        std::uint64_t hb = 0, tb = 0, ub = 0;
        for (std::size_t i = 0; i < R; ++i) {
            if (st[i] == Status::Hit) hb |= 1ull << i;
            if (st[i] == Status::Tail) tb |= 1ull << i;
            if (st[i] == Status::Undetermined) ub |= 1ull << i;
        }
        hit_bits[path] = hb;
        tail_bits[path] = tb;
        undet_bits[path] = ub;
    });

    HitTable out;
    out.r = r_grid;
    out.n = n;
    out.G0 = G0;
    out.hits.assign(R, 0);
    out.undetermined.assign(R, 0);
    out.live_mass.assign(R, 0.0);
    out.p.assign(R, 0.0);
    out.se.assign(R, 0.0);
    for (std::size_t i = 0; i < R; ++i) {
        double mass = 0, comp = 0;
        for (long path = 0; path < n; ++path) {
            if (hit_bits[path] >> i & 1) ++out.hits[i];
            if (undet_bits[path] >> i & 1) ++out.undetermined[i];
            if (tail_bits[path] >> i & 1) {
                const double y = live[path] - comp;
                const double t2 = mass + y;
                comp = (t2 - mass) - y;
                mass = t2;
            }
        }
        out.live_mass[i] = mass;
        const long neff = n - out.undetermined[i];
        const double phi = opt.tail_correction ? mass / neff : 0.0;
        const double raw = static_cast<double>(out.hits[i]) / neff;
        out.p[i] = raw / std::max(1.0 - phi, 1e-9);
        out.se[i] = std::sqrt(std::max(raw * (1 - raw), 1e-300) / neff) /
                    std::max(1.0 - phi, 1e-9);
    }
    return out;
}

FitResult fit_exponent(std::span<const double> r, std::span<const double> p,
                       std::span<const double> se) {
    std::vector<double> x, y, w;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (p[i] <= 0) continue;
        x.push_back(std::log(r[i]));
        y.push_back(std::log(p[i]));
        const double sig = se[i] > 0 ? se[i] / p[i] : 1e-10;
        w.push_back(1.0 / (sig * sig));
    }
    if (x.size() < 2)
        throw std::invalid_argument("fit_exponent: need >= 2 grid points with p > 0");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0) throw std::invalid_argument("fit_exponent: degenerate grid");
    FitResult f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.slope_se = std::sqrt(sw / det);
    return f;
}

FitResult fit_exponent(const HitTable& t) {
    long pos = 0;
    for (double pi : t.p) pos += pi > 0;
    if (pos < 4)
        throw std::invalid_argument("fit_exponent: need >= 4 grid points with p > 0");
    return fit_exponent(t.r, t.p, t.se);
}

CFEstimate estimate_CF(const HitTable& table, const green::ExponentSet& e,
                       double green1_value) {
    CFEstimate cf;
    cf.per_r.resize(table.r.size());
    for (std::size_t i = 0; i < table.r.size(); ++i)
        cf.per_r[i] = table.p[i] * std::pow(table.r[i], -e.alpha) / green1_value;
    const double rmin = *std::min_element(table.r.begin(), table.r.end());
    double lo = 1e300, hi = 0, acc = 0, wsum = 0;
    for (std::size_t i = 0; i < table.r.size(); ++i) {
        if (table.r[i] > 10 * rmin * (1 + 1e-9)) continue;
        const double c = cf.per_r[i];
        if (!(c > 0)) continue;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        const double sig = table.se[i] * std::pow(table.r[i], -e.alpha) / green1_value;
        const double w = 1.0 / (sig * sig);
        acc += w * c;
        wsum += w;
    }
    if (wsum == 0) throw std::invalid_argument("estimate_CF: all-zero hit table");
    cf.value = acc / wsum;
    cf.spread = (hi - lo) / cf.value;
    cf.converged = cf.spread <= 0.25;
    return cf;
}

double est1_bound(const green::ExponentSet& e, double w, std::span<const double> v,
                  double u, double r) {
    // u = v_m; v_0 = w; j0 = max{j : v_j >= u + r}
    if (!(r > 0) || !(r < std::abs(w - u)))
        throw std::invalid_argument("est1_bound: requires 0 < r < |w - u|");
    const std::size_t m = v.size();
    std::size_t j0 = 0;
    for (std::size_t j = 1; j <= m; ++j)
        if (v[j - 1] >= u + r) j0 = j;
    auto vat = [&](std::size_t j) { return j == 0 ? w : v[j - 1]; };
    double lg = e.gamma * e.sigma_j[j0] * std::log(r / std::abs(vat(j0) - u));
    for (std::size_t j = 0; j < j0; ++j)
        lg += e.gamma * e.sigma_j[j] *
              std::log(std::abs(vat(j + 1) - u) / std::abs(vat(j) - u));
    return std::exp(lg);
}

std::vector<BoundSweepCell> one_point_bound_sweep(std::span<const double> kappas,
                                                  std::span<const double> rhos,
                                                  std::span<const double> rs,
                                                  const RunOptions& opt) {
    std::vector<BoundSweepCell> cells;
    for (double kappa : kappas) {
        for (double rho : rhos) {
            sle::ProcessConfig cfg;
            cfg.kappa = kappa;
            cfg.rho = {rho};
            cfg.w = 1.0;
            cfg.v = {0.0};
            cfg.dt = opt.dt;
            cfg.seed = opt.seed;
            cfg.horizon = opt.horizon_cap;
            const auto e = cfg.exponents();
            // distance to the farthest force point itself: disc detector
            auto o = opt;
            o.tail_correction = false;  // G diverges at u = v_m
            HitTable t = estimate_hit_prob(cfg, cfg.v[0], {rs.begin(), rs.end()},
                                           Geometry::Disc, o);
            for (std::size_t i = 0; i < rs.size(); ++i) {
                BoundSweepCell c;
                c.kappa = kappa;
                c.rho1 = rho;
                c.r = rs[i];
                c.p_hat = t.p[i];
                c.se = t.se[i];
                c.bound = est1_bound(e, cfg.w, cfg.v, cfg.v[0], rs[i]);
                cells.push_back(c);
            }
        }
    }
    return cells;
}

TwoPointTable estimate_two_point(const sle::ProcessConfig& cfg, double u1, double u2,
                                 std::vector<double> r1_grid,
                                 std::vector<double> r2_grid, Geometry F, double C_R,
                                 const RunOptions& opt) {
    cfg.validate();
    if (!(u2 < u1)) throw std::invalid_argument("estimate_two_point: requires u2 < u1");
    const auto e = cfg.exponents();
    const double v_m = cfg.v.back();
    const double r1max = *std::max_element(r1_grid.begin(), r1_grid.end());
    const double r2max = *std::max_element(r2_grid.begin(), r2_grid.end());
    if (!(u1 + r1max < v_m) || !(u2 + r2max < u1 - r1max))
        throw std::invalid_argument("estimate_two_point: balls must be disjoint and left of v_m");
    if (F != Geometry::Real)
        throw std::invalid_argument("estimate_two_point: only F = R is implemented");
    const double esc1 = opt.escape_factor * (std::abs(cfg.w - u1) + r1max);
    const double esc2 = opt.escape_factor * (std::abs(cfg.w - u2) + r2max);
    const std::size_t A = r1_grid.size(), B = r2_grid.size();
    if (A > 31 || B > 31) throw std::invalid_argument("estimate_two_point: grids too large");
    const long n = opt.n_samples;

    std::vector<std::uint32_t> hit1(n, 0), hit2(n, 0), tail2(n, 0);
    std::vector<double> live2(n, 0.0);

    auto cfg_run = cfg;
    cfg_run.horizon = opt.horizon_cap;

    run_paths(n, opt.workers, [&](long path) {
        sle::PathEngine eng(cfg_run, opt.stream + 1, static_cast<std::uint64_t>(path));
        std::vector<int> p1(A), m1(A), p2(B), m2(B);
        for (std::size_t i = 0; i < A; ++i) {
            p1[i] = eng.add_probe(u1 + r1_grid[i], false, 0, 0, r1_grid[i]);
            m1[i] = eng.add_probe(u1 - r1_grid[i], false, 0, 0, r1_grid[i]);
        }
        for (std::size_t j = 0; j < B; ++j) {
            p2[j] = eng.add_probe(u2 + r2_grid[j], false, 0, 0, r2_grid[j]);
            m2[j] = eng.add_probe(u2 - r2_grid[j], false, 0, 0, r2_grid[j]);
        }
        const double rr1 = *std::min_element(r1_grid.begin(), r1_grid.end());
        const double rr2 = *std::min_element(r2_grid.begin(), r2_grid.end());
        const int c1 = eng.add_probe(u1, true, 0, 0, rr1);
        const int c2 = eng.add_probe(u2, true, 0, 0, rr2);
        std::vector<Status> s1(A, Status::Pending), s2(B, Status::Pending);
        long pending = static_cast<long>(A + B);
        double t = 0, chunk = 0.5;
        while (pending > 0) {
            t = std::min(t + chunk, opt.horizon_cap);
            chunk = std::min(chunk * 2, 64.0);
            eng.run_to(t);
            for (std::size_t i = 0; i < A; ++i)
                if (s1[i] == Status::Pending) {
                    s1[i] = pair_status(eng.probe(p1[i]), eng.probe(m1[i]),
                                        pair_margin(eng.probe(p1[i]), cfg.kappa,
                                                    opt.hit_margin));
                    if (s1[i] != Status::Pending) --pending;
                }
            for (std::size_t j = 0; j < B; ++j)
                if (s2[j] == Status::Pending) {
                    s2[j] = pair_status(eng.probe(p2[j]), eng.probe(m2[j]),
                                        pair_margin(eng.probe(p2[j]), cfg.kappa,
                                                    opt.hit_margin));
                    if (s2[j] != Status::Pending) --pending;
                }
            if (pending == 0) break;
            const auto& pc1 = eng.probe(c1);
            const auto& pc2 = eng.probe(c2);
            const bool esc_1 = !pc1.alive || (eng.W() - pc1.U) / std::exp(pc1.logD) > esc1;
            const bool esc_2 = pc2.alive && (eng.W() - pc2.U) / std::exp(pc2.logD) > esc2;
            if ((esc_1 && esc_2) || t >= opt.horizon_cap) {
                const bool escaped = esc_1 && esc_2;
                const double gw2 = opt.tail_correction && escaped && pc2.alive
                                       ? eng.green_weight(e, c2)
                                       : 0.0;
                for (std::size_t i = 0; i < A; ++i)
                    if (s1[i] == Status::Pending)
                        s1[i] = escaped ? Status::Tail : Status::Undetermined;
                for (std::size_t j = 0; j < B; ++j)
                    if (s2[j] == Status::Pending)
                        s2[j] = escaped ? Status::Tail : Status::Undetermined;
                live2[path] = gw2;
                break;
            }
        }
        std::uint32_t h1 = 0, h2 = 0, t2 = 0;
        for (std::size_t i = 0; i < A; ++i)
            if (s1[i] == Status::Hit) h1 |= 1u << i;
        for (std::size_t j = 0; j < B; ++j) {
            if (s2[j] == Status::Hit) h2 |= 1u << j;
            if (s2[j] == Status::Tail) t2 |= 1u << j;
        }
        hit1[path] = h1;
        hit2[path] = h2;
        tail2[path] = t2;
    });

    TwoPointTable out;
    out.r1 = r1_grid;
    out.r2 = r2_grid;
    out.n = n;
    out.hits.assign(A, std::vector<long>(B, 0));
    out.p.assign(A, std::vector<double>(B, 0.0));
    out.usable.assign(A, std::vector<bool>(B, false));
    for (std::size_t i = 0; i < A; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            long joint = 0;
            double corr = 0, comp = 0;
            for (long path = 0; path < n; ++path) {
                if ((hit1[path] >> i & 1) && (hit2[path] >> j & 1)) ++joint;
                if ((hit1[path] >> i & 1) && (tail2[path] >> j & 1)) {
                    // remaining second-point mass: C_R G_T(u2) r2^alpha
                    const double y =
                        C_R * live2[path] * std::pow(r2_grid[j], e.alpha) - comp;
                    const double tt = corr + y;
                    comp = (tt - corr) - y;
                    corr = tt;
                }
            }
            out.hits[i][j] = joint;
            out.p[i][j] = (static_cast<double>(joint) + corr) / n;
            out.usable[i][j] = joint >= 100;
        }
    }
    // extrapolate G2 from the smallest usable cells
    double acc = 0, wsum = 0, acc2 = 0;
    for (std::size_t i = 0; i < A; ++i)
        for (std::size_t j = 0; j < B; ++j) {
            if (!out.usable[i][j]) continue;
            const double scale = std::pow(r1_grid[i] * r2_grid[j], -e.alpha);
            const double g2 = out.p[i][j] * scale;
            const double se = std::sqrt(out.p[i][j] / n) * scale;
            const double w = 1.0 / (se * se);
            // prefer the asymptotic cells: weight down the largest radii
            const double pref =
                std::pow(r1max / r1_grid[i], 0.5) * std::pow(r2max / r2_grid[j], 0.5);
            acc += w * pref * g2;
            acc2 += w * pref * se * se * w * pref;
            wsum += w * pref;
        }
    if (wsum > 0) {
        out.G2_hat = acc / wsum;
        out.G2_se = std::sqrt(acc2) / wsum;
    }
    return out;
}

namespace {

// Fine-grid touch-down extraction shared by the content machinery. The grid
// covers [lo, hi] with the given spacing; hit(u, K, t) means
// tau(u + K h) <= t and tau(u + K h) < tau(u - K h) - margin.
struct TouchGrid {
    double lo = 0, spacing = 0;
    long count = 0;
    std::vector<int> probe_id;

    void build(sle::PathEngine& eng, double lo_, double hi, double spacing_,
               double eps_r) {
        lo = lo_;
        spacing = spacing_;
        count = std::lround((hi - lo) / spacing) + 1;
        probe_id.resize(count);
        for (long k = 0; k < count; ++k)
            probe_id[k] =
                eng.add_probe(lo + spacing * static_cast<double>(k), false, 0, 0, eps_r);
    }

    // monotone (nonincreasing in x) death times; deaths cascade upward
    std::vector<double> taus(const sle::PathEngine& eng) const {
        std::vector<double> hi(count);
        for (long k = 0; k < count; ++k) {
            const auto& p = eng.probe(probe_id[k]);
            hi[k] = p.alive ? sle::kNever : p.tau;
        }
        for (long k = 0; k + 1 < count; ++k) hi[k + 1] = std::min(hi[k + 1], hi[k]);
        return hi;
    }

    std::vector<double> margins(const sle::PathEngine& eng, double kappa,
                                double fixed_margin) const {
        std::vector<double> m(count);
        for (long k = 0; k < count; ++k)
            m[k] = pair_margin(eng.probe(probe_id[k]), kappa, fixed_margin);
        return m;
    }
};

long count_hits(const std::vector<double>& tau, const std::vector<double>& margin,
                long K, long lo_idx, long hi_idx, double t) {
    long hits = 0;
    const long n = static_cast<long>(tau.size());
    for (long k = std::max(lo_idx, K); k <= std::min(hi_idx, n - 1 - K); ++k) {
        const double tp = tau[k + K];
        if (tp <= t && tp + margin[k + K] < tau[k - K]) ++hits;
    }
    return hits;
}

double green_from_state(const green::ExponentSet& e, double W,
                        std::span<const double> V, double U, double D) {
    double lg = e.alpha * std::log(D) - e.alpha_j[0] * std::log(std::max(W - U, 1e-300));
    for (std::size_t j = 0; j < V.size(); ++j)
        lg -= e.alpha_j[j + 1] * std::log(std::max(V[j] - U, 1e-300));
    return std::exp(lg);
}

}  // namespace

ContentProfile minkowski_profile(const sle::ProcessConfig& cfg, const IntervalList& S,
                                 std::vector<double> r_grid, double C_R,
                                 const RunOptions& opt) {
    cfg.validate();
    if (S.empty()) throw std::invalid_argument("minkowski_profile: empty S");
    const auto e = cfg.exponents();
    const double v_m = cfg.v.back();
    for (const auto& [a, b] : S)
        if (!(a < b) || !(b <= v_m))
            throw std::invalid_argument("minkowski_profile: S must be ordered inside (-inf, v_m]");
    const double rmin = *std::min_element(r_grid.begin(), r_grid.end());
    const double rmax = *std::max_element(r_grid.begin(), r_grid.end());
    const double spacing = rmin / 10;
    // radii snap to grid multiples so the swallow-order criterion is exact
    std::vector<long> K(r_grid.size());
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        K[i] = std::max(1L, std::lround(r_grid[i] / spacing));
        r_grid[i] = K[i] * spacing;
    }
    const double lo = S.front().first - rmax - spacing;
    const double hi = std::min(S.back().second + rmax + spacing, cfg.w - 10 * spacing);
    const double esc = opt.escape_factor * (std::abs(cfg.w - lo) + rmax);
    const long n = opt.n_samples;

    const auto quad = green::build_quad_grid(S, v_m, 96);

    ContentProfile out;
    out.r = r_grid;
    out.samples.assign(r_grid.size(), std::vector<float>(n, 0.f));
    out.xi_samples.assign(n, 0.f);

    auto cfg_run = cfg;
    cfg_run.horizon = opt.horizon_cap;

    run_paths(n, opt.workers, [&](long path) {
        sle::PathEngine eng(cfg_run, opt.stream + 2, static_cast<std::uint64_t>(path));
        TouchGrid grid;
        grid.build(eng, lo, hi, spacing, rmin);
        std::vector<int> qnodes(quad.u.size());
        for (std::size_t q = 0; q < quad.u.size(); ++q)
            qnodes[q] = eng.add_probe(quad.u[q], true);
        const int sentinel = eng.add_probe(lo - spacing, true);

        double t = 0, chunk = 1.0;
        while (true) {
            t = std::min(t + chunk, opt.horizon_cap);
            chunk = std::min(chunk * 2, 128.0);
            eng.run_to(t);
            const auto& ps = eng.probe(sentinel);
            if (!ps.alive) break;  // everything right of it is resolved
            if ((eng.W() - ps.U) / std::exp(ps.logD) > esc) break;
            if (t >= opt.horizon_cap) break;
        }
        const auto tau = grid.taus(eng);
        const auto marg = grid.margins(eng, cfg.kappa, opt.hit_margin);
        for (std::size_t i = 0; i < r_grid.size(); ++i) {
            double y = 0;
            for (const auto& [a, b] : S) {
                const long ja = std::lround((a - lo) / spacing);
                const long jb = std::lround((b - lo) / spacing);
                y += static_cast<double>(
                    count_hits(tau, marg, K[i], ja, jb, sle::kNever));
            }
            out.samples[i][path] =
                static_cast<float>(y * spacing * std::pow(r_grid[i], -e.alpha));
        }
        // tail: remaining expected content through the Green martingale
        double mart = 0;
        for (std::size_t q = 0; q < quad.u.size(); ++q) {
            const auto& pq = eng.probe(qnodes[q]);
            if (!pq.alive) continue;
            mart += quad.weight[q] * eng.green_weight(e, qnodes[q]);
        }
        const std::size_t ismall =
            std::min_element(r_grid.begin(), r_grid.end()) - r_grid.begin();
        out.xi_samples[path] =
            out.samples[ismall][path] + static_cast<float>(C_R * mart);
    });

    out.meanY.resize(r_grid.size());
    out.seY.resize(r_grid.size());
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        out.meanY[i] = mean_se(out.samples[i], out.seY[i]);
    out.mean_absdiff.resize(r_grid.size() > 0 ? r_grid.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < r_grid.size(); ++i) {
        double acc = 0;
        for (long p = 0; p < n; ++p)
            acc += std::abs(out.samples[i][p] - out.samples[i + 1][p]);
        out.mean_absdiff[i] = acc / n;
    }
    out.xi_mean = mean_se(out.xi_samples, out.xi_se);
    return out;
}

MeasureProfile measure_profile(const sle::ProcessConfig& cfg, std::vector<double> u_grid,
                               double r_small, double C_R, const RunOptions& opt) {
    cfg.validate();
    if (u_grid.size() < 3) throw std::invalid_argument("measure_profile: grid too small");
    for (std::size_t i = 0; i + 1 < u_grid.size(); ++i)
        if (!(u_grid[i] < u_grid[i + 1]))
            throw std::invalid_argument("measure_profile: grid must ascend");
    const auto e = cfg.exponents();
    const double v_m = cfg.v.back();
    if (!(u_grid.back() <= v_m))
        throw std::invalid_argument("measure_profile: grid must end at or before v_m");
    const double spacing = r_small / 10;
    const long Kr = std::lround(r_small / spacing);
    const double lo = u_grid.front() - r_small - spacing;
    const double hi = std::min(v_m + r_small + spacing, cfg.w - 10 * spacing);
    const double esc = opt.escape_factor * (std::abs(cfg.w - lo) + r_small);
    const long n = opt.n_samples;

    const IntervalList full = {{u_grid.front(), v_m}};
    const auto quad = green::build_quad_grid(full, v_m, 128);

    MeasureProfile out;
    out.u = u_grid;
    out.theta_samples.assign(n, std::vector<float>(u_grid.size(), 0.f));

    auto cfg_run = cfg;
    cfg_run.horizon = opt.horizon_cap;

    run_paths(n, opt.workers, [&](long path) {
        sle::PathEngine eng(cfg_run, opt.stream + 3, static_cast<std::uint64_t>(path));
        TouchGrid grid;
        grid.build(eng, lo, hi, spacing, r_small);
        std::vector<int> qnodes(quad.u.size());
        for (std::size_t q = 0; q < quad.u.size(); ++q)
            qnodes[q] = eng.add_probe(quad.u[q], true);
        const int sentinel = eng.add_probe(lo - spacing, true);
        double t = 0, chunk = 1.0;
        while (true) {
            t = std::min(t + chunk, opt.horizon_cap);
            chunk = std::min(chunk * 2, 128.0);
            eng.run_to(t);
            const auto& ps = eng.probe(sentinel);
            if (!ps.alive) break;
            if ((eng.W() - ps.U) / std::exp(ps.logD) > esc) break;
            if (t >= opt.horizon_cap) break;
        }
        const auto tau = grid.taus(eng);
        const auto marg = grid.margins(eng, cfg.kappa, opt.hit_margin);
        const double scale = spacing * std::pow(r_small, -e.alpha);
        const long jend = std::lround((v_m - lo) / spacing);
        for (std::size_t i = 0; i < u_grid.size(); ++i) {
            const long ja = std::lround((u_grid[i] - lo) / spacing);
            double theta =
                scale * static_cast<double>(
                            count_hits(tau, marg, Kr, ja, jend, sle::kNever));
            for (std::size_t q = 0; q < quad.u.size(); ++q) {
                if (quad.u[q] < u_grid[i]) continue;
                const auto& pq = eng.probe(qnodes[q]);
                if (pq.alive)
                    theta += C_R * quad.weight[q] * eng.green_weight(e, qnodes[q]);
            }
            out.theta_samples[path][i] = static_cast<float>(theta);
        }
    });

    const std::size_t m = u_grid.size();
    out.mean_theta.resize(m);
    out.se_theta.resize(m);
    std::vector<float> col(n);
    for (std::size_t i = 0; i < m; ++i) {
        for (long p = 0; p < n; ++p) col[p] = out.theta_samples[p][i];
        out.mean_theta[i] = mean_se(col, out.se_theta[i]);
    }

    // atom diagnostic and Frostman energy on cell masses
    const double eps = e.d / 2;
    double atom_f = 0, atom_c = 0, fro_f = 0, fro_c = 0;
    for (long p = 0; p < n; ++p) {
        const auto& th = out.theta_samples[p];
        double mx_f = 0, mx_c = 0;
        std::vector<double> mass(m - 1), cell(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            mass[i] = std::max(0.0, static_cast<double>(th[i]) - th[i + 1]);
            cell[i] = 0.5 * (u_grid[i] + u_grid[i + 1]);
            mx_f = std::max(mx_f, mass[i]);
        }
        for (std::size_t i = 0; i + 2 < m; i += 2)
            mx_c = std::max(mx_c, mass[i] + mass[i + 1]);
        atom_f += mx_f;
        atom_c += mx_c;
        double ef = 0;
        for (std::size_t i = 0; i + 1 < m; ++i)
            for (std::size_t j = i + 1; j + 1 < m; ++j)
                ef += 2 * mass[i] * mass[j] / std::pow(cell[j] - cell[i], e.d - eps);
        fro_f += ef;
        // coarse cells (pairs)
        double ec = 0;
        for (std::size_t i = 0; i + 3 < m; i += 2)
            for (std::size_t j = i + 2; j + 1 < m; j += 2) {
                const double mi = mass[i] + (i + 1 < m - 1 ? mass[i + 1] : 0.0);
                const double mj = mass[j] + (j + 1 < m - 1 ? mass[j + 1] : 0.0);
                const double ci = 0.5 * (cell[i] + cell[std::min(i + 1, m - 2)]);
                const double cj = 0.5 * (cell[j] + cell[std::min(j + 1, m - 2)]);
                ec += 2 * mi * mj / std::pow(cj - ci, e.d - eps);
            }
        fro_c += ec;
    }
    out.atom_diag_fine = atom_f / n;
    out.atom_diag_coarse = atom_c / n;
    out.frostman = fro_c / n;
    out.frostman_refined = fro_f / n;
    return out;
}

DoobMeyerReport doob_meyer_check(const sle::ProcessConfig& cfg,
                                 std::pair<double, double> S, double u_point,
                                 std::vector<double> t_list, double C_R,
                                 double r_small, int quad_panels,
                                 const RunOptions& opt) {
    cfg.validate();
    const auto e = cfg.exponents();
    const double v_m = cfg.v.back();
    if (!(S.first < S.second) || !(S.second < v_m))
        throw std::invalid_argument("doob_meyer_check: S must be compact in (-inf, v_m)");
    std::sort(t_list.begin(), t_list.end());
    const double t_max = t_list.back();
    const double spacing = r_small / 10;
    const double lo = S.first - r_small - spacing;
    const double hi = S.second + r_small + spacing;
    const long n = opt.n_samples;
    const IntervalList Sl = {S};
    const auto quad = green::build_quad_grid(Sl, v_m, quad_panels);
    const double freeze = 0.1 * std::abs(u_point - v_m);

    DoobMeyerReport rep;
    rep.t = t_list;
    const std::size_t T = t_list.size();
    std::vector<std::vector<float>> mart(T, std::vector<float>(n, 0.f));
    std::vector<std::vector<float>> cont(T, std::vector<float>(n, 0.f));
    std::vector<std::vector<float>> mu(T, std::vector<float>(n, 0.f));

    auto cfg_run = cfg;
    cfg_run.horizon = std::max(cfg.horizon, t_max);

    run_paths(n, opt.workers, [&](long path) {
        sle::PathEngine eng(cfg_run, opt.stream + 4, static_cast<std::uint64_t>(path));
        TouchGrid grid;
        grid.build(eng, lo, hi, spacing, r_small);
        std::vector<int> qnodes(quad.u.size());
        for (std::size_t q = 0; q < quad.u.size(); ++q)
            qnodes[q] = eng.add_probe(quad.u[q], true);
        const int up = eng.add_probe(u_point, true, freeze);
        for (std::size_t k = 0; k < T; ++k) {
            eng.run_to(t_list[k]);
            double ms = 0;
            for (std::size_t q = 0; q < quad.u.size(); ++q) {
                const auto& pq = eng.probe(qnodes[q]);
                if (pq.alive)
                    ms += quad.weight[q] * eng.green_weight(e, qnodes[q]);
            }
            mart[k][path] = static_cast<float>(C_R * ms);
            const auto tau = grid.taus(eng);
            const auto marg = grid.margins(eng, cfg.kappa, opt.hit_margin);
            const long ja = std::lround((S.first - lo) / spacing);
            const long jb = std::lround((S.second - lo) / spacing);
            const long K = std::lround(r_small / spacing);
            cont[k][path] = static_cast<float>(
                spacing * std::pow(r_small, -e.alpha) *
                static_cast<double>(count_hits(tau, marg, K, ja, jb, t_list[k])));
            const auto& pu = eng.probe(up);
            double m_u;
            if (pu.frozen_t <= t_list[k]) {
                m_u = C_R * std::pow(pu.frozen_D, e.alpha) *
                      green_from_state(e, pu.frozen_W, pu.frozen_V, pu.frozen_U, 1.0);
            } else if (pu.alive) {
                m_u = eng.green_weight(e, up, C_R);
            } else {
                m_u = 0.0;  // swallowed without approaching: the weight dies to 0
            }
            mu[k][path] = static_cast<float>(m_u);
        }
    });

    rep.M0 = green::integrate_green1(e, cfg.w, cfg.v, quad, C_R);
    rep.Mu0 = C_R * green::green1(e, cfg.w, cfg.v, u_point);
    rep.mart_mean.resize(T);
    rep.mart_se.resize(T);
    rep.content_mean.resize(T);
    rep.content_se.resize(T);
    rep.sum_se.resize(T);
    rep.mu_mean.resize(T);
    rep.mu_se.resize(T);
    std::vector<float> sum(n);
    for (std::size_t k = 0; k < T; ++k) {
        rep.mart_mean[k] = mean_se(mart[k], rep.mart_se[k]);
        rep.content_mean[k] = mean_se(cont[k], rep.content_se[k]);
        for (long p = 0; p < n; ++p) sum[p] = mart[k][p] + cont[k][p];
        double se;
        mean_se(sum, se);
        rep.sum_se[k] = se;
        rep.mu_mean[k] = mean_se(mu[k], rep.mu_se[k]);
    }
    return rep;
}

}  // namespace slekrho::estimate
