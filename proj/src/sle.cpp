#include "slekrho/sle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace slekrho::sle {

double ProcessConfig::rho_sum() const {
    double s = 0;
    for (double r : rho) s += r;
    return s;
}

void ProcessConfig::validate() const {
    if (rho.size() != v.size())
        throw std::invalid_argument("config: rho and v must have equal length");
    if (!(kappa > 0)) throw std::invalid_argument("config: kappa must be > 0");
    if (!(dt > 0) || !(horizon > 0))
        throw std::invalid_argument("config: dt and horizon must be > 0");
    double prev = w;
    for (double vj : v) {
        if (vj > prev)
            throw std::invalid_argument("config: need v_m <= ... <= v_1 <= w (left side)");
        prev = vj;
    }
    (void)exponents();  // admissibility: sigma_j > 0, rho_sum > max(-2, kappa/2-4)
}

PathEngine::PathEngine(const ProcessConfig& cfg, std::uint64_t stream,
                       std::uint64_t path, EngineOptions opt)
    : cfg_(cfg), opt_(opt), noise_(cfg.seed, stream, path), dt_(cfg.dt) {
    cfg_.validate();
    base_pow_ = opt_.max_refine_pow;
    qdt_ = dt_ / static_cast<double>(1ull << base_pow_);
    eps_base_ = opt_.eps_mult * std::sqrt(cfg_.kappa * dt_);
    eps_min_ = 8 * std::sqrt(cfg_.kappa * qdt_);
    W_ = cfg_.w;
    group_of_.resize(cfg_.rho.size());
    for (std::size_t j = 0; j < cfg_.v.size(); ++j) {
        if (!group_value_.empty() && cfg_.v[j] == group_value_.back()) {
            group_rho_.back() += cfg_.rho[j];
        } else {
            group_value_.push_back(cfg_.v[j]);
            group_rho_.push_back(cfg_.rho[j]);
        }
        group_of_[j] = static_cast<int>(group_value_.size()) - 1;
    }
    if (group_value_.size() == 1) bessel_X_ = W_ - group_value_[0];
    front_X_ = 0;  // c_0 = W(0)
    front_min_ = cfg_.w;
    if (opt_.record) {
        opt_.coarsen = false;
        record_.t.push_back(0);
        record_.W.push_back(W_);
        record_.V.assign(cfg_.rho.size(), {});
        for (std::size_t j = 0; j < cfg_.rho.size(); ++j)
            record_.V[j].push_back(cfg_.v[j]);
    }
}

double PathEngine::time() const { return static_cast<double>(n_) * qdt_; }

std::vector<double> PathEngine::V_all() const {
    std::vector<double> out(group_of_.size());
    for (std::size_t j = 0; j < group_of_.size(); ++j) out[j] = group_value_[group_of_[j]];
    return out;
}

double PathEngine::probe_threshold(const Probe& p) const {
    if (p.eps_r <= 0) return eps_base_;
    return p.thr;
}

int PathEngine::required_pow(double gap, const Probe& p) const {
    // step small enough that one increment cannot jump the detection window:
    // h <= gap^2 / (64 kappa), floored at the probe's own resolution scale
    double floor_h = dt_;
    if (p.eps_r > 0) {
        const double thr = probe_threshold(p);
        floor_h = std::max(qdt_, thr * thr / (64 * cfg_.kappa));
    }
    const double hmax = opt_.coarsen
                            ? dt_ * static_cast<double>(1ull << opt_.max_coarsen_pow)
                            : dt_;
    const double h = std::clamp(gap * gap / (64 * cfg_.kappa), floor_h, hmax);
    const int k = static_cast<int>(std::floor(std::log2(h / qdt_)));
    return std::clamp(k, 0, base_pow_ + opt_.max_coarsen_pow);
}

int PathEngine::add_probe(double x, bool need_deriv, double freeze_level,
                          double logD0, double eps_r) {
    if (!(x < cfg_.w))
        throw std::invalid_argument("add_probe: tracked points must lie left of w");
    if (n_ != 0) throw std::logic_error("add_probe: register probes before stepping");
    Probe p;
    p.x0 = x;
    p.U = x;
    p.lnz = std::log(cfg_.w - x);  // zeta_0 = c_0 - x = w - x
    p.logD = logD0;
    p.eps_r = eps_r;
    p.thr = std::max(0.25 * eps_r * std::exp(logD0), eps_min_);
    p.need_deriv = need_deriv || eps_r > 0;
    p.freeze_level = freeze_level;
    p.last_t = 0;
    p.last_W = cfg_.w;
    const int id = static_cast<int>(probes_.size());
    probes_.push_back(p);
    place_in_bucket(id, required_pow(cfg_.w - x, p));
    ++alive_count_;
    return id;
}

void PathEngine::place_in_bucket(int id, int k) {
    if (bucket_.size() <= static_cast<std::size_t>(k)) bucket_.resize(k + 1);
    probes_[id].stride_pow = k;
    probes_[id].bucket_pos = static_cast<int>(bucket_[k].size());
    bucket_[k].push_back(id);
}

void PathEngine::remove_from_bucket(int id) {
    Probe& p = probes_[id];
    auto& b = bucket_[p.stride_pow];
    const int last = b.back();
    b[p.bucket_pos] = last;
    probes_[last].bucket_pos = p.bucket_pos;
    b.pop_back();
}

void PathEngine::step_forces(double h) {
    const double kap = cfg_.kappa;
    if (group_value_.size() == 1) {
        const double rho = group_rho_[0];
        int sub = 1;
        while (bessel_X_ * bessel_X_ < 8 * kap * (h / sub) && sub < 256) sub *= 16;
        const double hs = h / sub;
        double V = group_value_[0];
        double X = bessel_X_;
        for (int i = 0; i < sub; ++i) {
            if (X <= 0) {
                // exact mean-square startup from the sentinel gap
                X = std::sqrt((kap + 2 * (rho + 2)) * hs);
                continue;
            }
            const double dV = -2 * hs / X;
            X += std::sqrt(kap * hs) * noise_.normal() + (rho + 2) * hs / X;
            V += dV;
            if (X < 0) X = -X;
            if (X < 1e-14) X = 1e-14;
        }
        const double dW_total = (V + X) - W_;
        advance_front(dW_total, h, sub);
        bessel_X_ = X;
        group_value_[0] = V;
        W_ = V + X;
        return;
    }

    int sub = 1;
    {
        const double gap0 = std::max(W_ - group_value_[0], 0.0);
        while (gap0 * gap0 < 8 * kap * (h / sub) && sub < 256) sub *= 16;
    }
    const double hs = h / sub;
    const double eps_refl = opt_.eps_mult * std::sqrt(kap * hs);
    const double W_before = W_;
    for (int i = 0; i < sub && group_value_.size() > 1; ++i) {
        double drift = 0;
        for (std::size_t g = 0; g < group_value_.size(); ++g)
            drift += group_rho_[g] / std::max(W_ - group_value_[g], 1e-12);
        const double W_old = W_;
        W_ += std::sqrt(kap * hs) * noise_.normal() + drift * hs;
        for (std::size_t g = 0; g < group_value_.size(); ++g)
            group_value_[g] += 2 * hs / std::min(group_value_[g] - W_old, -1e-12);
        if (W_ - group_value_[0] < eps_refl) W_ = group_value_[0] + eps_refl;
        // the reflected scheme brings images exponentially close but never
        // exactly together; collapse once the spacing is far below the
        // driver gap floor
        const double merge_eps = eps_refl / 100;
        for (std::size_t g = 0; g + 1 < group_value_.size();) {
            if (group_value_[g] <= group_value_[g + 1] + merge_eps) {
                const double merged = 0.5 * (group_value_[g] + group_value_[g + 1]);
                group_value_[g] = merged;
                group_rho_[g] += group_rho_[g + 1];
                group_value_.erase(group_value_.begin() + g + 1);
                group_rho_.erase(group_rho_.begin() + g + 1);
                int ja = -1, jb = -1;
                for (std::size_t j = 0; j < group_of_.size(); ++j) {
                    if (group_of_[j] == static_cast<int>(g) && ja < 0) ja = static_cast<int>(j);
                    if (group_of_[j] == static_cast<int>(g + 1) && jb < 0) jb = static_cast<int>(j);
                }
                merge_events_.push_back({time() + (i + 1) * hs, ja, jb});
                for (auto& gj : group_of_)
                    if (gj > static_cast<int>(g)) --gj;
            } else {
                ++g;
            }
        }
        if (group_value_.size() == 1) {
            bessel_X_ = std::max(W_ - group_value_[0], 1e-14);
            break;
        }
    }
    advance_front(W_ - W_before, h, sub);
}

// c_t tracked through its gap X_c = W - c_t >= 0: dX_c = dW + 2dt/X_c.
// Against the linear ramp the gap stalls at 2/|W'| instead of crossing zero;
// the update subdivides adaptively, renewing at the slit scale 2 sqrt(hs)
// whenever the image touches the driver, and maintains the running minimum
// of c_t = W - X_c that the swallow verdicts compare against.
void PathEngine::advance_front(double dW_total, double h, int /*sub*/) {
    double X = front_X_;
    double done = 0;
    const double W_start = W_ - dW_total;
    const double slope = dW_total / h;
    const double hfloor = h * 0x1.0p-20;
    while (done < h) {
        double hs = h - done;
        while (X * X < 8 * hs && hs > hfloor) hs *= 0.25;
        if (X * X < 2 * hs) {
            X = 2 * std::sqrt(hs);  // touching: renew at the slit scale
        } else {
            X += slope * hs + 2 * hs / X;
            if (X < 0) X = -X;
        }
        done += hs;
        const double C = W_start + slope * done - X;
        if (C < front_min_) front_min_ = C;
    }
    front_X_ = X;
}

void PathEngine::update_probe(int id) {
    Probe& p = probes_[id];
    const double t_now = time();
    const double delta = t_now - p.last_t;
    if (delta <= 0) return;

    auto retire = [&](double tau) {
        p.tau = tau;
        if (p.tau_lo == kNever) p.tau_lo = tau;
        p.alive = false;
        remove_from_bucket(id);
        --alive_count_;
    };

    double g_now;
    if (p.eps_r > 0) {
        // front-separation mode: zeta = c_t-image - U contracts monotonically,
        //   dln zeta = -2 dt/(X_c (X_c + zeta)),
        // and diverges to -inf exactly when the front rides over x. Working in
        // the log keeps the verdict scale-free: the overall compression of the
        // map cancels between the front and the point.
        const double zeta = std::exp(p.lnz);
        const double gap = front_X_ + zeta;
        p.lnz -= 2 * delta / (std::max(front_X_, 1e-14) * gap);
        p.logD -= 2 * delta / (gap * gap);
        if (p.lnz < -69.0) {  // the front rode over x
            p.tau_lo = p.last_t;
            retire(t_now);
            return;
        }
        p.U = W_ - front_X_ - std::exp(p.lnz);
        g_now = front_X_ + std::exp(p.lnz);
    } else {
        const double g_start = p.last_W - p.U;
        const double g_drv = W_ - p.U;  // driver motion before the probe moves
        const double thr = eps_base_;
        if (g_drv <= thr) {
            const double denom = g_start - g_drv;
            const double frac =
                denom > 0 ? std::clamp((g_start - thr) / denom, 0.0, 1.0) : 1.0;
            p.tau_lo = p.last_t;
            retire(p.last_t + frac * delta);
            return;
        }
        const double g_mid = 0.5 * (g_start + g_drv);
        p.U -= 2 * delta / g_mid;
        if (p.need_deriv) p.logD -= 2 * delta / (g_mid * g_mid);
        g_now = W_ - p.U;
        if (g_now <= thr) {
            p.tau_lo = p.last_t;
            retire(t_now);
            return;
        }
    }
    if (p.eps_r > 0 && g_now * g_now >= 64 * cfg_.kappa * dt_)
        p.thr = std::max(0.25 * p.eps_r * std::exp(p.logD), eps_min_);
    if (p.need_deriv) {
        const double crad = g_now / std::exp(p.logD);
        if (crad < p.min_crad) p.min_crad = crad;
        if (p.freeze_level > 0 && p.frozen_t == kNever && crad <= p.freeze_level) {
            p.frozen_t = t_now;
            p.frozen_U = p.eps_r > 0 ? W_ - g_now : p.U;
            p.frozen_D = std::exp(p.logD);
            p.frozen_W = W_;
            p.frozen_V = V_all();
        }
    }
    p.last_t = t_now;
    p.last_W = W_;
    const int k = required_pow(g_now, p);
    if (k != p.stride_pow) {
        remove_from_bucket(id);
        place_in_bucket(id, k);
    }
}

void PathEngine::run_to(double t_target) {
    const std::uint64_t target =
        static_cast<std::uint64_t>(std::llround(t_target / dt_)) << base_pow_;
    std::vector<int> due;
    while (n_ < target) {
        int j = base_pow_;  // step = dt unless forces allow coarsening
        if (opt_.coarsen) {
            const double gap0 = group_value_.size() == 1
                                    ? bessel_X_
                                    : std::max(W_ - group_value_[0], 0.0);
            const double h_force =
                std::clamp(gap0 * gap0 / (64 * cfg_.kappa), dt_,
                           dt_ * static_cast<double>(1ull << opt_.max_coarsen_pow));
            j = base_pow_ + static_cast<int>(std::floor(std::log2(h_force / dt_)));
        }
        if (n_ != 0) j = std::min<int>(j, std::countr_zero(n_));
        const std::uint64_t room = target - n_;
        j = std::min<int>(j, 63 - std::countl_zero(room));
        // probes constrain the step and may demand refinement below dt
        for (std::size_t k = 0; k < bucket_.size() && static_cast<int>(k) < j; ++k)
            if (!bucket_[k].empty()) {
                j = static_cast<int>(k);
                break;
            }
        step_forces(qdt_ * static_cast<double>(1ull << j));
        n_ += (1ull << j);
        ++steps_;

        const int tz = std::countr_zero(n_);
        due.clear();
        for (std::size_t k = 0; k < bucket_.size() && static_cast<int>(k) <= tz; ++k)
            due.insert(due.end(), bucket_[k].begin(), bucket_[k].end());
        for (int id : due) update_probe(id);

        if (opt_.record && std::countr_zero(n_) >= base_pow_) {
            record_.t.push_back(time());
            record_.W.push_back(W_);
            for (std::size_t jj = 0; jj < group_of_.size(); ++jj)
                record_.V[jj].push_back(group_value_[group_of_[jj]]);
        }
    }
}

double PathEngine::green_weight(const green::ExponentSet& e, int id, double C_F) const {
    const Probe& p = probes_[id];
    if (!p.alive) return 0.0;
    if (!p.need_deriv)
        throw std::logic_error("green_weight: probe was not tracking its derivative");
    const double U = p.U;
    double lg = e.alpha * p.logD - e.alpha_j[0] * std::log(std::max(W_ - U, 1e-300));
    for (std::size_t j = 0; j < group_of_.size(); ++j)
        lg -= e.alpha_j[j + 1] *
              std::log(std::max(group_value_[group_of_[j]] - U, 1e-300));
    return C_F * std::exp(lg);
}

DrivingPath simulate_driving(const ProcessConfig& cfg, std::uint64_t path_index) {
    EngineOptions opt;
    opt.record = true;
    opt.coarsen = false;
    PathEngine eng(cfg, 0, path_index, opt);
    eng.run_to(cfg.horizon);
    DrivingPath path = eng.recorded();
    path.merges = eng.merges();
    return path;
}

HitResult hit_interval_detector(const ProcessConfig& cfg, double u, double r,
                                std::uint64_t path_index) {
    cfg.validate();
    if (cfg.v.empty() || !(u + r < cfg.v.back()))
        throw std::invalid_argument("hit_interval_detector: requires u + r < v_m");
    PathEngine eng(cfg, 1, path_index, {});
    const int plus = eng.add_probe(u + r, false, 0, 0, r);
    const int minus = eng.add_probe(u - r, false, 0, 0, r);
    const int center = eng.add_probe(u, true);
    const double esc = 10 * (std::abs(cfg.w - u) + r);

    double t = 0;
    double chunk = 0.5;
    while (t < cfg.horizon) {
        t = std::min(t + chunk, cfg.horizon);
        chunk = std::min(chunk * 2, 64.0);
        eng.run_to(t);
        const auto& pp = eng.probe(plus);
        const auto& pm = eng.probe(minus);
        if (!pp.alive) {
            if (pm.alive && pm.last_t >= pp.tau) return {true, false, pp.tau};
            if (!pm.alive) return {pp.tau < pm.tau_lo, false, pp.tau};
        }
        const auto& pc = eng.probe(center);
        if (pc.alive) {
            const double crad = (eng.W() - pc.U) / std::exp(pc.logD);
            if (crad > esc) return {false, false, kNever};
        }
    }
    const auto& pp = eng.probe(plus);
    if (!pp.alive) {
        const auto& pm = eng.probe(minus);
        if (pm.alive || pp.tau < pm.tau_lo) return {!pm.alive || pm.last_t >= pp.tau, false, pp.tau};
        return {false, false, pp.tau};
    }
    return {false, true, kNever};
}

ProcessConfig restart_state(const ProcessConfig& cfg, const DrivingPath& path, double t) {
    if (path.t.empty() || t > path.t.back() + 1e-12)
        throw std::invalid_argument("restart_state: t beyond recorded horizon");
    std::size_t k = 0;
    while (k + 1 < path.t.size() && path.t[k + 1] <= t + 1e-12) ++k;
    ProcessConfig out = cfg;
    out.w = path.W[k];
    out.v.resize(path.V.size());
    for (std::size_t j = 0; j < path.V.size(); ++j) {
        const double vj = path.V[j][k];
        out.v[j] = vj >= out.w - 1e-12 ? out.w : vj;
    }
    return out;
}

}  // namespace slekrho::sle
