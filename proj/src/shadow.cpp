#include "coupling/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coupling {

PiecewiseQuadratic e_fn(const Measure& mu, const Measure& nu, double v, double u) {
    double mass = mu.total_mass();
    v = std::clamp(v, 0.0, mass);
    u = std::clamp(u, v, mass);
    Measure mu_u = mu.restrict_left(u);
    Measure mu_v = mu.restrict_left(v);
    PiecewiseQuadratic e = put_potential(nu);
    e -= put_potential(mu_u);
    e += put_potential(mu_v);
    e.add_linear(-v, mu_v.mean());
    return e;
}

Measure shadow_measure(const Measure& mu, const Measure& nu, double v, double u,
                       const HullConfig& hull) {
    double mass = mu.total_mass();
    v = std::clamp(v, 0.0, mass);
    u = std::clamp(u, v, mass);
    if (u <= v) return {};
    Measure stratum = mu.restrict_left(u).subtract(mu.restrict_left(v));
    ConvexEnvelope env(e_fn(mu, nu, v, u), hull);
    Measure out;
    for (const auto& sg : env.segments()) {
        if (sg.contact)
            out += stratum.restrict_interval(sg.x0, sg.x1, true, true);
        else
            out += nu.restrict_interval(sg.x0, sg.x1, false, false);
    }
    return out;
}

ArrowPair arrows_right(const Measure& mu, const Measure& nu, double v, double l,
                       const HullConfig& hull) {
    ArrowPair a;
    a.x = mu.quantile_left(l);
    ConvexEnvelope env(e_fn(mu, nu, v, l), hull);
    auto [m, n] = env.tangent_extent(a.x);
    a.m = m;
    a.n = n;
    return a;
}

ArrowPair arrows_left(const Measure& mu, const Measure& nu, double v, double l,
                      const HullConfig& hull) {
    ArrowPair a;
    a.x = mu.quantile_right(l);
    ConvexEnvelope env(e_fn(mu, nu, l, v), hull);
    auto [m, n] = env.tangent_extent(a.x);
    a.m = m;
    a.n = n;
    return a;
}

namespace {

// Mass-coordinate breakpoints of mu inside (lo, hi), for scan grids.
std::vector<double> mass_breakpoints(const Measure& mu, double lo, double hi) {
    std::vector<double> bs;
    for (double k : mu.density_knots()) {
        double a = mu.cdf_left(k), b = mu.cdf(k);
        if (a > lo && a < hi) bs.push_back(a);
        if (b > lo && b < hi) bs.push_back(b);
    }
    return bs;
}

}  // namespace

double w_bar(const Measure& mu, const Measure& nu, double v, double u,
             const ScanConfig& cfg) {
    double mass = mu.total_mass();
    if (u >= mass) return mass;
    double span = std::max(nu.max_support() - nu.min_support(), 1e-12) +
                  std::max(mu.max_support() - mu.min_support(), 0.0);
    double eps = cfg.pred_eps_rel * span;
    auto pred = [&](double w) {
        ArrowPair a = arrows_right(mu, nu, v, w, cfg.hull);
        return a.n <= mu.quantile_right(w) + eps;
    };
    std::vector<double> grid = mass_breakpoints(mu, u, mass);
    double step = mass / cfg.scan_n;
    for (double w = u + step; w < mass; w += step) grid.push_back(w);
    // refine toward the top so crossings inside the last step are not missed
    for (double d = 0.5 * (mass - u); d > 1e-13 * mass; d *= 0.5)
        grid.push_back(mass - d);
    grid.push_back(mass);
    std::sort(grid.begin(), grid.end());
    // just above u the arrows have not opened yet and the predicate is
    // vacuously near-true; keep a guard band clear of that regime
    double lo = u + std::max(16.0 * cfg.w_tol_rel, 1e-9) * mass;
    double hi = mass;
    bool found = false;
    for (double w : grid) {
        if (w <= lo) continue;
        if (pred(w)) {
            hi = w;
            found = true;
            break;
        }
        lo = w;
    }
    if (!found) return mass;
    double tol = cfg.w_tol_rel * mass;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double w_under(const Measure& mu, const Measure& nu, double u, double v,
               const ScanConfig& cfg) {
    if (u <= 0.0) return 0.0;
    double mass = mu.total_mass();
    double span = std::max(nu.max_support() - nu.min_support(), 1e-12) +
                  std::max(mu.max_support() - mu.min_support(), 0.0);
    double eps = cfg.pred_eps_rel * span;
    auto pred = [&](double w) {
        ArrowPair a = arrows_left(mu, nu, v, w, cfg.hull);
        return a.m >= mu.quantile_left(w) - eps;
    };
    std::vector<double> grid = mass_breakpoints(mu, 0.0, u);
    double step = mass / cfg.scan_n;
    for (double w = u - step; w > 0.0; w -= step) grid.push_back(w);
    // refine toward zero so a return region inside the last step is found
    for (double d = 0.5 * std::min(u, step); d > 1e-13 * mass; d *= 0.5)
        grid.push_back(d);
    grid.push_back(0.0);
    std::sort(grid.begin(), grid.end(), std::greater<double>());
    // mirror of the guard band in w_bar
    double hi = u - std::max(16.0 * cfg.w_tol_rel, 1e-9) * mass;
    double lo = 0.0;
    bool found = false;
    for (double w : grid) {
        if (w >= hi) continue;
        if (w > 0.0 && pred(w)) {
            lo = w;
            found = true;
            break;
        }
        hi = w;
    }
    if (!found) return 0.0;
    double tol = cfg.w_tol_rel * mass;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

namespace {

// Quantile strata of a measure: constant (atom) or linear (density cell)
// stretches of the quantile function, with prefix masses and moments.
struct QuantileProfile {
    struct Stratum {
        double c0, c1;  // mass range
        double x0, x1;  // quantile range (x0 == x1 for atoms)
    };
    std::vector<Stratum> strata;
    std::vector<double> moment_prefix;  // integral of the quantile up to stratum start

    explicit QuantileProfile(const Measure& m) {
        const auto& ks = m.density_knots();
        const auto& ds = m.densities();
        for (size_t i = 0; i < ks.size(); ++i) {
            double c = m.cdf_left(ks[i]);
            double am = m.mass_at(ks[i]);
            if (am > 0.0) strata.push_back({c, c + am, ks[i], ks[i]});
            if (i + 1 < ks.size() && ds[i] > 0.0)
                strata.push_back({c + am, m.cdf_left(ks[i + 1]), ks[i], ks[i + 1]});
        }
        moment_prefix.assign(strata.size() + 1, 0.0);
        for (size_t i = 0; i < strata.size(); ++i)
            moment_prefix[i + 1] =
                moment_prefix[i] +
                0.5 * (strata[i].x0 + strata[i].x1) * (strata[i].c1 - strata[i].c0);
    }

    // integral of the quantile function over mass window [a, b]
    double moment(double a, double b) const {
        if (!(b > a)) return 0.0;
        double out = 0.0;
        size_t i = std::upper_bound(strata.begin(), strata.end(), a,
                                    [](double v, const Stratum& s) { return v < s.c1; }) -
                   strata.begin();
        for (; i < strata.size() && strata[i].c0 < b; ++i) {
            const Stratum& s = strata[i];
            double lo = std::max(a, s.c0), hi = std::min(b, s.c1);
            if (!(hi > lo)) continue;
            double w = s.c1 - s.c0;
            double xl = s.x0 + (s.x1 - s.x0) * (lo - s.c0) / w;
            double xh = s.x0 + (s.x1 - s.x0) * (hi - s.c0) / w;
            out += 0.5 * (xl + xh) * (hi - lo);
        }
        return out;
    }
};

}  // namespace

Measure shadow_oracle_atomic(const Measure& mu, const Measure& nu, double v, double u,
                             int n_atoms) {
    double mass = mu.total_mass();
    v = std::clamp(v, 0.0, mass);
    u = std::clamp(u, v, mass);
    if (u <= v || n_atoms < 1) return {};
    QuantileProfile mu_prof(mu);
    QuantileProfile nu_prof(nu);
    double parcel = u - v;
    double am = parcel / n_atoms;

    // Alive part of nu, as disjoint intervals in nu's own mass coordinate.
    std::vector<std::pair<double, double>> alive{{0.0, nu.total_mass()}};

    auto alive_total = [&]() {
        double t = 0.0;
        for (auto& iv : alive) t += iv.second - iv.first;
        return t;
    };
    // Moment of the window [t, t+m] of the remainder (in remainder mass
    // coordinates), mapped through the alive set.
    auto window_moment = [&](double t, double m) {
        double out = 0.0;
        double pos = 0.0;
        for (auto& iv : alive) {
            double w = iv.second - iv.first;
            double lo = std::max(t - pos, 0.0), hi = std::min(t + m - pos, w);
            if (hi > lo) out += nu_prof.moment(iv.first + lo, iv.first + hi);
            pos += w;
            if (pos >= t + m) break;
        }
        return out;
    };
    auto remove_window = [&](double t, double m) {
        std::vector<std::pair<double, double>> next;
        double pos = 0.0;
        for (auto& iv : alive) {
            double w = iv.second - iv.first;
            double lo = std::max(t - pos, 0.0), hi = std::min(t + m - pos, w);
            if (hi > lo) {
                if (lo > 0.0) next.push_back({iv.first, iv.first + lo});
                if (hi < w) next.push_back({iv.first + hi, iv.second});
            } else {
                next.push_back(iv);
            }
            pos += w;
        }
        alive = std::move(next);
    };

    for (int i = 0; i < n_atoms; ++i) {
        double c0 = v + parcel * i / n_atoms;
        double c1 = v + parcel * (i + 1) / n_atoms;
        double x = mu_prof.moment(c0, c1) / (c1 - c0);
        double rem = alive_total();
        double m = std::min(am, rem);
        if (m <= 0.0) break;
        double tlo = 0.0, thi = rem - m;
        // window moment is increasing in the window's start
        for (int it = 0; it < 60 && thi - tlo > 1e-14 * (rem + 1.0); ++it) {
            double mid = 0.5 * (tlo + thi);
            if (window_moment(mid, m) < x * m)
                tlo = mid;
            else
                thi = mid;
        }
        double t = 0.5 * (tlo + thi);
        remove_window(t, m);
    }

    // Everything removed from nu is the embedded image.
    std::vector<std::pair<double, double>> removed;
    double pos = 0.0;
    for (auto& iv : alive) {
        if (iv.first > pos) removed.push_back({pos, iv.first});
        pos = iv.second;
    }
    if (nu.total_mass() > pos) removed.push_back({pos, nu.total_mass()});
    return nu.restrict_quantile_set(removed);
}

}  // namespace coupling
