#include "coupling/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coupling {

PiecewiseQuadratic::PiecewiseQuadratic(std::vector<double> knots, std::vector<Coef> coefs)
    : knots_(std::move(knots)), coefs_(std::move(coefs)) {
    if (coefs_.size() != knots_.size() + 1)
        throw std::invalid_argument("piecewise quadratic: coef/knot mismatch");
    for (size_t i = 0; i + 1 < knots_.size(); ++i)
        if (!(knots_[i] < knots_[i + 1]))
            throw std::invalid_argument("piecewise quadratic: knots not increasing");
}

size_t PiecewiseQuadratic::piece_index(double x) const {
    return std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin();
}

double PiecewiseQuadratic::deriv_right(double x) const {
    return coefs_[piece_index(x)].slope(x);
}

double PiecewiseQuadratic::deriv_left(double x) const {
    size_t i = std::lower_bound(knots_.begin(), knots_.end(), x) - knots_.begin();
    return coefs_[i].slope(x);
}

void PiecewiseQuadratic::add_linear(double slope, double intercept) {
    for (auto& q : coefs_) {
        q.b += slope;
        q.c += intercept;
    }
}

void PiecewiseQuadratic::negate() {
    for (auto& q : coefs_) {
        q.a = -q.a;
        q.b = -q.b;
        q.c = -q.c;
    }
}

PiecewiseQuadratic& PiecewiseQuadratic::combine(const PiecewiseQuadratic& o, double sign) {
    std::vector<double> ks = knots_;
    ks.insert(ks.end(), o.knots_.begin(), o.knots_.end());
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    std::vector<Coef> cs(ks.size() + 1);
    for (size_t p = 0; p <= ks.size(); ++p) {
        double rep;
        if (ks.empty())
            rep = 0.0;
        else if (p == 0)
            rep = ks.front() - 1.0;
        else if (p == ks.size())
            rep = ks.back() + 1.0;
        else
            rep = 0.5 * (ks[p - 1] + ks[p]);
        const Coef& q1 = coefs_[piece_index(rep)];
        const Coef& q2 = o.coefs_[o.piece_index(rep)];
        cs[p] = {q1.a + sign * q2.a, q1.b + sign * q2.b, q1.c + sign * q2.c};
    }
    knots_ = std::move(ks);
    coefs_ = std::move(cs);
    return *this;
}

std::pair<double, double> PiecewiseQuadratic::min_on(double lo, double hi) const {
    if (!std::isfinite(lo)) lo = knots_.empty() ? -1.0 : knots_.front() - 1.0;
    if (!std::isfinite(hi)) hi = knots_.empty() ? 1.0 : knots_.back() + 1.0;
    double best_x = lo, best_v = kInf;
    auto consider = [&](double x) {
        if (x < lo || x > hi) return;
        double v = (*this)(x);
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    };
    consider(lo);
    consider(hi);
    for (double k : knots_) consider(k);
    for (size_t p = 0; p < coefs_.size(); ++p) {
        const Coef& q = coefs_[p];
        if (q.a > 0.0) {
            double v = -q.b / (2.0 * q.a);
            if (v >= piece_lo(p) && v <= piece_hi(p)) consider(v);
        }
    }
    return {best_x, best_v};
}

PiecewiseQuadratic put_potential(const Measure& chi) {
    const auto& ks = chi.density_knots();
    if (ks.empty()) return PiecewiseQuadratic();
    const auto& dens = chi.densities();
    size_t n = ks.size();
    std::vector<PiecewiseQuadratic::Coef> cs(n + 1);
    cs[0] = {0.0, 0.0, 0.0};
    double pv = 0.0;  // P at current knot
    for (size_t i = 0; i + 1 < n; ++i) {
        double f = chi.cdf(ks[i]);
        double rho = dens[i];
        // P(x) = pv + f (x - k_i) + rho (x - k_i)^2 / 2 on [k_i, k_{i+1}]
        double a = 0.5 * rho;
        double b = f - rho * ks[i];
        double c = pv - f * ks[i] + 0.5 * rho * ks[i] * ks[i];
        cs[i + 1] = {a, b, c};
        double w = ks[i + 1] - ks[i];
        pv += f * w + 0.5 * rho * w * w;
    }
    double total = chi.total_mass();
    cs[n] = {0.0, total, pv - total * ks.back()};
    return PiecewiseQuadratic(ks, std::move(cs));
}

PiecewiseQuadratic call_potential(const Measure& chi) {
    PiecewiseQuadratic c = put_potential(chi);
    c.add_linear(-chi.total_mass(), chi.mean());
    return c;
}

double put_call_gap(const Measure& chi, double k) {
    PiecewiseQuadratic p = put_potential(chi);
    PiecewiseQuadratic c = call_potential(chi);
    return p(k) - c(k) - (k * chi.total_mass() - chi.mean());
}

PiecewiseQuadratic dispersion(const Measure& mu, const Measure& nu) {
    PiecewiseQuadratic d = put_potential(nu);
    d -= put_potential(mu);
    return d;
}

ConvexOrderReport check_convex_order(const Measure& mu, const Measure& nu, double tol) {
    ConvexOrderReport r;
    double scale = nu.total_mass() + std::abs(nu.mean()) + 1.0;
    r.mass_gap = std::abs(mu.total_mass() - nu.total_mass());
    r.mean_gap = std::abs(mu.mean() - nu.mean());
    r.mass_ok = r.mass_gap <= tol * scale;
    r.mean_ok = r.mean_gap <= tol * scale;
    PiecewiseQuadratic d = dispersion(mu, nu);
    auto [x, v] = d.min_on(-kInf, kInf);
    r.witness_k = x;
    r.min_value = v;
    r.min_ok = v >= -tol * scale;
    r.ok = r.mass_ok && r.mean_ok && r.min_ok;
    return r;
}

namespace {

// Appends the sub-intervals of [lo, hi] where q(x) <= eps.
void low_intervals(const PiecewiseQuadratic::Coef& q, double lo, double hi, double eps,
                   std::vector<std::pair<double, double>>& out) {
    double a = q.a, b = q.b, c = q.c - eps;
    auto push = [&](double l, double h) {
        l = std::max(l, lo);
        h = std::min(h, hi);
        if (h > l) out.push_back({l, h});
    };
    const double tiny = 1e-300;
    if (std::abs(a) < tiny) {
        if (std::abs(b) < tiny) {
            if (c <= 0.0) push(lo, hi);
        } else {
            double x0 = -c / b;
            if (b > 0.0)
                push(lo, x0);
            else
                push(x0, hi);
        }
        return;
    }
    double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) {
        if (a < 0.0) push(lo, hi);
        return;
    }
    double sq = std::sqrt(disc);
    double r0 = (-b - sq) / (2.0 * a);
    double r1 = (-b + sq) / (2.0 * a);
    if (r0 > r1) std::swap(r0, r1);
    if (a > 0.0) {
        push(r0, r1);
    } else {
        push(lo, r0);
        push(r1, hi);
    }
}

}  // namespace

Decomposition irreducible_decompose(const Measure& mu, const Measure& nu, double eps_d) {
    Decomposition out;
    double lo = std::min(mu.min_support(), nu.min_support());
    double hi = std::max(mu.max_support(), nu.max_support());
    double mass = mu.total_mass();
    if (!(hi > lo)) {  // zero or single-point measures
        out.stay = mu;
        if (mass > 0.0) out.stay_quantiles.push_back({0.0, mass});
        return out;
    }
    PiecewiseQuadratic d = dispersion(mu, nu);
    double dmax = 0.0;
    for (double k : d.knots()) dmax = std::max(dmax, std::abs(d(k)));
    dmax = std::max(dmax, std::abs(d(0.5 * (lo + hi))));
    double eps = eps_d * std::max(dmax, 1.0e-12);

    std::vector<std::pair<double, double>> low;
    const auto& ks = d.knots();
    std::vector<double> pts;
    pts.push_back(lo);
    for (double k : ks)
        if (k > lo && k < hi) pts.push_back(k);
    pts.push_back(hi);
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double mid = 0.5 * (pts[i] + pts[i + 1]);
        low_intervals(d.coef(d.piece_index(mid)), pts[i], pts[i + 1], eps, low);
    }
    // Points where D touches eps without dipping below still separate
    // components; capture them as degenerate zeros.
    std::sort(low.begin(), low.end());
    std::vector<std::pair<double, double>> zs;
    for (auto& iv : low) {
        if (!zs.empty() && iv.first <= zs.back().second + 1e-13 * (hi - lo))
            zs.back().second = std::max(zs.back().second, iv.second);
        else
            zs.push_back(iv);
    }

    // Snap approximate boundaries (where D crosses eps) to exact roots of D.
    auto snap_root = [&](double t) {
        double best = t, dist = 1e-3 * (hi - lo) + 1e-12;
        size_t pc = d.piece_index(t);
        for (size_t p = pc > 0 ? pc - 1 : 0; p <= pc + 1 && p < d.piece_count(); ++p) {
            const auto& q = d.coef(p);
            std::vector<double> roots;
            if (std::abs(q.a) < 1e-300) {
                if (std::abs(q.b) > 1e-300) roots.push_back(-q.c / q.b);
            } else {
                double disc = q.b * q.b - 4.0 * q.a * q.c;
                if (disc >= 0.0) {
                    double r = std::sqrt(disc);
                    roots.push_back((-q.b - r) / (2.0 * q.a));
                    roots.push_back((-q.b + r) / (2.0 * q.a));
                }
            }
            for (double x : roots)
                if (x >= d.piece_lo(p) - 1e-9 && x <= d.piece_hi(p) + 1e-9 &&
                    std::abs(x - t) < dist) {
                    dist = std::abs(x - t);
                    best = x;
                }
        }
        return best;
    };

    std::vector<std::pair<double, double>> comps;
    double cur = lo;
    for (auto& z : zs) {
        double zl = z.first > lo && z.first < hi ? snap_root(z.first) : z.first;
        double zr = z.second > lo && z.second < hi ? snap_root(z.second) : z.second;
        if (zl > cur) comps.push_back({cur, zl});
        cur = std::max(cur, zr);
    }
    if (hi > cur) comps.push_back({cur, hi});

    double prev_hi_u = 0.0;
    for (auto& [a, b] : comps) {
        Component c;
        c.a = a;
        c.b = b;
        c.mu = mu.restrict_interval(a, b, false, false);
        c.nu = nu.restrict_interval(a, b, false, false);
        if (c.mu.total_mass() <= 1e-14 * (mass + 1.0) &&
            c.nu.total_mass() <= 1e-14 * (mass + 1.0))
            continue;
        c.u_lo = mu.cdf(a);
        c.u_hi = c.u_lo + c.mu.total_mass();
        if (c.u_lo > prev_hi_u + 1e-14 * (mass + 1.0))
            out.stay_quantiles.push_back({prev_hi_u, c.u_lo});
        else if (c.u_lo > prev_hi_u)
            c.u_lo = prev_hi_u;  // swallow rounding slivers
        prev_hi_u = c.u_hi;
        out.components.push_back(std::move(c));
    }
    if (mass > prev_hi_u + 1e-14 * (mass + 1.0))
        out.stay_quantiles.push_back({prev_hi_u, mass});
    out.stay = mu.restrict_quantile_set(out.stay_quantiles);
    return out;
}

}  // namespace coupling
