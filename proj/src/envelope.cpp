#include "coupling/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coupling {

namespace {

struct Pt {
    double x, y;
    size_t idx;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

ConvexEnvelope::ConvexEnvelope(PiecewiseQuadratic f, HullConfig cfg) : f_(std::move(f)) {
    const auto& ks = f_.knots();
    if (ks.empty()) {
        // Single global quadratic; it is its own envelope when convex.
        lo_ = -1.0;
        hi_ = 1.0;
        segs_.push_back({lo_, hi_, true, 0.0, 0.0});
        return;
    }
    double klo = ks.front(), khi = ks.back();
    double pad = std::max(1.0, 0.75 * (khi - klo));
    lo_ = klo - pad;
    hi_ = khi + pad;
    // Quadratic tails can carry tangency points far beyond the knots; pull
    // the slope range over all breakpoints through the tail pieces.
    double smin = kInf, smax = -kInf;
    for (double k : ks) {
        smin = std::min({smin, f_.deriv_left(k), f_.deriv_right(k)});
        smax = std::max({smax, f_.deriv_left(k), f_.deriv_right(k)});
    }
    const auto& q0 = f_.coef(0);
    if (q0.a > 0.0) lo_ = std::min(lo_, (smin - q0.b) / (2.0 * q0.a) - pad);
    const auto& qn = f_.coef(ks.size());
    if (qn.a > 0.0) hi_ = std::max(hi_, (smax - qn.b) / (2.0 * qn.a) + pad);
    span_ = hi_ - lo_;
    fscale_ = 1.0;
    sscale_ = 1.0;
    ascale_ = 0.0;
    for (double k : ks) fscale_ = std::max(fscale_, std::abs(f_(k)));
    for (size_t p = 0; p < f_.piece_count(); ++p) {
        ascale_ = std::max(ascale_, std::abs(f_.coef(p).a));
        double rep = p == 0 ? klo : (p == ks.size() ? khi : ks[p - 1]);
        sscale_ = std::max(sscale_, std::abs(f_.coef(p).slope(rep)));
    }
    if (ascale_ <= 0.0) ascale_ = fscale_ / (span_ * span_);
    x_tol_ = cfg.x_tol * span_;
    slope_tol_ = cfg.slope_tol * (sscale_ + fscale_ / span_);
    value_tol_ = cfg.value_tol * fscale_;
    build(cfg);
}

void ConvexEnvelope::build(const HullConfig& cfg) {
    const auto& ks = f_.knots();
    double klo = ks.front(), khi = ks.back();
    double inner = std::max(khi - klo, 1e-12 * span_);

    std::vector<double> xs;
    xs.reserve(cfg.grid_n + 4 * ks.size() + 16);
    xs.push_back(lo_);
    xs.push_back(0.5 * (lo_ + klo));
    for (size_t p = 0; p < f_.piece_count(); ++p) {
        double a = std::max(f_.piece_lo(p), lo_);
        double b = std::min(f_.piece_hi(p), hi_);
        if (!(b > a)) continue;
        xs.push_back(a);
        const auto& q = f_.coef(p);
        if (q.a != 0.0) {
            double v = -q.b / (2.0 * q.a);
            if (v > a && v < b) xs.push_back(v);
        }
        if (a >= klo && b <= khi) {
            int m = (int)std::ceil(cfg.grid_n * (b - a) / inner);
            m = std::min(m, 2 * cfg.grid_n);
            for (int i = 1; i < m; ++i) xs.push_back(a + (b - a) * i / m);
        }
    }
    xs.push_back(0.5 * (khi + hi_));
    xs.push_back(hi_);
    // geometric clusters around kinks: shallow chords hug them at depths far
    // below what a uniform grid resolves
    for (double k : ks)
        for (double d = 0.5 * span_; d > 1e-14 * span_; d *= 0.5) {
            if (k - d > lo_) xs.push_back(k - d);
            if (k + d < hi_) xs.push_back(k + d);
        }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [&](double a, double b) { return b - a <= 1e-15 * span_; }),
             xs.end());

    std::vector<Pt> pts(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) pts[i] = {xs[i], f_(xs[i]), i};

    // Monotone-chain lower hull (strict turns only).
    std::vector<Pt> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0)
            hull.pop_back();
        hull.push_back(p);
    }

    // Group hull edges into contact runs and chords.
    struct RawSeg {
        double x0, x1;
        bool contact;
        size_t g0, g1;  // grid indices of the endpoints
    };
    std::vector<RawSeg> raw;
    for (size_t j = 0; j + 1 < hull.size(); ++j) {
        bool contact = hull[j + 1].idx == hull[j].idx + 1;
        if (contact && !raw.empty() && raw.back().contact &&
            raw.back().g1 == hull[j].idx) {
            raw.back().x1 = hull[j + 1].x;
            raw.back().g1 = hull[j + 1].idx;
        } else {
            raw.push_back({hull[j].x, hull[j + 1].x, contact, hull[j].idx, hull[j + 1].idx});
        }
    }

    // --- chord polishing helpers -------------------------------------------

    double a_tol = 1e-12 * ascale_;

    // Local minimizer of f(x) - s x near xg, limited to [lo, hi].
    auto touch_point = [&](double s, double xg, double lo, double hi) {
        xg = std::clamp(xg, lo, hi);
        size_t p = f_.piece_index(xg);
        int last_dir = 0;
        for (int step = 0; step < 256; ++step) {
            double plo = std::max(f_.piece_lo(p), lo);
            double phi = std::min(f_.piece_hi(p), hi);
            const auto& q = f_.coef(p);
            if (q.a > a_tol) {
                double v = (s - q.b) / (2.0 * q.a);
                if (v < plo) {
                    if (plo == lo || last_dir > 0) return plo;
                    --p;
                    last_dir = -1;
                } else if (v > phi) {
                    if (phi == hi || last_dir < 0) return phi;
                    ++p;
                    last_dir = 1;
                } else {
                    return v;
                }
            } else if (std::abs(q.a) <= a_tol) {
                if (q.b < s - slope_tol_) {  // decreasing objective: go right
                    if (phi == hi || last_dir < 0) return phi;
                    ++p;
                    last_dir = 1;
                } else if (q.b > s + slope_tol_) {
                    if (plo == lo || last_dir > 0) return plo;
                    --p;
                    last_dir = -1;
                } else {
                    return std::clamp(xg, plo, phi);
                }
            } else {  // concave piece: objective maximized inside, go downhill
                double vlo = q.eval(plo) - s * plo, vhi = q.eval(phi) - s * phi;
                if (vhi < vlo) {
                    if (phi == hi || last_dir < 0) return phi;
                    ++p;
                    last_dir = 1;
                } else {
                    if (plo == lo || last_dir > 0) return plo;
                    --p;
                    last_dir = -1;
                }
            }
        }
        return std::clamp(xg, lo, hi);
    };

    auto near_knot = [&](double x) -> const double* {
        auto it = std::lower_bound(ks.begin(), ks.end(), x - x_tol_);
        if (it != ks.end() && std::abs(*it - x) <= x_tol_) return &*it;
        return nullptr;
    };

    // Tangency point on piece `p` of the line through the fixed point
    // (k, yk); dir > 0 searches right of k, dir < 0 left.
    auto fixed_point_tangency = [&](size_t p, double k, double yk, int dir, double& x) {
        const auto& q = f_.coef(p);
        if (q.a <= a_tol) return false;
        double disc = k * k - (yk - q.b * k - q.c) / q.a;
        if (disc < 0.0) return false;
        double r = std::sqrt(disc);
        x = dir > 0 ? k + r : k - r;
        return x >= f_.piece_lo(p) - x_tol_ && x <= f_.piece_hi(p) + x_tol_;
    };

    // Closed-form common tangent of pieces pl and pr; returns false when the
    // configuration is not two strictly convex parabolas.
    auto double_tangency = [&](size_t pl, size_t pr, double s_guess, double& x1, double& x2) {
        const auto& q1 = f_.coef(pl);
        const auto& q2 = f_.coef(pr);
        if (q1.a <= a_tol || q2.a <= a_tol) return false;
        // Equal tangent intercepts: c1 - (s-b1)^2/(4 a1) = c2 - (s-b2)^2/(4 a2).
        double A = 0.25 / q2.a - 0.25 / q1.a;
        double B = 0.5 * (q1.b / q1.a - q2.b / q2.a);
        double C = 0.25 * (q2.b * q2.b / q2.a - q1.b * q1.b / q1.a) - (q2.c - q1.c);
        double s;
        if (std::abs(A) <= 1e-14 / std::max(q1.a, q2.a)) {
            if (std::abs(B) < 1e-300) return false;
            s = -C / B;
        } else {
            double disc = B * B - 4.0 * A * C;
            if (disc < 0.0) return false;
            double r = std::sqrt(disc);
            double s1 = (-B - r) / (2.0 * A), s2 = (-B + r) / (2.0 * A);
            s = std::abs(s1 - s_guess) < std::abs(s2 - s_guess) ? s1 : s2;
        }
        x1 = (s - q1.b) / (2.0 * q1.a);
        x2 = (s - q2.b) / (2.0 * q2.a);
        return x1 <= x2 + x_tol_;
    };

    // Iterative polish followed by a closed-form snap.
    auto polish_chord = [&](double& xl, double& xr, double lo, double hi) {
        for (int widen = 0; widen < 3; ++widen) {
            double pl = xl, pr = xr;
            for (int it = 0; it < 120; ++it) {
                if (pr - pl <= x_tol_) break;
                double s = (f_(pr) - f_(pl)) / (pr - pl);
                double nl = touch_point(s, pl, lo, std::min(pr, hi));
                double nr = touch_point(s, pr, std::max(nl, lo), hi);
                double dd = std::abs(nl - pl) + std::abs(nr - pr);
                pl = nl;
                pr = nr;
                if (dd <= 0.01 * x_tol_) break;
            }
            bool at_lo = pl <= lo + 1e-12 * span_ && lo != lo_ && !near_knot(pl);
            bool at_hi = pr >= hi - 1e-12 * span_ && hi != hi_ && !near_knot(pr);
            if (!at_lo && !at_hi) {
                xl = pl;
                xr = pr;
                break;
            }
            double w = hi - lo;
            lo = std::max(lo_, lo - 2.0 * w);
            hi = std::min(hi_, hi + 2.0 * w);
        }
        if (xr - xl <= x_tol_) return;
        // Snap to the exact tangency when the touch points are interior.
        double s = (f_(xr) - f_(xl)) / (xr - xl);
        const double* kl = near_knot(xl);
        const double* kr = near_knot(xr);
        double x1 = xl, x2 = xr;
        bool ok = false;
        if (!kl && !kr) {
            size_t plp = f_.piece_index(xl), prp = f_.piece_index(xr);
            ok = double_tangency(plp, prp, s, x1, x2) &&
                 x1 >= f_.piece_lo(plp) - x_tol_ && x1 <= f_.piece_hi(plp) + x_tol_ &&
                 x2 >= f_.piece_lo(prp) - x_tol_ && x2 <= f_.piece_hi(prp) + x_tol_;
        } else if (kl && !kr) {
            x1 = *kl;
            ok = fixed_point_tangency(f_.piece_index(xr), x1, f_(x1), 1, x2);
        } else if (!kl && kr) {
            x2 = *kr;
            ok = fixed_point_tangency(f_.piece_index(xl), x2, f_(x2), -1, x1);
        } else {
            x1 = *kl;
            x2 = *kr;
            ok = true;
        }
        if (ok && x2 - x1 > x_tol_ && std::abs(x1 - xl) <= 64.0 * x_tol_ + 1e-3 * span_ &&
            std::abs(x2 - xr) <= 64.0 * x_tol_ + 1e-3 * span_) {
            xl = x1;
            xr = x2;
        }
    };

    // --- polish chords, then rebuild segments as chords + complement -------

    struct Chord {
        double x0, x1, slope, icept;
    };
    std::vector<Chord> chords;
    for (const auto& r : raw) {
        if (r.contact) continue;
        double lo = r.g0 > 0 ? pts[r.g0 - 1].x : lo_;
        double hi = r.g1 + 1 < pts.size() ? pts[r.g1 + 1].x : hi_;
        double xl = r.x0, xr = r.x1;
        polish_chord(xl, xr, lo, hi);
        if (xr - xl <= x_tol_) continue;
        if (!chords.empty()) xl = std::max(xl, chords.back().x1);
        if (xr - xl <= x_tol_) continue;
        double s = (f_(xr) - f_(xl)) / (xr - xl);
        chords.push_back({xl, xr, s, f_(xl) - s * xl});
    }

    // Split chords that ride along linear stretches of f; those stretches
    // are genuine contact regions.
    std::vector<Chord> split;
    for (const auto& ch : chords) {
        double cur = ch.x0;
        size_t p = f_.piece_index(std::min(ch.x0 + 0.5 * x_tol_, ch.x1));
        for (; p < f_.piece_count() && f_.piece_lo(p) < ch.x1; ++p) {
            double a = std::max(f_.piece_lo(p), ch.x0);
            double b = std::min(f_.piece_hi(p), ch.x1);
            const auto& q = f_.coef(p);
            if (b > a + x_tol_ && std::abs(q.a) <= a_tol &&
                std::abs(q.b - ch.slope) <= slope_tol_) {
                double mid = 0.5 * (a + b);
                double line = ch.icept + ch.slope * mid;
                if (std::abs(q.eval(mid) - line) <= value_tol_ + slope_tol_ * span_) {
                    if (a > cur + x_tol_) split.push_back({cur, a, ch.slope, ch.icept});
                    cur = b;  // contact stretch, not a chord
                }
            }
        }
        if (ch.x1 > cur + x_tol_) split.push_back({cur, ch.x1, ch.slope, ch.icept});
    }

    segs_.clear();
    double cur = lo_;
    for (const auto& ch : split) {
        if (ch.x0 > cur) segs_.push_back({cur, ch.x0, true, 0.0, 0.0});
        segs_.push_back({ch.x0, ch.x1, false, ch.slope, ch.icept});
        cur = ch.x1;
    }
    if (hi_ > cur || segs_.empty()) segs_.push_back({cur, hi_, true, 0.0, 0.0});

    // A linear tail whose extension dips below f elsewhere supports the
    // envelope only at the minimizer of f(x) - s x; everything beyond is a
    // chord at the tail slope.  The windowed hull anchors that chord at the
    // artificial window edge, so rebuild it exactly.
    auto fix_tail = [&](bool leftside) {
        const auto& qt = f_.coef(leftside ? 0 : f_.piece_count() - 1);
        if (std::abs(qt.a) > a_tol) return;
        double s = qt.b;
        PiecewiseQuadratic g = f_;
        g.add_linear(-s, 0.0);
        auto [xstar, cstar] = g.min_on(-kInf, kInf);
        std::vector<Segment> out;
        if (leftside) {
            if (xstar <= ks.front() + x_tol_) return;
            out.push_back({lo_, xstar, false, s, cstar});
            for (const auto& sg : segs_) {
                if (sg.x1 <= xstar + x_tol_) continue;
                Segment t = sg;
                t.x0 = std::max(t.x0, xstar);
                out.push_back(t);
            }
        } else {
            if (xstar >= ks.back() - x_tol_) return;
            for (const auto& sg : segs_) {
                if (sg.x0 >= xstar - x_tol_) continue;
                Segment t = sg;
                t.x1 = std::min(t.x1, xstar);
                out.push_back(t);
            }
            out.push_back({xstar, hi_, false, s, cstar});
        }
        segs_ = std::move(out);
    };
    fix_tail(true);
    fix_tail(false);
}

size_t ConvexEnvelope::segment_index(double x) const {
    size_t lo = 0, hi = segs_.size() - 1;
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (segs_[mid].x1 < x)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

double ConvexEnvelope::operator()(double x) const {
    if (x < lo_ || x > hi_) {
        // Outside the working domain the envelope continues along the
        // boundary segment (contact tail or chord line).
        const Segment& s = x < lo_ ? segs_.front() : segs_.back();
        if (s.contact) return f_(x);
        return s.icept + s.slope * x;
    }
    const Segment& s = segs_[segment_index(x)];
    if (s.contact) return f_(x);
    return s.icept + s.slope * x;
}

double ConvexEnvelope::derivative(double x) const {
    x = std::clamp(x, lo_, hi_);
    const Segment& s = segs_[segment_index(x)];
    if (!s.contact) return s.slope;
    if (x <= s.x0) return f_.deriv_right(x);
    if (x >= s.x1) return f_.deriv_left(x);
    return 0.5 * (f_.deriv_left(x) + f_.deriv_right(x));
}

std::pair<double, double> ConvexEnvelope::contact_bounds(double z) const {
    if (z > hi_) {
        if (segs_.back().contact) return {z, z};
        return {segs_.back().x0, kInf};
    }
    if (z < lo_) {
        if (segs_.front().contact) return {z, z};
        return {-kInf, segs_.front().x1};
    }
    size_t i = segment_index(z);
    const Segment& s = segs_[i];
    if (s.contact) return {z, z};
    if (z <= s.x0 + 0.0) return {s.x0, s.x0};
    if (z >= s.x1) return {s.x1, s.x1};
    double left = i == 0 ? -kInf : s.x0;
    double right = i + 1 == segs_.size() ? kInf : s.x1;
    return {left, right};
}

std::pair<double, double> ConvexEnvelope::tangent_extent(double z) const {
    double a_tol = 1e-12 * ascale_;
    bool past_hi = z > hi_, past_lo = z < lo_;
    if (past_hi || past_lo) {
        // Beyond the working domain the function is a tail piece; strictly
        // convex tails pin the extent, linear tails share the boundary's.
        if (f_.coef(f_.piece_index(z)).a > a_tol) return {z, z};
        z = past_hi ? hi_ : lo_;
    }
    double s = derivative(z);

    double left = z;
    for (size_t i = segment_index(left);;) {
        const Segment& sg = segs_[i];
        if (!sg.contact) {
            if (std::abs(sg.slope - s) > slope_tol_) break;
            left = sg.x0;
        } else {
            // Walk linear pieces of f with matching slope.
            double pos = std::min(left, sg.x1);
            while (pos > sg.x0) {
                size_t p = f_.piece_index(pos);
                if (pos <= f_.piece_lo(p) + 0.0) p = p > 0 ? p - 1 : 0;
                const auto& q = f_.coef(p);
                if (std::abs(q.a) <= a_tol && std::abs(q.b - s) <= slope_tol_)
                    pos = std::max(sg.x0, f_.piece_lo(p));
                else
                    break;
            }
            left = pos;
            if (left > sg.x0) break;
        }
        if (i == 0) {
            if (left <= lo_) left = -kInf;
            break;
        }
        if (left > segs_[i].x0) break;
        --i;
    }

    double right = z;
    for (size_t i = segment_index(right);;) {
        const Segment& sg = segs_[i];
        if (!sg.contact) {
            if (std::abs(sg.slope - s) > slope_tol_) break;
            right = sg.x1;
        } else {
            double pos = std::max(right, sg.x0);
            while (pos < sg.x1) {
                size_t p = f_.piece_index(pos);
                const auto& q = f_.coef(p);
                if (std::abs(q.a) <= a_tol && std::abs(q.b - s) <= slope_tol_)
                    pos = std::min(sg.x1, f_.piece_hi(p));
                else
                    break;
            }
            right = pos;
            if (right < sg.x1) break;
        }
        if (i + 1 == segs_.size()) {
            if (right >= hi_) right = kInf;
            break;
        }
        if (right < segs_[i].x1) break;
        ++i;
    }
    return {left, right};
}

}  // namespace coupling
