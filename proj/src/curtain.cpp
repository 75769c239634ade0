#include "coupling/curtain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coupling {

Kernel Kernel::two_point(double x, double lo, double hi) {
    if (!(hi - lo > 0.0)) return point(x);
    Kernel k;
    k.x = x;
    k.y1 = lo;
    k.y2 = hi;
    k.w1 = std::clamp((hi - x) / (hi - lo), 0.0, 1.0);
    k.w2 = 1.0 - k.w1;
    return k;
}

CurtainFns::CurtainFns(Measure mu, Measure nu, CurtainConfig cfg)
    : mu_(std::move(mu)), nu_(std::move(nu)), cfg_(cfg) {
    mass_ = mu_.total_mass();
    double lo = std::min(mu_.min_support(), nu_.min_support());
    double hi = std::max(mu_.max_support(), nu_.max_support());
    span_ = std::max(hi - lo, 1e-12);
}

std::pair<double, double> CurtainFns::RS(double u) const {
    u = std::clamp(u, 0.0, mass_);
    double g = mu_.quantile_left(u);
    ConvexEnvelope env(e_fn(mu_, nu_, 0.0, u), cfg_.scan.hull);
    double s = env.contact_bounds(g).second;
    double r = env.tangent_extent(g).first;
    if (!std::isfinite(s)) s = g;
    if (!std::isfinite(r)) r = g;
    return {r, s};
}

double CurtainFns::S_inverse(double t) const {
    double lo = 0.0, hi = mass_;
    double tol = cfg_.scan.w_tol_rel * mass_;
    if (S(hi) <= t) return hi;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (S(mid) >= t)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

Kernel curtain_kernel(const CurtainFns& fns, double u) {
    if (!(u > 0.0) || !(u < fns.mass()))
        throw std::invalid_argument("curtain kernel: u out of range");
    auto [r, s] = fns.RS(u);
    double g = fns.G(u);
    double eps = 1e-12 * fns.span();
    if (s - r <= eps || g <= r + eps || g >= s - eps) return Kernel::point(g);
    return Kernel::two_point(g, r, s);
}

Kernel curtain_kernel(const Measure& mu, const Measure& nu, double u,
                      const CurtainConfig& cfg) {
    return curtain_kernel(CurtainFns(mu, nu, cfg), u);
}

namespace {

// mass-coordinate breakpoints of mu, for sampling grids
std::vector<double> mass_grid(const Measure& mu, int n) {
    double mass = mu.total_mass();
    std::vector<double> g;
    for (int i = 1; i < n; ++i) g.push_back(mass * i / n);
    for (double k : mu.density_knots()) {
        for (double c : {mu.cdf_left(k), mu.cdf(k)})
            if (c > 0.0 && c < mass) g.push_back(c);
    }
    // scale refinement near both ends and near breakpoints
    for (double d = 0.25 * mass; d > 1e-9 * mass; d *= 0.5) {
        g.push_back(d);
        g.push_back(mass - d);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(),
                        [&](double a, double b) { return b - a <= 1e-13 * mass; }),
            g.end());
    return g;
}

template <class Pred>
double bisect_boundary(Pred pred, double lo, double hi, bool want_first_true,
                       double tol) {
    // pred(lo) == !want at lo side, pred(hi) == want at hi side for
    // want_first_true; mirrored otherwise
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (pred(mid) == want_first_true)
            hi = mid;
        else
            lo = mid;
    }
    return want_first_true ? hi : lo;
}

}  // namespace

BlockPartition partition_blocks(const Measure& mu, const Measure& nu,
                                const CurtainConfig& cfg) {
    BlockPartition out;
    double mass = mu.total_mass();
    if (mass <= 0.0) return out;
    CurtainFns fns(mu, nu, cfg);
    double eps_x = cfg.eps_x_rel * fns.span();
    double wtol = cfg.scan.w_tol_rel * mass;
    auto excess = [&](double u) { return fns.S(u) > mu.quantile_right(u) + eps_x; };

    std::vector<double> grid = mass_grid(mu, cfg.grid_n);
    std::vector<std::pair<double, double>> runs;  // maximal excess intervals
    double run_lo = -1.0, prev = 0.0;
    bool in_run = false;
    for (double u : grid) {
        bool e = excess(u);
        if (e && !in_run) {
            run_lo = prev == 0.0 ? 0.0
                                 : bisect_boundary(excess, prev, u, true, wtol);
            in_run = true;
        } else if (!e && in_run) {
            runs.push_back({run_lo, bisect_boundary(excess, prev, u, false, wtol)});
            in_run = false;
        }
        prev = u;
    }
    if (in_run) runs.push_back({run_lo, mass});
    // bisected boundaries sit within w_tol of the true edge; when that edge
    // is a breakpoint mass, snap exactly to it so restrictions leave no sliver
    std::vector<double> snaps = {0.0, mass};
    for (double k : mu.density_knots())
        for (double c : {mu.cdf_left(k), mu.cdf(k)}) snaps.push_back(c);
    std::sort(snaps.begin(), snaps.end());
    auto snap = [&](double u) {
        auto it = std::lower_bound(snaps.begin(), snaps.end(), u);
        double best = u, tol = 100.0 * wtol;
        if (it != snaps.end() && *it - u <= tol) best = *it;
        if (it != snaps.begin() && u - *(it - 1) <= tol &&
            (best == u || u - *(it - 1) < best - u))
            best = *(it - 1);
        return best;
    };
    // the excess also ramps through the threshold near the mass boundaries
    for (auto& [uk, vk] : runs) {
        uk = uk <= 1e-5 * mass ? 0.0 : snap(uk);
        vk = vk >= mass - 1e-5 * mass ? mass : snap(vk);
    }

    // extend each run to the left down to S^{-1} of the limiting R value
    std::vector<std::pair<double, double>> as;
    for (auto& [uk, vk] : runs) {
        double d = std::max(1e-4 * mass, 8.0 * wtol);
        double probe = std::max(vk - d, 0.5 * (uk + vk));
        double probe2 = std::max(vk - 0.5 * d, 0.5 * (uk + vk));
        double r1 = fns.R(probe), r2 = fns.R(probe2);
        double alpha = std::abs(r2 - r1) <= 1e-3 * fns.span() ? 2.0 * r2 - r1 : r2;
        double l = snap(fns.S_inverse(alpha));
        as.push_back({std::min(l, uk), vk});
    }

    // the carve below handles nested and disjoint extents only: drop exact
    // duplicates and merge partial overlaps into a single block
    for (bool changed = true; changed;) {
        changed = false;
        for (size_t i = 0; i < as.size() && !changed; ++i) {
            for (size_t j = i + 1; j < as.size() && !changed; ++j) {
                auto [a1, b1] = as[i];
                auto [a2, b2] = as[j];
                bool in1 = a2 >= a1 - wtol && b2 <= b1 + wtol;
                bool in2 = a1 >= a2 - wtol && b1 <= b2 + wtol;
                if (in1 && in2) {  // same extent twice
                    as.erase(as.begin() + j);
                    changed = true;
                } else if (!in1 && !in2 &&
                           std::min(b1, b2) - std::max(a1, a2) > wtol) {
                    as[i] = {std::min(a1, a2), std::max(b1, b2)};
                    as.erase(as.begin() + j);
                    changed = true;
                }
            }
        }
    }

    // blocks are nested or disjoint; carve each one's own interval set
    double eps_b = cfg.eps_block_rel * mass;
    std::vector<std::pair<double, double>> covered;  // union of all block sets
    for (size_t k = 0; k < as.size(); ++k) {
        auto [lo, hi] = as[k];
        std::vector<std::pair<double, double>> holes;
        for (size_t j = 0; j < as.size(); ++j) {
            if (j == k) continue;
            if (as[j].first >= lo - wtol && as[j].second <= hi + wtol &&
                as[j].second - as[j].first < hi - lo) {
                holes.push_back({std::max(as[j].first, lo),
                                 std::min(as[j].second, hi)});
            }
        }
        std::sort(holes.begin(), holes.end());
        std::vector<std::pair<double, double>> parts;
        double cur = lo;
        for (auto& h : holes) {
            if (h.first > cur + wtol) parts.push_back({cur, h.first});
            cur = std::max(cur, h.second);
        }
        if (hi > cur + wtol) parts.push_back({cur, hi});

        double bm = 0.0;
        for (auto& p : parts) bm += p.second - p.first;
        covered.push_back({lo, hi});
        if (bm < eps_b) {
            out.dropped_mass += bm;
            continue;
        }
        CurtainBlock blk;
        blk.j = parts;
        blk.mu = mu.restrict_quantile_set(parts);
        for (auto& [a, b] : parts) {
            Measure hi_sh = shadow_measure(mu, nu, 0.0, b, cfg.scan.hull);
            if (a > wtol) {
                Measure lo_sh = shadow_measure(mu, nu, 0.0, a, cfg.scan.hull);
                blk.nu += hi_sh.subtract(lo_sh, 1e-6);
            } else {
                blk.nu += hi_sh;
            }
        }
        out.blocks.push_back(std::move(blk));
    }

    // everything outside the block union stays put
    std::sort(covered.begin(), covered.end());
    double cur = 0.0;
    for (auto& [a, b] : covered) {
        if (a > cur + wtol) out.stay.push_back({cur, a});
        cur = std::max(cur, b);
    }
    if (mass > cur + wtol) out.stay.push_back({cur, mass});
    out.stay_mu = mu.restrict_quantile_set(out.stay);
    return out;
}

SlcClass classify_slc(const Measure& mu, const Measure& nu,
                      const CurtainConfig& cfg) {
    SlcClass out;
    double mass = mu.total_mass();
    if (mass <= 0.0) return out;
    CurtainFns fns(mu, nu, cfg);
    double eps_x = cfg.eps_x_rel * fns.span();
    double wtol = cfg.scan.w_tol_rel * mass;
    auto excess = [&](double u) { return fns.S(u) > mu.quantile_right(u) + eps_x; };

    std::vector<double> grid = mass_grid(mu, std::max(32, cfg.grid_n / 4));
    double first_true = -1.0, prev = 0.0;
    bool ok_before = true, ok_after = true;
    for (double u : grid) {
        if (excess(u)) {
            if (first_true < 0.0) first_true = u;
        } else if (first_true < 0.0) {
            // below u0 the upper curtain rides the quantile: no excess (by
            // definition of the scan) and never below the left quantile
            if (fns.S(u) < fns.G(u) - eps_x) ok_before = false;
            prev = u;
        } else if (u < mass - 1e-5 * mass) {
            // excess must persist beyond u0; near full mass the gap may ramp
            // below the spatial tolerance, so that band is indeterminate
            ok_after = false;
        }
    }
    if (first_true < 0.0) return out;  // no excess anywhere: identity pair
    out.u0 = bisect_boundary(excess, prev, first_true, true, wtol);
    out.is_slc = ok_before && ok_after;

    // Probe whether the arrows open just beyond u0.  Depths below the hull
    // noise floor are undecidable, so probe at scales where a genuinely open
    // arrow clears the floor.
    out.is_kstar = true;
    for (double d : {3e-6, 1e-5, 1e-4}) {
        double w = out.u0 + d * mass;
        if (w >= mass) break;
        ArrowPair a = arrows_right(mu, nu, out.u0, w, cfg.scan.hull);
        if (a.n <= mu.quantile_right(w) + eps_x) {
            out.is_kstar = false;
            break;
        }
    }
    return out;
}

}  // namespace coupling
