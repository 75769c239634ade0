#include "coupling/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace coupling {

KernelFn kernel_fn(const InjectiveCoupling& c, bool exact) {
    const InjectiveCoupling* p = &c;
    return [p, exact](double t) { return p->kernel_at_mass(t, exact); };
}

KernelFn curtain_kernel_fn(const Measure& mu, const Measure& nu,
                           const CurtainConfig& cfg) {
    auto fns = std::make_shared<CurtainFns>(mu, nu, cfg);
    return [fns](double t) { return curtain_kernel(*fns, t); };
}

MarginalReport verify_marginals(const KernelFn& fn, double mass,
                                const Measure& mu, const Measure& nu,
                                int grid_n) {
    if (grid_n < 1) throw std::invalid_argument("verify_marginals: grid_n < 1");
    double dt = mass / grid_n;
    std::vector<Atom> first, second;
    first.reserve(grid_n);
    second.reserve(2 * grid_n);
    for (int i = 0; i < grid_n; ++i) {
        Kernel k = fn((i + 0.5) * dt);
        first.push_back({k.x, dt});
        if (k.w1 > 0.0) second.push_back({k.y1, k.w1 * dt});
        if (k.w2 > 0.0) second.push_back({k.y2, k.w2 * dt});
    }
    MarginalReport out;
    out.kolmogorov_mu = kolmogorov(Measure(std::move(first), {}), mu);
    out.kolmogorov_nu = kolmogorov(Measure(std::move(second), {}), nu);
    return out;
}

MarginalReport verify_marginals(const InjectiveCoupling& c, int grid_n) {
    return verify_marginals(kernel_fn(c), c.mass(), c.mu, c.nu, grid_n);
}

double verify_martingale(const KernelFn& fn, double mass, int grid_n) {
    double worst = 0.0;
    double dt = mass / grid_n;
    for (int i = 0; i < grid_n; ++i) {
        Kernel k = fn((i + 0.5) * dt);
        worst = std::max(worst, std::abs(k.barycenter() - k.x));
    }
    return worst;
}

double verify_martingale(const InjectiveCoupling& c, int grid_n) {
    return verify_martingale(kernel_fn(c), c.mass(), grid_n);
}

namespace {

struct YBucketScan {
    int max_multiplicity = 0;
    int bad_buckets = 0;
    int buckets = 0;
};

// Buckets target points over y; a bucket is multi-valued when two u-clusters
// (separated by more than eps_u in mass) cover overlapping y ranges.  Mere
// hand-over of adjacent branches inside one bucket has disjoint y ranges and
// does not count.
YBucketScan scan_y_buckets(const std::vector<std::pair<double, double>>& yu,
                           double y_lo, double y_hi, int y_grid_n,
                           double eps_u) {
    YBucketScan out;
    double width = (y_hi - y_lo) / y_grid_n;
    if (!(width > 0.0)) return out;
    std::vector<std::vector<std::pair<double, double>>> bucket(y_grid_n);
    for (auto& [y, u] : yu) {
        int b = std::clamp(static_cast<int>((y - y_lo) / width), 0, y_grid_n - 1);
        bucket[b].push_back({u, y});
    }
    double y_overlap = 1e-6 * width;
    for (auto& bs : bucket) {
        if (bs.empty()) continue;
        ++out.buckets;
        std::sort(bs.begin(), bs.end());
        struct Cluster {
            double ymin, ymax;
        };
        std::vector<Cluster> cl;
        for (size_t i = 0; i < bs.size(); ++i) {
            if (i == 0 || bs[i].first - bs[i - 1].first > eps_u)
                cl.push_back({bs[i].second, bs[i].second});
            else {
                cl.back().ymin = std::min(cl.back().ymin, bs[i].second);
                cl.back().ymax = std::max(cl.back().ymax, bs[i].second);
            }
        }
        int mult = 1;
        for (size_t a = 0; a < cl.size(); ++a) {
            int hits = 1;
            for (size_t b = 0; b < cl.size(); ++b) {
                if (a == b) continue;
                double ov = std::min(cl[a].ymax, cl[b].ymax) -
                            std::max(cl[a].ymin, cl[b].ymin);
                if (ov > y_overlap) ++hits;
            }
            mult = std::max(mult, hits);
        }
        out.max_multiplicity = std::max(out.max_multiplicity, mult);
        if (mult >= 2) ++out.bad_buckets;
    }
    return out;
}

std::vector<std::pair<double, double>> sample_targets(const KernelFn& fn,
                                                      double mass,
                                                      int u_grid_n) {
    std::vector<std::pair<double, double>> yu;
    yu.reserve(2 * u_grid_n);
    double dt = mass / u_grid_n;
    for (int i = 0; i < u_grid_n; ++i) {
        double t = (i + 0.5) * dt;
        Kernel k = fn(t);
        if (k.w1 > 1e-12) yu.push_back({k.y1, t});
        if (k.w2 > 1e-12) yu.push_back({k.y2, t});
    }
    return yu;
}

}  // namespace

InjectivityReport verify_injectivity_empirical(const KernelFn& fn, double mass,
                                               double y_lo, double y_hi,
                                               int y_grid_n, int u_grid_n) {
    InjectivityReport out;
    out.certificate = true;  // no structural information available
    auto yu = sample_targets(fn, mass, u_grid_n);
    double eps_u = 5.0 * mass / u_grid_n;
    YBucketScan sc = scan_y_buckets(yu, y_lo, y_hi, y_grid_n, eps_u);
    out.max_multiplicity = sc.max_multiplicity;
    out.bad_buckets = sc.bad_buckets;
    out.buckets = sc.buckets;
    out.injective = out.bad_buckets <= 2;
    return out;
}

InjectivityReport verify_injectivity(const InjectiveCoupling& c, int y_grid_n,
                                     int u_grid_n) {
    InjectivityReport out;
    double span = std::max(c.nu.max_support() - c.nu.min_support(), 1e-12);
    double tol = 1e-7 * span;
    if (u_grid_n <= 0) u_grid_n = std::max(2048, 8 * y_grid_n);
    // parts below the sampling resolution are invisible to the empirical
    // scan and their arrow tables sit at scan noise; skip them
    double part_floor = c.mass() / u_grid_n;

    // structural certificate: along each part's construction order the lower
    // target map only moves left and the upper one only moves right
    out.certificate = true;
    for (const auto& p : c.parts) {
        if (p.identity || mass_set_total(p.j) < part_floor) continue;
        // monotone within each part; parts map into mutually singular target
        // regions, which the empirical scan corroborates
        double pm = kInf, pn = -kInf;
        double branch_floor = 1e-5 * p.build.mu.total_mass();
        for (const auto& br : p.build.branches) {
            // a branch narrower than the scan noise floor has arrows below
            // hull resolution; like sub-resolution parts, it is invisible
            if (br.uhi - br.ulo < branch_floor) continue;
            auto t = br.table;
            if (!br.rightward()) std::reverse(t.begin(), t.end());
            for (const auto& s : t) {
                if (s.m > pm + tol || s.n < pn - tol || s.m > s.n + tol)
                    ++out.monotonicity_violations;
                pm = std::min(pm, s.m);
                pn = std::max(pn, s.n);
            }
        }
    }
    out.certificate = out.monotonicity_violations == 0;

    auto yu = sample_targets(kernel_fn(c), c.mass(), u_grid_n);
    double eps_u = 5.0 * c.mass() / u_grid_n;
    YBucketScan sc = scan_y_buckets(yu, c.nu.min_support(), c.nu.max_support(),
                                    y_grid_n, eps_u);
    out.max_multiplicity = sc.max_multiplicity;
    out.bad_buckets = sc.bad_buckets;
    out.buckets = sc.buckets;
    out.injective = out.certificate && out.bad_buckets <= 2;
    return out;
}

VerificationReport verify_coupling(const InjectiveCoupling& c, int grid_n,
                                   int y_grid_n) {
    VerificationReport out;
    out.grid_n = grid_n;
    out.marginals = verify_marginals(c, grid_n);
    out.martingale_residual = verify_martingale(c, std::min(grid_n, 4096));
    out.injectivity = verify_injectivity(c, y_grid_n);
    out.dropped_mass = c.dropped_mass;
    return out;
}

std::pair<double, double> hn_reference(double a, double x) {
    if (std::abs(a) > 1.0 || std::abs(x) > 1.0)
        throw std::domain_error("hn_reference: requires |a| <= 1 and |x| <= 1");
    double h = 0.5 * (2.0 * x + a + std::sqrt(4.0 + a * a - 4.0 * a * x));
    double f = 2.0 * x + a - h;
    return {f, h};
}

}  // namespace coupling
