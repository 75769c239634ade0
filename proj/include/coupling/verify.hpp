#pragma once

#include <functional>
#include <utility>

#include "coupling/injective.hpp"

namespace coupling {

/// A coupling viewed as a map from the global mass coordinate t in (0, mass)
/// to a one- or two-point kernel.  Lets the same verifiers run against the
/// assembled coupling, the plain curtain coupling, or corrupted variants.
using KernelFn = std::function<Kernel(double)>;

// Adapters.
KernelFn kernel_fn(const InjectiveCoupling& c, bool exact = false);
KernelFn curtain_kernel_fn(const Measure& mu, const Measure& nu,
                           const CurtainConfig& cfg = {});

struct MarginalReport {
    double kolmogorov_mu = 0.0;  // first marginal vs mu
    double kolmogorov_nu = 0.0;  // second marginal vs nu
};

// Midpoint discretization of the lift on grid_n mass points; sup-distance of
// the empirical marginals against the inputs.
MarginalReport verify_marginals(const KernelFn& fn, double mass,
                                const Measure& mu, const Measure& nu,
                                int grid_n);
MarginalReport verify_marginals(const InjectiveCoupling& c, int grid_n);

// Max |w1 y1 + w2 y2 - x| over a mass grid.
double verify_martingale(const KernelFn& fn, double mass, int grid_n);
double verify_martingale(const InjectiveCoupling& c, int grid_n = 4096);

struct InjectivityReport {
    bool certificate = false;        // monotone-branch structural check
    int monotonicity_violations = 0; // sample pairs breaking the certificate
    int max_multiplicity = 0;        // distinct u-clusters hitting a y-bucket
    int bad_buckets = 0;             // buckets with multiplicity >= 2
    int buckets = 0;                 // nonempty y-buckets
    bool injective = false;          // certificate && bad fraction vanishing
};

// Structural certificate (per-branch strict monotonicity of the lower/upper
// target maps in construction order) plus an empirical y-bucket scan.
InjectivityReport verify_injectivity(const InjectiveCoupling& c,
                                     int y_grid_n = 256, int u_grid_n = 0);
// Empirical scan only, for couplings without branch tables.
InjectivityReport verify_injectivity_empirical(const KernelFn& fn, double mass,
                                               double y_lo, double y_hi,
                                               int y_grid_n, int u_grid_n);

struct VerificationReport {
    MarginalReport marginals;
    double martingale_residual = 0.0;
    InjectivityReport injectivity;
    double dropped_mass = 0.0;
    int grid_n = 0;

    bool pass(double martingale_tol = 1e-12) const {
        double mtol = 5.0 / std::max(grid_n, 1) + dropped_mass;
        return marginals.kolmogorov_mu <= mtol && marginals.kolmogorov_nu <= mtol &&
               martingale_residual <= martingale_tol && injectivity.injective;
    }
};

VerificationReport verify_coupling(const InjectiveCoupling& c,
                                   int grid_n = 10000, int y_grid_n = 256);

// Closed-form injective coupling of U[-1,1] into U[-2,2]: the target pair
// (f, h) with f: [-1,1] -> [-2,a] and h: [-1,1] -> [a,2].  Requires
// |a| <= 1, |x| <= 1.
std::pair<double, double> hn_reference(double a, double x);

}  // namespace coupling
