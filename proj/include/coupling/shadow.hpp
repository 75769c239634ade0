#pragma once

#include "coupling/envelope.hpp"
#include "coupling/measure.hpp"
#include "coupling/potential.hpp"

namespace coupling {

struct ScanConfig {
    HullConfig hull;
    int scan_n = 2048;          // first-crossing scan resolution (mass units)
    double w_tol_rel = 1e-10;   // bisection tolerance, relative to total mass
    double pred_eps_rel = 1e-11;  // slack for quantile comparisons, relative to span
};

// E_{v,u}: the excess-potential profile of the mass stratum (v, u] of mu
// inside nu.  Exact piecewise quadratic.
PiecewiseQuadratic e_fn(const Measure& mu, const Measure& nu, double v, double u);

// Shadow of the stratum (v, u] of mu in nu, read off the convex envelope of
// E_{v,u}: the stratum itself on contact regions, nu inside chords.
Measure shadow_measure(const Measure& mu, const Measure& nu, double v, double u,
                       const HullConfig& hull = {});

struct ArrowPair {
    double m = 0.0, n = 0.0;  // lower/upper shadow boundary
    double x = 0.0;           // queried quantile of mu
};

// Rightward arrows at mass level l >= v: tangent extent of E_{v,l} at the
// left quantile of mu.
ArrowPair arrows_right(const Measure& mu, const Measure& nu, double v, double l,
                       const HullConfig& hull = {});
// Leftward arrows at mass level l <= v: tangent extent of E_{l,v} at the
// right quantile of mu.
ArrowPair arrows_left(const Measure& mu, const Measure& nu, double v, double l,
                      const HullConfig& hull = {});

// First mass level w in (u, mass] at which the upper rightward arrow falls
// back onto the quantile function; mass when there is none.
double w_bar(const Measure& mu, const Measure& nu, double v, double u,
             const ScanConfig& cfg = {});
// Largest mass level w in [0, u) at which the lower leftward arrow climbs
// back onto the quantile function; 0 when there is none.
double w_under(const Measure& mu, const Measure& nu, double u, double v,
               const ScanConfig& cfg = {});

// Independent shadow oracle: splits the stratum (v, u] of mu into n_atoms
// equal-mass atoms and embeds them one by one into what remains of nu,
// each at the balanced quantile window matching the atom's mean.
Measure shadow_oracle_atomic(const Measure& mu, const Measure& nu, double v, double u,
                             int n_atoms);

}  // namespace coupling
