#pragma once

#include <utility>
#include <vector>

#include "coupling/curtain.hpp"
#include "coupling/potential.hpp"

namespace coupling {

/// Starting data of the alternating construction: a_0 is the largest point
/// such that mu <= nu setwise to its left, a_1 the left end of the maximal
/// stretch on which mu = nu ending at a_0 (a_1 = a_0 when there is none),
/// and u_0 the mass of mu below a_0.
struct Anchor {
    double u0 = 0.0;
    double a0 = 0.0;
    double a1 = 0.0;
};

// Exact breakpoint-wise density/atom comparison; no hull queries involved.
Anchor find_anchor(const Measure& mu, const Measure& nu);

struct InjectiveConfig {
    CurtainConfig curtain;       // hull, scan and curtain tolerances
    int branch_samples = 129;    // arrow samples per full-length branch table
    double eps_term_rel = 1e-8;  // tail-mass termination, relative to mu mass
    double ring_eps = 0.5;       // nested-interval shrink factor, in (0,1)
    int max_branches = 64;
    int max_rings = 80;
};

struct BranchSample {
    double u = 0.0;          // mass level
    double m = 0.0, n = 0.0; // lower/upper branch values at u
};

/// One sweep of the alternating construction.  Even-index branches run
/// rightward in mass and read the left quantile; odd ones run leftward and
/// read the right quantile.
struct Branch {
    int j = 0;
    double anchor = 0.0;      // u_j, the fixed end of the arrow family
    double ulo = 0.0, uhi = 0.0;
    std::vector<BranchSample> table;  // ascending in u

    bool rightward() const { return (j & 1) == 0; }
};

struct AlternatingBuild {
    Measure mu, nu;
    InjectiveConfig cfg;
    Anchor anchor;
    std::vector<double> u;      // u_0 .. u_J
    std::vector<Branch> branches;
    bool truncated = false;     // stopped on budget, not on exhausted mass
    double dropped_mass = 0.0;  // uncovered tail mass
    // per parity flip: worst mismatch of the two arrow families at the
    // shared boundary level (diagnostic only)
    std::vector<double> boundary_residual;
};

// Runs the alternating sweeps; requires the pair to open immediately above
// anchor.u0 (throws otherwise).
AlternatingBuild build_alternating(const Measure& mu, const Measure& nu,
                                   const Anchor& anchor,
                                   const InjectiveConfig& cfg = {});

// Folding map from the lift coordinate v (mass laid down in construction
// order) to the mass level u; right-continuous bijection.
double phi_map(const AlternatingBuild& b, double v);

// Two-point kernel at mass level u.  Interpolates the branch tables unless
// exact, which re-evaluates the arrows.
Kernel kernel_at(const AlternatingBuild& b, double u, bool exact = false);

/// A sub-pair emitted by the nested-interval reduction, in parent-local mass
/// coordinates.  Identity pieces carry mu = nu and couple by staying put.
struct KstarPiece {
    std::vector<std::pair<double, double>> j;  // parent mass intervals
    Measure mu, nu;
    bool identity = false;
};

struct ReduceResult {
    std::vector<KstarPiece> pieces;
    double dropped_mass = 0.0;  // terminal remainder coupled as identity
};

// Splits a simple-left-curtain pair into pieces on which the alternating
// construction applies, peeling identity bands and nested rings as needed.
ReduceResult reduce_slc_to_kstar(const Measure& mu, const Measure& nu,
                                 const InjectiveConfig& cfg = {});

// One step of the ring schedule, exposed for testing: peels `n_rings` rings
// off the pair regardless of whether the remainder already qualifies.
ReduceResult ring_schedule(const Measure& mu, const Measure& nu, double u0,
                           int n_rings, const InjectiveConfig& cfg = {});

struct CouplingPart {
    std::vector<std::pair<double, double>> j;  // global mass intervals of mu
    bool identity = false;
    AlternatingBuild build;  // meaningful only when !identity
};

struct InjectiveCoupling {
    Measure mu, nu;
    std::vector<CouplingPart> parts;  // sorted by first interval
    double dropped_mass = 0.0;

    double mass() const { return mu.total_mass(); }
    // Kernel at global mass coordinate t in (0, mass).
    Kernel kernel_at_mass(double t, bool exact = false) const;
};

// Concatenates parts over the global mass coordinate; parts must cover
// disjoint interval sets.
InjectiveCoupling assemble(const Measure& mu, const Measure& nu,
                           std::vector<CouplingPart> parts);

// Full pipeline: irreducible decomposition, per-component block partition and
// reduction where needed, alternating build per piece, identity elsewhere.
InjectiveCoupling build_injective(const Measure& mu, const Measure& nu,
                                  const InjectiveConfig& cfg = {});

// Mass-coordinate bookkeeping for interval sets.
double mass_set_total(const std::vector<std::pair<double, double>>& js);
double mass_set_to_local(const std::vector<std::pair<double, double>>& js, double t);
double mass_set_to_global(const std::vector<std::pair<double, double>>& js, double u);
// Maps child-local intervals up through the parent's global interval set.
std::vector<std::pair<double, double>> mass_set_compose(
    const std::vector<std::pair<double, double>>& parent,
    const std::vector<std::pair<double, double>>& child);

}  // namespace coupling
