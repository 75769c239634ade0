#pragma once

#include <utility>
#include <vector>

#include "coupling/shadow.hpp"

namespace coupling {

/// Martingale transition kernel at one source point: either the identity
/// (y1 == y2 == x) or a two-point law with barycenter x.
struct Kernel {
    double x = 0.0;
    double y1 = 0.0, y2 = 0.0;  // y1 <= y2
    double w1 = 1.0, w2 = 0.0;

    bool identity() const { return y1 == y2; }
    double barycenter() const { return w1 * y1 + w2 * y2; }

    static Kernel point(double x) { return {x, x, x, 1.0, 0.0}; }
    // two-point kernel with the weights solved from the barycenter condition
    static Kernel two_point(double x, double lo, double hi);
};

struct CurtainConfig {
    ScanConfig scan;
    int grid_n = 512;            // block-partition sampling resolution
    double eps_x_rel = 1e-7;     // spatial tolerance, relative to support span
                                 // (above the hull noise floor sqrt(eps/a))
    double eps_block_rel = 1e-8; // minimal block mass, relative to total mass
};

/// Lower/upper curtain functions R(u) <= G(u) <= S(u), evaluated per query
/// from the convex envelope of the one-sided excess profile E_{0,u}.
class CurtainFns {
public:
    CurtainFns(Measure mu, Measure nu, CurtainConfig cfg = {});

    double mass() const { return mass_; }
    double span() const { return span_; }
    double G(double u) const { return mu_.quantile_left(u); }
    double G_right(double u) const { return mu_.quantile_right(u); }
    std::pair<double, double> RS(double u) const;
    double R(double u) const { return RS(u).first; }
    double S(double u) const { return RS(u).second; }
    // smallest u with S(u) >= t (S is strictly increasing for atom-free nu)
    double S_inverse(double t) const;

    const Measure& mu() const { return mu_; }
    const Measure& nu() const { return nu_; }

private:
    Measure mu_, nu_;
    CurtainConfig cfg_;
    double mass_ = 0.0;
    double span_ = 1.0;
};

Kernel curtain_kernel(const CurtainFns& fns, double u);
Kernel curtain_kernel(const Measure& mu, const Measure& nu, double u,
                      const CurtainConfig& cfg = {});

struct CurtainBlock {
    std::vector<std::pair<double, double>> j;  // disjoint mass intervals of mu
    Measure mu, nu;
};

struct BlockPartition {
    std::vector<CurtainBlock> blocks;
    std::vector<std::pair<double, double>> stay;  // identity-coupled mass set
    Measure stay_mu;
    double dropped_mass = 0.0;
};

// Maximal excess intervals of {u : G(u+) < S(u)}, extended to the left until
// S returns to the limiting lower-curtain value, minus nested sub-blocks.
BlockPartition partition_blocks(const Measure& mu, const Measure& nu,
                                const CurtainConfig& cfg = {});

struct SlcClass {
    bool is_slc = false;
    double u0 = 0.0;
    bool is_kstar = false;
};

// Verifies the simple left-curtain shape (S = G up to u0, strict excess
// beyond) and probes whether the upper arrow opens at u0.
SlcClass classify_slc(const Measure& mu, const Measure& nu,
                      const CurtainConfig& cfg = {});

}  // namespace coupling
