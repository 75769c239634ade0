#pragma once

#include <utility>
#include <vector>

#include "coupling/potential.hpp"

namespace coupling {

struct HullConfig {
    int grid_n = 1024;        // coarse identification grid
    double x_tol = 1e-10;     // abscissa refinement tolerance (relative to span)
    double slope_tol = 1e-11; // relative slope matching tolerance
    double value_tol = 1e-11; // relative value coincidence tolerance
};

/// Lower convex envelope of a continuous piecewise quadratic with convex
/// (linear or upward) tail pieces.  The envelope is represented as a sorted
/// list of contact segments (envelope equals the function) and chord segments
/// (envelope is affine and strictly below the function inside).
class ConvexEnvelope {
public:
    struct Segment {
        double x0 = 0.0, x1 = 0.0;
        bool contact = true;
        double slope = 0.0, icept = 0.0;  // chord line slope * x + icept
    };

    explicit ConvexEnvelope(PiecewiseQuadratic f, HullConfig cfg = {});

    double operator()(double x) const;
    double derivative(double x) const;

    // Nearest contact points around z: (X^+, Z^-) = (last contact at or left
    // of z, first contact at or right of z).  -inf/+inf when no contact on
    // that side.
    std::pair<double, double> contact_bounds(double z) const;

    // Maximal interval on which the envelope is affine with the slope it has
    // at z: (X^-, Z^+).  Degenerates to (z, z) at strictly convex contacts.
    std::pair<double, double> tangent_extent(double z) const;

    const std::vector<Segment>& segments() const { return segs_; }
    const PiecewiseQuadratic& fn() const { return f_; }
    double domain_lo() const { return lo_; }
    double domain_hi() const { return hi_; }

private:
    size_t segment_index(double x) const;
    void build(const HullConfig& cfg);

    PiecewiseQuadratic f_;
    std::vector<Segment> segs_;
    double lo_ = 0.0, hi_ = 0.0;
    double span_ = 1.0;
    double fscale_ = 1.0;   // typical magnitude of f
    double sscale_ = 1.0;   // typical slope magnitude
    double ascale_ = 1.0;   // typical curvature magnitude
    double x_tol_ = 1e-10;
    double slope_tol_ = 1e-11;
    double value_tol_ = 1e-11;
};

inline ConvexEnvelope convex_envelope(const PiecewiseQuadratic& f, HullConfig cfg = {}) {
    return ConvexEnvelope(f, cfg);
}

}  // namespace coupling
