#pragma once

#include <cstddef>
#include <vector>

#include "coupling/measure.hpp"

namespace coupling {

/// Continuous piecewise quadratic on the whole line.  With knots
/// k_0 < ... < k_{n-1} there are n+1 pieces; piece 0 lives on (-inf, k_0]
/// and piece n on [k_{n-1}, +inf).
class PiecewiseQuadratic {
public:
    struct Coef {
        double a = 0.0, b = 0.0, c = 0.0;  // a x^2 + b x + c
        double eval(double x) const { return (a * x + b) * x + c; }
        double slope(double x) const { return 2.0 * a * x + b; }
    };

    PiecewiseQuadratic() : coefs_(1) {}
    PiecewiseQuadratic(std::vector<double> knots, std::vector<Coef> coefs);

    double operator()(double x) const { return coefs_[piece_index(x)].eval(x); }
    double deriv_right(double x) const;
    double deriv_left(double x) const;

    PiecewiseQuadratic& operator+=(const PiecewiseQuadratic& o) { return combine(o, 1.0); }
    PiecewiseQuadratic& operator-=(const PiecewiseQuadratic& o) { return combine(o, -1.0); }
    void add_linear(double slope, double intercept);
    void negate();

    const std::vector<double>& knots() const { return knots_; }
    const Coef& coef(size_t piece) const { return coefs_[piece]; }
    size_t piece_count() const { return coefs_.size(); }
    // Index of the piece whose closed interval contains x; for x exactly at a
    // knot the piece to the right is returned.
    size_t piece_index(double x) const;
    double piece_lo(size_t piece) const { return piece == 0 ? -kInf : knots_[piece - 1]; }
    double piece_hi(size_t piece) const {
        return piece == knots_.size() ? kInf : knots_[piece];
    }

    // Minimum over [lo, hi] (may be infinite bounds if the tails are
    // nondecreasing/nonincreasing accordingly); returns {argmin, value}.
    std::pair<double, double> min_on(double lo, double hi) const;

private:
    PiecewiseQuadratic& combine(const PiecewiseQuadratic& o, double sign);

    std::vector<double> knots_;
    std::vector<Coef> coefs_;  // knots_.size() + 1 entries
};

// Put potential P(k) = integral of (k - z)^+ d chi(z).
PiecewiseQuadratic put_potential(const Measure& chi);
// Call potential C(k) = integral of (z - k)^+ d chi(z).
PiecewiseQuadratic call_potential(const Measure& chi);
// Put-call parity evaluator: P(k) - C(k) - (k * mass - mean).
double put_call_gap(const Measure& chi, double k);

// Dispersion D = P_nu - P_mu.
PiecewiseQuadratic dispersion(const Measure& mu, const Measure& nu);

struct ConvexOrderReport {
    bool ok = false;
    bool mass_ok = false, mean_ok = false, min_ok = false;
    double mass_gap = 0.0, mean_gap = 0.0;
    double min_value = 0.0;  // most negative dispersion value found
    double witness_k = 0.0;  // argmin of the dispersion
};
ConvexOrderReport check_convex_order(const Measure& mu, const Measure& nu, double tol = 1e-9);

struct Component {
    double a = 0.0, b = 0.0;       // open interval (a, b) where D > 0
    double u_lo = 0.0, u_hi = 0.0; // matching quantile strata of mu
    Measure mu, nu;
};
struct Decomposition {
    std::vector<Component> components;
    Measure stay;  // common part on the zero set of D (mu and nu agree there)
    std::vector<std::pair<double, double>> stay_quantiles;
};
// Splits an in-convex-order pair into irreducible components along the zero
// set of the dispersion.
Decomposition irreducible_decompose(const Measure& mu, const Measure& nu, double eps_d = 1e-12);

}  // namespace coupling
