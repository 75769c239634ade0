#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace coupling {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
    double x = 0.0;
    double mass = 0.0;
};

// Uniform block of the given total mass spread over (left, right).
struct Piece {
    double left = 0.0;
    double right = 0.0;
    double mass = 0.0;
};

/// Finite positive measure on the line: finitely many atoms plus a piecewise
/// constant density.  Input pieces may overlap; the representation is
/// canonicalized to disjoint density cells with sorted breakpoints.
class Measure {
public:
    Measure() = default;
    Measure(std::vector<Atom> atoms, std::vector<Piece> pieces);

    static Measure point(double x, double mass);
    static Measure uniform(double left, double right, double mass);

    double total_mass() const { return total_; }
    double mean() const;
    bool is_zero() const { return total_ <= 0.0; }
    bool atom_free() const { return atoms_.empty(); }

    // Support hull; +inf/-inf sentinels when the measure is zero.
    double min_support() const;
    double max_support() const;

    double cdf(double x) const;       // mass of (-inf, x]
    double cdf_left(double x) const;  // mass of (-inf, x)
    double mass_at(double x) const;   // atom mass at x, 0 if none

    // Left-continuous quantile, sup{k : F(k) < u}.  Returns -inf for u <= 0.
    double quantile_left(double u) const;
    // Right-continuous quantile, inf{k : F(k) > u}.  Returns +inf for
    // u >= total mass.
    double quantile_right(double u) const;

    // Mass-u left restriction: the measure below its u-quantile, topped up
    // with a partial atom at the quantile when needed.
    Measure restrict_left(double u) const;

    // Restriction to an interval with explicit endpoint inclusion.
    Measure restrict_interval(double a, double b, bool include_a, bool include_b) const;

    // Restriction to a set of quantile (mass) intervals.  Intervals must be
    // disjoint and sorted; each (lo, hi) selects the mass strata between the
    // lo- and hi-quantiles.
    Measure restrict_quantile_set(const std::vector<std::pair<double, double>>& js) const;

    Measure& operator+=(const Measure& o);
    friend Measure operator+(Measure a, const Measure& b) {
        a += b;
        return a;
    }

    // Setwise difference; requires o <= *this up to tol (relative to total
    // mass), throws otherwise.  Tiny negative residues are clipped.
    Measure subtract(const Measure& o, double tol = 1e-9) const;

    const std::vector<Atom>& atoms() const { return atoms_; }
    // Density breakpoints and per-cell densities (cell i spans
    // [knot i, knot i+1)).  Atom locations are always knots.
    const std::vector<double>& density_knots() const { return knots_; }
    const std::vector<double>& densities() const { return dens_; }
    double density_at(double x) const;  // density of the cell containing x

    std::vector<Piece> as_pieces() const;

private:
    void canonicalize(std::vector<Atom> atoms, std::vector<Piece> pieces);

    std::vector<double> knots_;  // sorted breakpoints
    std::vector<double> dens_;   // size knots_.size()-1 (empty if <2 knots)
    std::vector<double> atom_;   // atom mass at each knot, same size as knots_
    std::vector<double> cum_;    // cum_[i] = mass of (-inf, knot i)
    std::vector<Atom> atoms_;    // nonzero atoms only, sorted
    double total_ = 0.0;
};

// L1 distance between cdfs, the 1-Wasserstein distance for equal-mass
// measures.
double wasserstein1(const Measure& a, const Measure& b);

// Kolmogorov (sup) distance between cdfs.
double kolmogorov(const Measure& a, const Measure& b);

}  // namespace coupling
