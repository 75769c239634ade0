#include "coupling/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace coupling {

namespace {
constexpr double kDropMass = 1e-15;  // relative floor for keeping a component

bool finite(double x) { return std::isfinite(x); }
}  // namespace

Measure::Measure(std::vector<Atom> atoms, std::vector<Piece> pieces) {
    canonicalize(std::move(atoms), std::move(pieces));
}

Measure Measure::point(double x, double mass) { return Measure({{x, mass}}, {}); }

Measure Measure::uniform(double left, double right, double mass) {
    return Measure({}, {{left, right, mass}});
}

void Measure::canonicalize(std::vector<Atom> atoms, std::vector<Piece> pieces) {
    double gross = 0.0;
    for (const auto& a : atoms) {
        if (!finite(a.x) || !finite(a.mass) || a.mass < 0.0)
            throw std::invalid_argument("measure: bad atom");
        gross += a.mass;
    }
    for (const auto& p : pieces) {
        if (!finite(p.left) || !finite(p.right) || !finite(p.mass) || p.mass < 0.0 ||
            !(p.left < p.right))
            throw std::invalid_argument("measure: bad piece");
        gross += p.mass;
    }
    const double floor = kDropMass * (gross + 1.0);

    std::map<double, double> atom_map;
    for (const auto& a : atoms)
        if (a.mass > 0.0) atom_map[a.x] += a.mass;

    std::vector<double> ks;
    for (const auto& p : pieces)
        if (p.mass > 0.0) {
            ks.push_back(p.left);
            ks.push_back(p.right);
        }
    for (const auto& [x, m] : atom_map) ks.push_back(x);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.empty()) {
        total_ = 0.0;
        return;
    }

    std::vector<double> dens(ks.size() > 1 ? ks.size() - 1 : 0, 0.0);
    for (const auto& p : pieces) {
        if (p.mass <= 0.0) continue;
        double d = p.mass / (p.right - p.left);
        auto lo = std::lower_bound(ks.begin(), ks.end(), p.left) - ks.begin();
        auto hi = std::lower_bound(ks.begin(), ks.end(), p.right) - ks.begin();
        for (auto i = lo; i + 0 < hi; ++i) dens[i] += d;
    }

    std::vector<double> am(ks.size(), 0.0);
    for (const auto& [x, m] : atom_map) {
        auto i = std::lower_bound(ks.begin(), ks.end(), x) - ks.begin();
        am[i] = m;
    }

    // Trim knots that carry nothing at either end.
    size_t b = 0, e = ks.size();
    while (b + 1 < e && am[b] <= floor && dens[b] <= 0.0) ++b;
    while (e > b + 1 && am[e - 1] <= floor && dens[e - 2] <= 0.0) --e;
    if (b > 0 || e < ks.size()) {
        ks = std::vector<double>(ks.begin() + b, ks.begin() + e);
        am = std::vector<double>(am.begin() + b, am.begin() + e);
        dens = std::vector<double>(dens.begin() + b, dens.begin() + (e > b ? e - 1 : b));
    }

    knots_ = std::move(ks);
    dens_ = std::move(dens);
    atom_ = std::move(am);
    cum_.assign(knots_.size(), 0.0);
    double run = 0.0;
    for (size_t i = 0; i < knots_.size(); ++i) {
        cum_[i] = run;
        run += atom_[i];
        if (i + 1 < knots_.size()) run += dens_[i] * (knots_[i + 1] - knots_[i]);
    }
    total_ = run;
    if (total_ <= floor) {
        knots_.clear();
        dens_.clear();
        atom_.clear();
        cum_.clear();
        atoms_.clear();
        total_ = 0.0;
        return;
    }
    atoms_.clear();
    for (size_t i = 0; i < knots_.size(); ++i)
        if (atom_[i] > floor) atoms_.push_back({knots_[i], atom_[i]});
}

double Measure::mean() const {
    double m = 0.0;
    for (size_t i = 0; i < knots_.size(); ++i) {
        m += atom_[i] * knots_[i];
        if (i + 1 < knots_.size() && dens_[i] > 0.0)
            m += dens_[i] * 0.5 * (knots_[i + 1] * knots_[i + 1] - knots_[i] * knots_[i]);
    }
    return m;
}

double Measure::min_support() const { return knots_.empty() ? kInf : knots_.front(); }
double Measure::max_support() const { return knots_.empty() ? -kInf : knots_.back(); }

double Measure::cdf(double x) const {
    if (knots_.empty() || x < knots_.front()) return 0.0;
    size_t i = std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin() - 1;
    double f = cum_[i] + atom_[i];
    if (i + 1 < knots_.size()) f += dens_[i] * (x - knots_[i]);
    return f;
}

double Measure::cdf_left(double x) const {
    if (knots_.empty() || x <= knots_.front()) return 0.0;
    size_t i = std::lower_bound(knots_.begin(), knots_.end(), x) - knots_.begin() - 1;
    double f = cum_[i] + atom_[i];
    if (i + 1 < knots_.size()) f += dens_[i] * (x - knots_[i]);
    return f;
}

double Measure::mass_at(double x) const {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), x);
    if (it == knots_.end() || *it != x) return 0.0;
    return atom_[it - knots_.begin()];
}

double Measure::density_at(double x) const {
    if (knots_.size() < 2 || x < knots_.front() || x >= knots_.back()) return 0.0;
    size_t i = std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin();
    if (i == 0) return dens_[0];
    return dens_[i - 1];
}

double Measure::quantile_left(double u) const {
    if (u <= 0.0 || knots_.empty()) return -kInf;
    if (u > total_) return kInf;
    size_t n = knots_.size();
    size_t i = std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    if (i == n) return knots_.back();
    if (i == 0) return knots_.front();
    double base = cum_[i - 1] + atom_[i - 1];
    if (u <= base) return knots_[i - 1];
    return knots_[i - 1] + (u - base) / dens_[i - 1];
}

double Measure::quantile_right(double u) const {
    if (knots_.empty()) return u >= total_ ? kInf : -kInf;
    if (u >= total_) return kInf;
    if (u < 0.0) u = 0.0;
    size_t n = knots_.size();
    size_t i = std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    if (i == n) return knots_.back();
    if (i == 0) return knots_.front();
    double base = cum_[i - 1] + atom_[i - 1];
    if (u < base) return knots_[i - 1];
    return knots_[i - 1] + (u - base) / dens_[i - 1];
}

Measure Measure::restrict_left(double u) const {
    if (u <= 0.0 || is_zero()) return {};
    if (u >= total_) return *this;
    double g = quantile_left(u);
    double below = cdf_left(g);
    Measure out = restrict_interval(-kInf, g, false, false);
    double rest = u - below;
    if (rest > kDropMass * (total_ + 1.0)) out += point(g, rest);
    return out;
}

Measure Measure::restrict_interval(double a, double b, bool include_a, bool include_b) const {
    std::vector<Atom> as;
    std::vector<Piece> ps;
    for (const auto& at : atoms_) {
        bool in = (at.x > a || (include_a && at.x == a)) && (at.x < b || (include_b && at.x == b));
        if (in) as.push_back(at);
    }
    for (size_t i = 0; i + 1 < knots_.size(); ++i) {
        if (dens_[i] <= 0.0) continue;
        double lo = std::max(knots_[i], a);
        double hi = std::min(knots_[i + 1], b);
        if (hi > lo) ps.push_back({lo, hi, dens_[i] * (hi - lo)});
    }
    return Measure(std::move(as), std::move(ps));
}

Measure Measure::restrict_quantile_set(const std::vector<std::pair<double, double>>& js) const {
    std::vector<Atom> as;
    std::vector<Piece> ps;
    for (auto [lo, hi] : js) {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, total_);
        if (!(hi > lo)) continue;
        for (size_t i = 0; i < knots_.size(); ++i) {
            double base = cum_[i];
            double am = atom_[i];
            double take = std::min(hi, base + am) - std::max(lo, base);
            if (take > 0.0) as.push_back({knots_[i], take});
            if (i + 1 < knots_.size() && dens_[i] > 0.0) {
                double c0 = base + am, c1 = cum_[i + 1];
                double mlo = std::max(lo, c0), mhi = std::min(hi, c1);
                if (mhi > mlo) {
                    double x0 = knots_[i] + (mlo - c0) / dens_[i];
                    double x1 = knots_[i] + (mhi - c0) / dens_[i];
                    if (x1 > x0) ps.push_back({x0, x1, mhi - mlo});
                }
            }
        }
    }
    return Measure(std::move(as), std::move(ps));
}

Measure& Measure::operator+=(const Measure& o) {
    std::vector<Atom> as = atoms_;
    as.insert(as.end(), o.atoms_.begin(), o.atoms_.end());
    std::vector<Piece> ps = as_pieces();
    auto ops = o.as_pieces();
    ps.insert(ps.end(), ops.begin(), ops.end());
    canonicalize(std::move(as), std::move(ps));
    return *this;
}

Measure Measure::subtract(const Measure& o, double tol) const {
    double scale = total_ + 1.0;
    std::vector<double> ks = knots_;
    ks.insert(ks.end(), o.knots_.begin(), o.knots_.end());
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    std::vector<Piece> ps;
    for (size_t i = 0; i + 1 < ks.size(); ++i) {
        double mid = 0.5 * (ks[i] + ks[i + 1]);
        double w = ks[i + 1] - ks[i];
        double d = density_at(mid) - o.density_at(mid);
        if (d * w < -tol * scale)
            throw std::domain_error("measure subtract: negative density part");
        if (d > 0.0) ps.push_back({ks[i], ks[i + 1], d * w});
    }
    std::vector<Atom> as;
    for (double x : ks) {
        double m = mass_at(x) - o.mass_at(x);
        if (m < -tol * scale) throw std::domain_error("measure subtract: negative atom");
        if (m > 0.0) as.push_back({x, m});
    }
    return Measure(std::move(as), std::move(ps));
}

std::vector<Piece> Measure::as_pieces() const {
    std::vector<Piece> ps;
    for (size_t i = 0; i + 1 < knots_.size(); ++i)
        if (dens_[i] > 0.0)
            ps.push_back({knots_[i], knots_[i + 1], dens_[i] * (knots_[i + 1] - knots_[i])});
    return ps;
}

namespace {

std::vector<double> merged_knots(const Measure& a, const Measure& b) {
    std::vector<double> ks = a.density_knots();
    const auto& kb = b.density_knots();
    ks.insert(ks.end(), kb.begin(), kb.end());
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

}  // namespace

double wasserstein1(const Measure& a, const Measure& b) {
    auto ks = merged_knots(a, b);
    if (ks.size() < 2) return 0.0;
    double w1 = 0.0;
    for (size_t i = 0; i + 1 < ks.size(); ++i) {
        // F_a - F_b is linear on (k_i, k_{i+1}); integrate |.| exactly.
        double x0 = ks[i], x1 = ks[i + 1];
        double d0 = a.cdf(x0) - b.cdf(x0);
        double d1 = a.cdf_left(x1) - b.cdf_left(x1);
        double w = x1 - x0;
        if (d0 * d1 >= 0.0) {
            w1 += 0.5 * (std::abs(d0) + std::abs(d1)) * w;
        } else {
            double t = d0 / (d0 - d1);  // zero crossing
            w1 += 0.5 * (std::abs(d0) * t + std::abs(d1) * (1.0 - t)) * w;
        }
    }
    return w1;
}

double kolmogorov(const Measure& a, const Measure& b) {
    auto ks = merged_knots(a, b);
    double d = std::abs(a.total_mass() - b.total_mass());
    for (double x : ks) {
        d = std::max(d, std::abs(a.cdf(x) - b.cdf(x)));
        d = std::max(d, std::abs(a.cdf_left(x) - b.cdf_left(x)));
    }
    return d;
}

}  // namespace coupling
