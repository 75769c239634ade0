#include <cmath>
#include <random>

#include "coupling/measure.hpp"
#include "doctest.h"

using namespace coupling;

TEST_CASE("uniform measure basics") {
    Measure m = Measure::uniform(-1.0, 1.0, 1.0);
    CHECK(m.total_mass() == doctest::Approx(1.0));
    CHECK(m.mean() == doctest::Approx(0.0));
    CHECK(m.atom_free());
    CHECK(m.cdf(0.0) == doctest::Approx(0.5));
    CHECK(m.cdf(-1.0) == doctest::Approx(0.0));
    CHECK(m.cdf(2.0) == doctest::Approx(1.0));
    // left quantile of U(-1,1) is 2u - 1
    CHECK(m.quantile_left(0.25) == doctest::Approx(-0.5));
    CHECK(m.quantile_left(1.0) == doctest::Approx(1.0));
    CHECK(m.quantile_left(0.0) == -kInf);
    CHECK(m.quantile_right(1.0) == kInf);
}

TEST_CASE("overlapping pieces are flattened") {
    // U(0,2) mass 2 overlapping U(1,3) mass 1: density 1,1.5,0.5 on thirds
    Measure m({}, {{0.0, 2.0, 2.0}, {1.0, 3.0, 1.0}});
    CHECK(m.total_mass() == doctest::Approx(3.0));
    CHECK(m.density_at(0.5) == doctest::Approx(1.0));
    CHECK(m.density_at(1.5) == doctest::Approx(1.5));
    CHECK(m.density_at(2.5) == doctest::Approx(0.5));
    CHECK(m.cdf(2.0) == doctest::Approx(2.5));
}

TEST_CASE("atoms and quantile conventions") {
    // mass 1/2 atom at 0 inside U(-1,1) of mass 1
    Measure m({{0.0, 0.5}}, {{-1.0, 1.0, 1.0}});
    CHECK(m.total_mass() == doctest::Approx(1.5));
    CHECK(m.cdf_left(0.0) == doctest::Approx(0.5));
    CHECK(m.cdf(0.0) == doctest::Approx(1.0));
    CHECK(m.mass_at(0.0) == doctest::Approx(0.5));
    // flat stretch of the cdf at the atom: left and right quantiles split
    CHECK(m.quantile_left(0.5) == doctest::Approx(0.0));
    CHECK(m.quantile_left(0.75) == doctest::Approx(0.0));
    CHECK(m.quantile_left(1.0) == doctest::Approx(0.0));
    CHECK(m.quantile_right(0.75) == doctest::Approx(0.0));
    CHECK(m.quantile_right(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.quantile_right(1.0 + 1e-12) > 0.0);
}

TEST_CASE("quantiles invert the cdf on random mixtures") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ur(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Piece> ps;
        std::vector<Atom> as;
        for (int i = 0; i < 3; ++i) {
            double a = ur(rng), b = ur(rng);
            if (a > b) std::swap(a, b);
            if (b - a < 0.1) b = a + 0.1;
            ps.push_back({a, b, 0.2 + std::abs(ur(rng))});
        }
        as.push_back({ur(rng), 0.3});
        Measure m(as, ps);
        for (int i = 1; i < 40; ++i) {
            double u = m.total_mass() * i / 40.0;
            double gl = m.quantile_left(u);
            double gr = m.quantile_right(u);
            CHECK(gl <= gr + 1e-12);
            CHECK(m.cdf_left(gl) <= u + 1e-12);
            CHECK(m.cdf(gr) >= u - 1e-12);
        }
    }
}

TEST_CASE("restrict_left splits mass exactly") {
    Measure m({{0.0, 0.5}}, {{-1.0, 1.0, 1.0}});
    Measure lo = m.restrict_left(0.75);
    CHECK(lo.total_mass() == doctest::Approx(0.75));
    // 0.5 of density below 0 plus 0.25 of the atom
    CHECK(lo.mass_at(0.0) == doctest::Approx(0.25));
    CHECK(lo.cdf(-0.5) == doctest::Approx(0.25));
    Measure rest = m.subtract(lo);
    CHECK(rest.total_mass() == doctest::Approx(0.75));
    CHECK(rest.mass_at(0.0) == doctest::Approx(0.25));
    CHECK(rest.cdf_left(0.0) == doctest::Approx(0.0));
}

TEST_CASE("restrict_quantile_set matches a sampled pushforward") {
    // mid-half stratum of U(-1,1): quantiles in (0.25, 0.75) -> U(-0.5, 0.5)
    Measure m = Measure::uniform(-1.0, 1.0, 1.0);
    Measure mid = m.restrict_quantile_set({{0.25, 0.75}});
    CHECK(mid.total_mass() == doctest::Approx(0.5));
    CHECK(mid.min_support() == doctest::Approx(-0.5));
    CHECK(mid.max_support() == doctest::Approx(0.5));

    // sampled check on a mixture, 1e5 rank-uniform draws
    Measure mix({{0.25, 0.5}}, {{-2.0, -1.0, 1.0}, {0.0, 2.0, 0.5}});
    std::vector<std::pair<double, double>> js = {{0.3, 0.8}, {1.1, 1.7}};
    Measure sel = mix.restrict_quantile_set(js);
    double width = 0.5 + 0.6;
    CHECK(sel.total_mass() == doctest::Approx(width));
    const int n = 100000;
    double err = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i) {
        double t = (i + 0.5) / n * width;
        double u = t < 0.5 ? 0.3 + t : 1.1 + (t - 0.5);
        double x = mix.quantile_left(u);
        ++cnt;
        // at an atom the rank t may fall anywhere inside the cdf jump
        double over = std::max(t - sel.cdf(x), sel.cdf_left(x) - t);
        err = std::max(err, std::max(0.0, over));
    }
    CHECK(cnt == n);
    CHECK(err <= 2.0 * width / n + 1e-9);
}

TEST_CASE("wasserstein and kolmogorov distances") {
    Measure a = Measure::uniform(0.0, 1.0, 1.0);
    Measure b = Measure::uniform(0.5, 1.5, 1.0);
    CHECK(wasserstein1(a, b) == doctest::Approx(0.5));
    CHECK(kolmogorov(a, b) == doctest::Approx(0.5));
    Measure c = Measure::point(0.5, 1.0);
    // |F_U - F_delta| integrates to 1/4 on (0,1)
    CHECK(wasserstein1(a, c) == doctest::Approx(0.25));
}
