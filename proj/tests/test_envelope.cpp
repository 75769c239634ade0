#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "coupling/envelope.hpp"
#include "doctest.h"

using namespace coupling;
using Coef = PiecewiseQuadratic::Coef;

namespace {

// f continuous with random piecewise-constant curvature and linear tails.
PiecewiseQuadratic random_pq(std::mt19937& rng) {
    std::uniform_real_distribution<double> ur(0.0, 1.0);
    int n = 3 + (int)(ur(rng) * 6);
    std::vector<double> ks;
    for (int i = 0; i < n; ++i) ks.push_back(-2.0 + 4.0 * ur(rng));
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end(),
                         [](double a, double b) { return b - a < 1e-3; }),
             ks.end());
    n = (int)ks.size();
    std::vector<Coef> cs(n + 1);
    double slope = -1.0 - ur(rng);
    double val = ur(rng);
    cs[0] = {0.0, slope, val - slope * ks[0]};
    for (int p = 1; p < n; ++p) {
        double a = -2.0 + 4.0 * ur(rng);
        double x0 = ks[p - 1];
        // match value and slope at x0
        double b = slope - 2.0 * a * x0;
        double c = val - a * x0 * x0 - b * x0;
        cs[p] = {a, b, c};
        val = cs[p].eval(ks[p]);
        slope = cs[p].slope(ks[p]);
    }
    double send = std::max(slope, -slope) + ur(rng);  // right tail above left slope
    cs[n] = {0.0, send, val - send * ks[n - 1]};
    return PiecewiseQuadratic(ks, cs);
}

}  // namespace

TEST_CASE("two-well envelope has an exact flat chord") {
    // (x+1)^2 left of 0, (x-1)^2 right of 0: envelope flat on [-1, 1]
    PiecewiseQuadratic f({0.0}, {{1.0, 2.0, 1.0}, {1.0, -2.0, 1.0}});
    ConvexEnvelope env(f);
    CHECK(env(0.0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(env(0.5) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(env(-1.5) == doctest::Approx(0.25).epsilon(1e-10));
    auto [xp, zm] = env.contact_bounds(0.0);
    CHECK(xp == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(zm == doctest::Approx(1.0).epsilon(1e-9));
    auto [xm, zp] = env.tangent_extent(0.3);
    CHECK(xm == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(zp == doctest::Approx(1.0).epsilon(1e-9));
    // strictly convex contact degenerates
    auto [a, b] = env.tangent_extent(-1.5);
    CHECK(a == doctest::Approx(-1.5));
    CHECK(b == doctest::Approx(-1.5));
    auto [c, d] = env.contact_bounds(-1.5);
    CHECK(c == doctest::Approx(-1.5));
    CHECK(d == doctest::Approx(-1.5));
}

TEST_CASE("convex function is its own envelope, linear stretch extends") {
    // |x| with a flat bottom: knots -1, 1, slopes -1, 0, 1
    PiecewiseQuadratic f({-1.0, 1.0}, {{0.0, -1.0, -1.0}, {0.0, 0.0, 0.0}, {0.0, 1.0, -1.0}});
    ConvexEnvelope env(f);
    for (double x = -3.0; x <= 3.0; x += 0.1)
        CHECK(env(x) == doctest::Approx(f(x)).epsilon(1e-12));
    auto [xm, zp] = env.tangent_extent(0.0);
    CHECK(xm == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(zp == doctest::Approx(1.0).epsilon(1e-9));
    // on the right linear tail the extent runs to +inf
    auto [a, b] = env.tangent_extent(2.0);
    CHECK(a == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b == kInf);
}

TEST_CASE("kink chord endpoints are found exactly") {
    // concave kink at 0 forces a chord between two parabola touch points:
    // f = x^2 + |shift| trick: left piece x^2, right piece x^2 - x
    PiecewiseQuadratic f({0.0}, {{1.0, 1.0, 0.0}, {1.0, -1.0, 0.0}});
    // common tangent of y = x^2 + x (left) and y = x^2 - x (right):
    // slope s touches left at (s-1)/2, right at (s+1)/2; intercept equality
    // gives -(s-1)^2/4 = -(s+1)^2/4 so s = 0, touch points -1/2 and 1/2.
    ConvexEnvelope env(f);
    auto [xm, zp] = env.tangent_extent(0.0);
    CHECK(xm == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(zp == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(env(0.0) == doctest::Approx(-0.25).epsilon(1e-10));
}

TEST_CASE("ordering chain holds at random queries") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ur(-2.2, 2.2);
    for (int t = 0; t < 20; ++t) {
        PiecewiseQuadratic f = random_pq(rng);
        ConvexEnvelope env(f);
        for (int i = 0; i < 50; ++i) {
            double z = ur(rng);
            auto [xp, zm] = env.contact_bounds(z);
            auto [xm, zp] = env.tangent_extent(z);
            CHECK(xm <= xp + 1e-9);
            CHECK(xp <= z + 1e-12);
            CHECK(z <= zm + 1e-12);
            CHECK(zm <= zp + 1e-9);
            CHECK(env(z) <= f(z) + 1e-9);
        }
    }
}

// The convex envelope is the unique function g with: g <= f, g convex,
// g affine on each component of {g < f}, and each such component either
// touches f at its endpoints or runs to infinity with the tail slope of f.
// Verify those properties segment by segment.
TEST_CASE("envelope satisfies the convex-minorant characterization") {
    std::mt19937 rng(17);
    for (int t = 0; t < 40; ++t) {
        PiecewiseQuadratic f = random_pq(rng);
        ConvexEnvelope env(f);
        const auto& segs = env.segments();
        REQUIRE(!segs.empty());
        CHECK(segs.front().x0 == doctest::Approx(env.domain_lo()));
        CHECK(segs.back().x1 == doctest::Approx(env.domain_hi()));
        double span = env.domain_hi() - env.domain_lo();
        for (size_t i = 0; i < segs.size(); ++i) {
            const auto& s = segs[i];
            CHECK(s.x1 >= s.x0);
            if (i > 0) CHECK(s.x0 == doctest::Approx(segs[i - 1].x1));
            if (s.contact) {
                // f must be convex on a contact run
                size_t p0 = f.piece_index(s.x0 + 1e-11 * span);
                size_t p1 = f.piece_index(s.x1 - 1e-11 * span);
                for (size_t p = p0; p <= p1; ++p)
                    CHECK(f.coef(p).a >= -1e-10);
                for (double k : f.knots())
                    if (k > s.x0 + 1e-9 * span && k < s.x1 - 1e-9 * span)
                        CHECK(f.deriv_left(k) <= f.deriv_right(k) + 1e-9);
            } else {
                // chord lies below f, with equality at finite endpoints
                PiecewiseQuadratic g = f;
                g.add_linear(-s.slope, -s.icept);
                auto [xm, vm] = g.min_on(s.x0, s.x1);
                (void)xm;
                CHECK(vm >= -1e-8);
                double f0 = f(s.x0), f1 = f(s.x1);
                if (i == 0 && std::abs(f.coef(0).a) < 1e-13) {
                    // left-infinite chord: slope equals the tail slope
                    CHECK(s.slope == doctest::Approx(f.coef(0).b).epsilon(1e-9));
                    CHECK(f1 == doctest::Approx(s.icept + s.slope * s.x1).epsilon(1e-7));
                } else if (i + 1 == segs.size() &&
                           std::abs(f.coef(f.piece_count() - 1).a) < 1e-13) {
                    CHECK(s.slope ==
                          doctest::Approx(f.coef(f.piece_count() - 1).b).epsilon(1e-9));
                    CHECK(f0 == doctest::Approx(s.icept + s.slope * s.x0).epsilon(1e-7));
                } else {
                    CHECK(f0 == doctest::Approx(s.icept + s.slope * s.x0).epsilon(1e-7));
                    CHECK(f1 == doctest::Approx(s.icept + s.slope * s.x1).epsilon(1e-7));
                }
            }
            // slopes must be nondecreasing across the junction
            if (i > 0) {
                const auto& q = segs[i - 1];
                double end = q.contact ? f.deriv_left(q.x1) : q.slope;
                double start = s.contact ? f.deriv_right(s.x0) : s.slope;
                CHECK(end <= start + 1e-8);
            }
        }
        // spot-check the minorant property on a dense grid
        std::uniform_real_distribution<double> ur(env.domain_lo() - 2.0,
                                                  env.domain_hi() + 2.0);
        for (int i = 0; i < 400; ++i) {
            double x = ur(rng);
            CHECK(env(x) <= f(x) + 1e-9);
        }
    }
}
