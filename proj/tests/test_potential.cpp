#include <cmath>
#include <random>

#include "coupling/potential.hpp"
#include "doctest.h"

using namespace coupling;

TEST_CASE("put potential of uniforms, closed form") {
    Measure u11 = Measure::uniform(-1.0, 1.0, 1.0);
    Measure u22 = Measure::uniform(-2.0, 2.0, 1.0);
    PiecewiseQuadratic p1 = put_potential(u11);
    PiecewiseQuadratic p2 = put_potential(u22);
    for (double k = -3.0; k <= 3.0; k += 0.1) {
        double e1 = k <= -1 ? 0.0 : (k >= 1 ? k : (k + 1) * (k + 1) / 4.0);
        double e2 = k <= -2 ? 0.0 : (k >= 2 ? k : (k + 2) * (k + 2) / 8.0);
        CHECK(p1(k) == doctest::Approx(e1).epsilon(1e-12));
        CHECK(p2(k) == doctest::Approx(e2).epsilon(1e-12));
    }
}

TEST_CASE("put-call parity at random strikes") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ur(-4.0, 4.0);
    Measure m({{0.3, 0.4}}, {{-2.0, 0.5, 1.0}, {-1.0, 3.0, 0.7}});
    for (int i = 0; i < 1000; ++i) {
        double k = ur(rng);
        CHECK(std::abs(put_call_gap(m, k)) <= 1e-10);
    }
}

TEST_CASE("dispersion closed forms for the two uniform families") {
    // (U(-1,1), U(-2,2)): D = (2-k^2)/8 inside (-1,1)
    Measure mu1 = Measure::uniform(-1.0, 1.0, 1.0);
    Measure nu = Measure::uniform(-2.0, 2.0, 1.0);
    PiecewiseQuadratic d1 = dispersion(mu1, nu);
    for (double k = -1.9; k < 2.0; k += 0.07) {
        double e;
        if (k <= -1.0)
            e = (2.0 + k) * (2.0 + k) / 8.0;
        else if (k <= 1.0)
            e = (2.0 - k * k) / 8.0;
        else
            e = (2.0 - k) * (2.0 - k) / 8.0;
        CHECK(d1(k) == doctest::Approx(e).epsilon(1e-12));
    }
    // (U(-1,1)/2 + U(-2,2)/2, U(-2,2)): D = (2-k^2)/16 inside (-1,1)
    Measure mu2({}, {{-1.0, 1.0, 0.5}, {-2.0, 2.0, 0.5}});
    PiecewiseQuadratic d2 = dispersion(mu2, nu);
    for (double k = -1.9; k < 2.0; k += 0.07) {
        double e;
        if (k <= -1.0)
            e = (2.0 + k) * (2.0 + k) / 16.0;
        else if (k <= 1.0)
            e = (2.0 - k * k) / 16.0;
        else
            e = (2.0 - k) * (2.0 - k) / 16.0;
        CHECK(d2(k) == doctest::Approx(e).epsilon(1e-12));
    }
}

TEST_CASE("convex order check, positive and negative") {
    Measure mu = Measure::uniform(-1.0, 1.0, 1.0);
    Measure nu = Measure::uniform(-2.0, 2.0, 1.0);
    CHECK(check_convex_order(mu, nu).ok);
    auto bad = check_convex_order(nu, mu);
    CHECK(!bad.ok);
    CHECK(bad.min_value < -1e-3);
    CHECK(std::abs(bad.witness_k) < 1.0 + 1e-9);  // dispersion dips inside (-1,1)
    // mean shift breaks the order
    Measure shifted = Measure::uniform(-1.8, 2.2, 1.0);
    CHECK(!check_convex_order(mu, shifted).ok);
}

TEST_CASE("convex order agrees with integrals of convex test functions") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> ur(-2.5, 2.5);
    Measure mu({{0.0, 0.25}}, {{-1.0, 1.0, 0.75}});
    Measure nu({}, {{-1.5, 1.5, 0.5}, {-2.0, 2.0, 0.5}});
    REQUIRE(check_convex_order(mu, nu).ok);
    auto integ = [](const Measure& m, double k) {
        // integral of (x-k)^+ equals the call potential
        return call_potential(m)(k);
    };
    for (int i = 0; i < 200; ++i) {
        double k = ur(rng);
        CHECK(integ(mu, k) <= integ(nu, k) + 1e-12);
    }
}

TEST_CASE("irreducible decomposition splits at dispersion zeros") {
    // two separated spread pairs with an identity gap between them
    Measure mu({}, {{-2.0, -1.0, 1.0}, {1.0, 2.0, 1.0}, {-0.25, 0.25, 0.5}});
    Measure nu({}, {{-2.5, -0.5, 1.0}, {0.5, 2.5, 1.0}, {-0.25, 0.25, 0.5}});
    REQUIRE(check_convex_order(mu, nu).ok);
    Decomposition dec = irreducible_decompose(mu, nu);
    REQUIRE(dec.components.size() == 2);
    CHECK(dec.components[0].mu.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(dec.components[1].mu.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(dec.stay.total_mass() == doctest::Approx(0.5).epsilon(1e-9));
    // component measures recombine to the originals
    Measure all = dec.stay;
    for (const auto& c : dec.components) all += c.mu;
    CHECK(wasserstein1(all, mu) <= 1e-9);
    Measure alln = dec.stay;
    for (const auto& c : dec.components) alln += c.nu;
    CHECK(wasserstein1(alln, nu) <= 1e-9);
    // identity pair decomposes to pure stay
    Decomposition idd = irreducible_decompose(mu, mu);
    CHECK(idd.components.empty());
    CHECK(idd.stay.total_mass() == doctest::Approx(mu.total_mass()));
}
