#include <cmath>
#include <random>

#include "coupling/curtain.hpp"
#include "doctest.h"

using namespace coupling;

namespace {

Measure ex1_mu() { return Measure::uniform(-1.0, 1.0, 1.0); }
Measure ex2_mu() { return Measure({}, {{-1.0, 1.0, 0.5}, {-2.0, 2.0, 0.5}}); }
Measure wide_nu() { return Measure::uniform(-2.0, 2.0, 1.0); }
Measure asym_mu() {
    return Measure({{-0.5, 0.25}}, {{0.0, 1.0, 0.5}, {-1.5, 0.5, 0.25}});
}

}  // namespace

TEST_CASE("curtain functions, uniform-in-uniform closed form") {
    CurtainFns fns(ex1_mu(), wide_nu());
    for (double u = 0.05; u < 1.0; u += 0.05) {
        auto [r, s] = fns.RS(u);
        CHECK(r == doctest::Approx(-u - 1.0).epsilon(1e-8));
        CHECK(s == doctest::Approx(3.0 * u - 1.0).epsilon(1e-8));
    }
    CHECK(fns.S_inverse(-0.5) == doctest::Approx(1.0 / 6.0).epsilon(1e-7));
}

TEST_CASE("curtain functions degenerate to the quantile when mu equals nu") {
    Measure m({}, {{-1.0, 0.5, 0.7}, {0.5, 2.0, 0.3}});
    CurtainFns fns(m, m);
    for (double u = 0.1; u < 1.0; u += 0.1) {
        auto [r, s] = fns.RS(u);
        CHECK(r == doctest::Approx(fns.G(u)).epsilon(1e-9));
        CHECK(s == doctest::Approx(fns.G(u)).epsilon(1e-9));
    }
}

TEST_CASE("curtain rides the quantile below the anchor on the two-layer family") {
    CurtainFns fns(ex2_mu(), wide_nu());
    for (double u : {0.02, 0.05, 0.1, 0.12}) {
        CHECK(fns.S(u) == doctest::Approx(fns.G(u)).epsilon(1e-8));
    }
    CHECK(fns.S(0.3) > ex2_mu().quantile_right(0.3) + 1e-3);
}

TEST_CASE("curtain kernel weights and barycenter") {
    Kernel k = curtain_kernel(ex1_mu(), wide_nu(), 0.5);
    CHECK(k.y1 == doctest::Approx(-1.5).epsilon(1e-8));
    CHECK(k.y2 == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(k.w1 == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(k.w2 == doctest::Approx(0.75).epsilon(1e-8));
    CHECK(k.barycenter() == doctest::Approx(0.0).epsilon(1e-12));
    // barycenter is exact by construction at arbitrary levels
    CurtainFns fns(asym_mu(), wide_nu());
    for (double u : {0.1, 0.33, 0.61, 0.9}) {
        Kernel q = curtain_kernel(fns, u);
        CHECK(q.barycenter() == doctest::Approx(q.x).epsilon(1e-12));
        CHECK(q.w1 + q.w2 == doctest::Approx(1.0));
    }
}

TEST_CASE("left-monotonicity of the sampled curtain pair") {
    CurtainFns fns(asym_mu(), wide_nu());
    std::vector<std::pair<double, double>> rs;
    std::vector<double> us;
    for (double u = 0.04; u < 1.0; u += 0.04) {
        us.push_back(u);
        rs.push_back(fns.RS(u));
    }
    for (size_t i = 0; i < us.size(); ++i)
        for (size_t j = i + 1; j < us.size(); ++j) {
            CHECK(rs[i].second <= rs[j].second + 1e-8);
            bool interior = rs[j].first > rs[i].first + 1e-8 &&
                            rs[j].first < rs[i].second - 1e-8;
            CHECK(!interior);
        }
}

TEST_CASE("block partition on the worked families") {
    BlockPartition p1 = partition_blocks(ex1_mu(), wide_nu());
    REQUIRE(p1.blocks.size() == 1);
    REQUIRE(p1.blocks[0].j.size() == 1);
    CHECK(p1.blocks[0].j[0].first == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(p1.blocks[0].j[0].second == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(p1.stay_mu.total_mass() <= 1e-7);
    CHECK(wasserstein1(p1.blocks[0].nu, wide_nu()) <= 1e-6);

    BlockPartition p2 = partition_blocks(ex2_mu(), wide_nu());
    REQUIRE(p2.blocks.size() == 1);
    double m2 = 0.0;
    for (auto& [a, b] : p2.blocks[0].j) m2 += b - a;
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(wasserstein1(p2.blocks[0].nu, wide_nu()) <= 1e-6);

    Measure m({}, {{-1.0, 0.5, 0.7}, {0.5, 2.0, 0.3}});
    BlockPartition pid = partition_blocks(m, m);
    CHECK(pid.blocks.empty());
    CHECK(pid.stay_mu.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("block partition splits separated spread pairs") {
    Measure mu({}, {{-2.0, -1.0, 1.0}, {1.0, 2.0, 1.0}, {-0.25, 0.25, 0.5}});
    Measure nu({}, {{-2.5, -0.5, 1.0}, {0.5, 2.5, 1.0}, {-0.25, 0.25, 0.5}});
    REQUIRE(check_convex_order(mu, nu).ok);
    BlockPartition p = partition_blocks(mu, nu);
    REQUIRE(p.blocks.size() == 2);
    CHECK(p.stay_mu.total_mass() == doctest::Approx(0.5).epsilon(1e-6));
    // nu-mass conservation and mutual singularity via recombination
    Measure all = p.stay_mu;
    double tot = p.stay_mu.total_mass() + p.dropped_mass;
    for (auto& b : p.blocks) {
        all += b.nu;
        tot += b.nu.total_mass();
    }
    CHECK(tot == doctest::Approx(nu.total_mass()).epsilon(1e-6));
    CHECK(wasserstein1(all, nu) <= 1e-5);
    // each block's targets absorb exactly the block's share of nu
    for (auto& b : p.blocks) CHECK_NOTHROW(nu.subtract(b.nu, 1e-5));
}

TEST_CASE("simple left-curtain classification") {
    SlcClass c1 = classify_slc(ex1_mu(), wide_nu());
    CHECK(c1.is_slc);
    CHECK(std::abs(c1.u0) <= 1e-5);
    CHECK(c1.is_kstar);

    SlcClass c2 = classify_slc(ex2_mu(), wide_nu());
    CHECK(c2.is_slc);
    CHECK(std::abs(c2.u0 - 0.125) <= 1e-5);
    CHECK(c2.is_kstar);

    Measure m({}, {{-1.0, 0.5, 0.7}, {0.5, 2.0, 0.3}});
    SlcClass cid = classify_slc(m, m);
    CHECK(!cid.is_slc);
}
