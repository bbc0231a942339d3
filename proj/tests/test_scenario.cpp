#include "fbpush/json_io.hpp"
#include "fbpush/scenario.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace fbpush;

namespace {

CVec v2(Cpx a, Cpx b) {
    CVec x(2);
    x << a, b;
    return x;
}

CVec v1(Cpx a) { return CVec::Constant(1, a); }

Scenario preset(const std::string& name) {
    return scenario_from_json(io::read_file(std::string(FBPUSH_SOURCE_DIR) + "/presets/" + name + ".json"));
}

// Scenario over the unit disc with f(z) = (z/2, 0) and K the unit ball at (2, 0).
Scenario disc_scenario(double c1 = 0.1) {
    MultiPoly z = MultiPoly::variable(1, 0);
    PolyMap f(1, {z.scaled(0.5), MultiPoly(1)});
    return Scenario("disc", CompactSet::ball(v2(2, 0), 0.5), CompactSet::ball(v1(0), 1.0), f, ShrinkSchedule(c1),
                    0.15);
}

}  // namespace

TEST(SignedGap, Examples) {
    const CompactSet B = CompactSet::ball(v2(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(signed_gap(B, v2(2, 0)), 1.0);
    EXPECT_DOUBLE_EQ(signed_gap(B, v2(0, 0)), -1.0);
    const CompactSet P = CompactSet::polydisc(v2(0, 0), {1.0, 2.0});
    EXPECT_DOUBLE_EQ(signed_gap(P, v2(0, Cpx(0, 3))), 1.0);
    EXPECT_LE(signed_gap(P, v2(0.5, 1.0)), 0.0);
    EXPECT_GT(signed_gap(P, v2(1.5, 1.0)), 0.0);
}

TEST(SignedGap, UnionTakesTheNearestPart) {
    const CompactSet U = CompactSet::union_of(
        2, {CompactSet::ball(v2(0, 0), 1.0), CompactSet::ball(v2(5, 0), 1.0)});
    EXPECT_DOUBLE_EQ(U.signed_gap(v2(4, 0)), 0.0);
    EXPECT_DOUBLE_EQ(U.signed_gap(v2(2.5, 0)), 1.5);
    EXPECT_TRUE(CompactSet::empty(2).is_empty());
    EXPECT_FALSE(CompactSet::empty(2).contains(v2(0, 0)));
}

TEST(SignedGap, BallMatchesEuclideanDistance) {
    oracle::Rng rng(41);
    for (int i = 0; i < 500; ++i) {
        const CVec c = rng.vec(3, 2.0), x = rng.vec(3, 3.0);
        const double r = rng.uniform(0.1, 2.0);
        double d2 = 0.0;
        for (Eigen::Index k = 0; k < 3; ++k) d2 += std::norm(x[k] - c[k]);
        EXPECT_NEAR(CompactSet::ball(c, r).signed_gap(x), std::sqrt(d2) - r, 1e-13);
    }
}

TEST(SignedGap, InflationShiftsGapsExactlyForBalls) {
    oracle::Rng rng(42);
    const Scenario s = disc_scenario();
    for (int i = 0; i < 200; ++i) {
        const CVec x = rng.vec(2, 3.0), z = rng.vec_in_ball(1, 1.0);
        for (std::size_t k = 1; k < 6; ++k) {
            const double a = s.K_stage_at(k, z).signed_gap(x), b = s.K_stage_at(k + 1, z).signed_gap(x);
            EXPECT_NEAR(b - a, s.schedule().gap(k) - s.schedule().gap(k + 1), 1e-13);
        }
    }
}

TEST(SetConstruction, RejectsBadData) {
    EXPECT_THROW(CompactSet::ball(v2(0, 0), 0.0), ScenarioError);
    EXPECT_THROW(CompactSet::polydisc(v2(0, 0), {1.0}), DimensionError);
    EXPECT_THROW(CompactSet::polydisc(v2(0, 0), {1.0, -1.0}), ScenarioError);
}

TEST(Schedule, GapsDecreaseToZero) {
    const ShrinkSchedule s(0.1);
    EXPECT_DOUBLE_EQ(s.gap(1), 0.1);
    for (std::size_t i = 1; i < 30; ++i) EXPECT_LT(s.gap(i + 1), s.gap(i));
    EXPECT_LT(s.gap(60), 1e-15);
    const ShrinkSchedule e(0.0, {0.3, 0.2});
    EXPECT_DOUBLE_EQ(e.gap(1), 0.3);
    EXPECT_DOUBLE_EQ(e.gap(2), 0.2);
    EXPECT_DOUBLE_EQ(e.gap(3), 0.1);
    EXPECT_THROW(ShrinkSchedule(0.1, {0.2, 0.3}), ScenarioError);
    EXPECT_THROW(s.gap(0), std::out_of_range);
}

TEST(GraphTransform, Examples) {
    const CVec p = concat(v1(1), v2(3, 7));
    EXPECT_EQ(graph_transform(PolyMap::zero(1, 2), Direction::Forward, p), p);
    const PolyMap f(1, {MultiPoly::variable(1, 0), MultiPoly(1)});
    EXPECT_EQ(graph_transform(f, Direction::Forward, p), concat(v1(1), v2(2, 7)));
    EXPECT_THROW(graph_transform(f, Direction::Forward, v2(0, 0)), DimensionError);
}

TEST(GraphTransform, RoundTripIsExact) {
    oracle::Rng rng(43);
    const PolyMap f(1, {rng.poly(1, 3, 3), rng.poly(1, 3, 3)});
    for (int i = 0; i < 1000; ++i) {
        const CVec p = rng.vec(3, 2.0);
        const CVec q = graph_transform(f, Direction::Inverse, graph_transform(f, Direction::Forward, p));
        // zeta - f + f can differ from zeta by one rounding of the addition.
        EXPECT_LE((q - p).cwiseAbs().maxCoeff(), 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + p.norm() +
                                                                                                 f.eval(p.head(1)).norm()));
        EXPECT_EQ(q.head(1), p.head(1));
    }
}

TEST(Sampling, DeterministicAndInsideTheSet) {
    const CompactSet P = CompactSet::polydisc(v2({1, 1}, 0), {0.5, 2.0});
    const auto a = sample_set(P, 500, 99, SampleMode::Mixed), b = sample_set(P, 500, 99, SampleMode::Mixed);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(std::memcmp(a[i].data(), b[i].data(), sizeof(Cpx) * 2), 0);
        EXPECT_LE(P.signed_gap(a[i]), 1e-12);
        if (i % 2 == 0) {
            EXPECT_NEAR(P.signed_gap(a[i]), 0.0, 1e-12);
        }
    }
    const auto c = sample_set(P, 500, 100, SampleMode::Mixed);
    EXPECT_NE(a[1], c[1]);
}

TEST(Sampling, BallSamplesFillTheBall) {
    const CompactSet B = CompactSet::ball(v2(0, 0), 1.0);
    const auto s = sample_set(B, 4000, 5);
    int inner = 0;
    for (const auto& x : s) {
        EXPECT_LE(x.norm(), 1.0 + 1e-12);
        inner += x.norm() < std::pow(0.5, 0.25);  // half of the volume of the unit ball in R^4
    }
    EXPECT_NEAR(inner / 4000.0, 0.5, 0.03);
}

TEST(PushedSamples, FlatMapStaysWithinInflatedBall) {
    const Scenario s("flat", CompactSet::ball(v2(2, 0), 0.5), CompactSet::ball(CVec(0), 1.0), PolyMap::zero(0, 2),
                     ShrinkSchedule(0.1), 0.25);
    for (std::size_t i = 1; i <= 3; ++i) {
        const auto pts = s.pushed_set_samples(i, 1000, 3);
        ASSERT_EQ(pts.size(), 1000u);
        std::size_t boundary = 0;
        for (const auto& p : pts) {
            const double d = (p - v2(2, 0)).norm();
            EXPECT_LE(d, 0.5 + s.schedule().gap(i) + 1e-12);
            boundary += std::abs(d - 0.5 - s.schedule().gap(i)) < 1e-12;
        }
        EXPECT_GE(boundary, 500u);
    }
}

TEST(PushedSamples, GraphShiftIsApplied) {
    const Scenario s = disc_scenario();
    for (const auto& p : s.pushed_set_samples(1, 500, 8)) {
        const Cpx z = p[0];
        const CVec k = p.tail(2) + v2(z / 2.0, 0);
        EXPECT_LE(s.K_stage_at(1, p.head(1)).signed_gap(k), 1e-12);
    }
}

TEST(PushedSamples, BitIdenticalAcrossCalls) {
    const Scenario s = preset("param-disc");
    const auto a = s.pushed_set_samples(2, 300, 17), b = s.pushed_set_samples(2, 300, 17);
    for (std::size_t i = 0; i < a.size(); ++i)
        ASSERT_EQ(std::memcmp(a[i].data(), b[i].data(), sizeof(Cpx) * static_cast<std::size_t>(a[i].size())), 0);
}

TEST(PushedSamples, ShippedPresetMissesTheSmallBall) {
    const Scenario s = preset("ball-avoid");
    for (const auto& p : s.pushed_set_samples(1, 20000, 1)) EXPECT_GT(p.tail(2).norm(), s.ball_B());
}

TEST(Admission, ShippedPresetsAreAdmitted) {
    for (const char* name : {"ball-avoid", "param-disc", "moving-fibre"}) {
        EXPECT_NO_THROW(preset(name).admit()) << name;
    }
}

TEST(Admission, RejectsCenterInsideTheObstacle) {
    // f(z) = (2, 0) sits at the centre of K.
    const PolyMap f(1, {MultiPoly::constant(1, 2.0), MultiPoly(1)});
    const Scenario bad("bad", CompactSet::ball(v2(2, 0), 0.5), CompactSet::ball(v1(0), 1.0), f, ShrinkSchedule(0.1),
                       0.15);
    EXPECT_THROW(bad.admit(), ScenarioError);
}

TEST(Admission, RejectsBallMeetingPushedSet) {
    const Scenario bad("bad", CompactSet::ball(v2(2, 0), 0.5), CompactSet::ball(CVec(0), 1.0), PolyMap::zero(0, 2),
                       ShrinkSchedule(0.1), 1.5);
    EXPECT_THROW(bad.admit(), ScenarioError);
}

TEST(Construction, RejectsBadDimensions) {
    EXPECT_THROW(Scenario("x", CompactSet::ball(v1(0), 1.0), CompactSet::ball(v1(0), 1.0), PolyMap::zero(1, 1),
                          ShrinkSchedule(0.1), 0.1),
                 ScenarioError);
    EXPECT_THROW(Scenario("x", CompactSet::ball(v2(2, 0), 0.5), CompactSet::ball(v1(0), 1.0), PolyMap::zero(2, 2),
                          ShrinkSchedule(0.1), 0.1),
                 ScenarioError);
}

TEST(MovingFibre, FibresFollowTheShift) {
    const Scenario s = preset("moving-fibre");
    ASSERT_TRUE(s.moving_fibre());
    const CVec z = v1({0.4, -0.2});
    const CompactSet Kz = s.K_at(z);
    EXPECT_LE((Kz.center() - v2(2.0 + z[0] / 4.0, 0)).norm(), 1e-15);
}
