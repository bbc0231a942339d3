#include "fbpush/basins.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fbpush;

namespace {

MultiPoly W() { return MultiPoly::variable(2, 1); }

CVec v2(Cpx a, Cpx b) {
    CVec x(2);
    x << a, b;
    return x;
}

AutWord halving(std::size_t n = 2) { return AutWord(n, {BasicAut::scale(n, 0.5)}); }

AutSequence constant_sequence(const AutWord& w) { return AutSequence::cyclic({w}, zeros(w.dim())); }

// (z, w) -> (a z + w^2, b w) as scale letters followed by a shear.
AutWord diag_plus_square(Cpx a, Cpx b) {
    CMat D = CMat::Zero(2, 2);
    D(0, 0) = a;
    D(1, 1) = b;
    AutWord g(2);
    g.push_back(BasicAut::affine(D));
    // after scaling, w has become b w; add (w_old)^2 = (w / b)^2
    g.push_back(BasicAut::shear(2, 0, (W() * W()).scaled(1.0 / (b * b))));
    return g;
}

// Direct iteration of (z, w) -> (0.1 w, 0.1 (z + w^2)).
BasinVerdict henon_oracle(CVec x) {
    for (int k = 0; k < 1000000; ++k) {
        const double m = x.norm();
        if (m < 1e-12) return BasinVerdict::Attracted;
        if (!(m < 1e100)) return BasinVerdict::Escaped;
        const Cpx z = x[0], w = x[1];
        x[0] = 0.1 * w;
        x[1] = 0.1 * (z + w * w);
    }
    return BasinVerdict::Undecided;
}

}  // namespace

TEST(RateBoundsType, ConstructorEnforcesTheWindow) {
    EXPECT_NO_THROW(RateBounds(0.4, 0.6, 0.5));
    EXPECT_THROW(RateBounds(0.4, 0.7, 0.5), std::invalid_argument);   // r^2 = 0.49 > s
    EXPECT_THROW(RateBounds(0.5, 0.6, 0.5), std::invalid_argument);   // s not below 1/2
    EXPECT_THROW(RateBounds(0.4, 0.5, 0.5), std::invalid_argument);   // r not above 1/2
    EXPECT_THROW(RateBounds(0.0, 0.6, 0.5), std::invalid_argument);
    EXPECT_THROW(RateBounds(0.45, 1.0, 0.5), std::invalid_argument);
    EXPECT_THROW(RateBounds(0.4, 0.6, 0.0), std::invalid_argument);
}

TEST(VerifyRates, HalvingMapCertifies) {
    const BasinReport r = verify_rates(constant_sequence(halving()), RateBounds(0.4, 0.6, 0.5), 500);
    EXPECT_EQ(r.violation_count, 0u);
    EXPECT_TRUE(r.r2_below_s);
    EXPECT_TRUE(r.passed());
    EXPECT_NEAR(r.measured_s, 0.5, 1e-15);
    EXPECT_NEAR(r.measured_r, 0.5, 1e-15);
    EXPECT_EQ(r.samples, 500u);
}

TEST(VerifyRates, WeakContractionViolates) {
    const AutWord w(2, {BasicAut::scale(2, 0.9)});
    const BasinReport r = verify_rates(constant_sequence(w), RateBounds(0.4, 0.6, 0.5), 200);
    EXPECT_GE(r.violation_count, 1u);
    EXPECT_FALSE(r.passed());
    ASSERT_FALSE(r.violations.empty());
    EXPECT_TRUE(r.violations[0].upper);
    EXPECT_NEAR(r.violations[0].ratio, 0.9, 1e-14);
}

TEST(VerifyRates, RandomContractionsMatchSingularValues) {
    const AutSequence seq = AutSequence::linear_contractions(2, 0.42, 0.48, 11, 32, zeros(2));
    double lo = 1.0, hi = 0.0;
    for (std::size_t j = 0; j < seq.period(); ++j) {
        const auto* a = seq.word(j).letters()[0].as<AffineLetter>();
        ASSERT_NE(a, nullptr);
        Eigen::JacobiSVD<CMat> svd(a->A);
        lo = std::min(lo, svd.singularValues().minCoeff());
        hi = std::max(hi, svd.singularValues().maxCoeff());
    }
    EXPECT_GE(lo, 0.42 - 1e-12);
    EXPECT_LE(hi, 0.48 + 1e-12);
    const BasinReport r = verify_rates(seq, RateBounds(0.4, 0.55, 0.5), 300);
    EXPECT_TRUE(r.passed());
    EXPECT_GE(r.measured_s, lo - 1e-12);
    EXPECT_LE(r.measured_r, hi + 1e-12);
}

TEST(VerifyRates, TailBoundOnSampledOrbits) {
    const AutSequence seq = AutSequence::linear_contractions(2, 0.42, 0.48, 5, 8, zeros(2));
    const RateBounds b(0.4, 0.55, 0.5);
    ASSERT_TRUE(verify_rates(seq, b, 200).passed());
    oracle::Rng rng(61);
    for (int i = 0; i < 200; ++i) {
        CVec x = rng.vec_in_ball(2, b.delta);
        for (std::size_t k = 1; k <= 40; ++k) {
            x = seq.apply(k - 1, x).value;
            EXPECT_LE(x.norm(), std::pow(b.r, static_cast<double>(k)) * b.delta * (1.0 + 1e-12));
        }
    }
}

TEST(Membership, Examples) {
    const AutSequence seq = constant_sequence(halving());
    const Membership c = basin_membership(seq, zeros(2), 1e6, 100, 0.05);
    EXPECT_EQ(c.verdict, BasinVerdict::Attracted);
    EXPECT_EQ(c.step, 0u);
    oracle::Rng rng(62);
    for (int i = 0; i < 200; ++i) {
        const CVec x = rng.vec(2, 1000.0);
        const Membership m = basin_membership(seq, x, 1e6, 100, 0.05);
        EXPECT_EQ(m.verdict, BasinVerdict::Attracted);
        EXPECT_LE(m.step, static_cast<std::size_t>(std::ceil(std::log2(x.norm() / 0.05))));
    }
    EXPECT_THROW(basin_membership(seq, zeros(2), 0.01, 10, 0.05), std::invalid_argument);
}

TEST(Membership, HenonGridMatchesLongIteration) {
    const AutSequence seq = constant_sequence(henon_word());
    // The word really is the map the oracle iterates.
    oracle::Rng rng(63);
    for (int i = 0; i < 50; ++i) {
        const CVec x = rng.vec(2, 3.0);
        const CVec y = seq.apply(0, x).value;
        EXPECT_LE(oracle::rel_err(y, v2(0.1 * x[1], 0.1 * (x[0] + x[1] * x[1]))), 1e-15);
    }
    std::size_t mismatch = 0, undecided = 0;
    for (int row = 0; row < 64; ++row) {
        for (int col = 0; col < 64; ++col) {
            const CVec x = v2(-30.0 + 60.0 * (col + 0.5) / 64.0, 30.0 - 60.0 * (row + 0.5) / 64.0);
            const Membership m = basin_membership(seq, x, 1e6, 1000, 0.05);
            undecided += m.verdict == BasinVerdict::Undecided;
            mismatch += m.verdict != henon_oracle(x);
        }
    }
    EXPECT_EQ(mismatch, 0u);
    EXPECT_EQ(undecided, 0u);
}

TEST(Membership, VerdictsSurviveLongerHorizons) {
    const AutSequence seq = constant_sequence(henon_word());
    oracle::Rng rng(64);
    for (int i = 0; i < 500; ++i) {
        const CVec x = rng.vec(2, 40.0);
        for (std::size_t h : {1, 2, 4, 8, 16}) {
            const Membership a = basin_membership(seq, x, 1e6, h, 0.05);
            const Membership b = basin_membership(seq, x, 1e6, 2 * h, 0.05);
            if (a.verdict != BasinVerdict::Undecided) {
                EXPECT_EQ(a.verdict, b.verdict);
            }
        }
    }
}

TEST(Koenigs, LinearHalvingIsTheIdentityShift) {
    const CVec p = v2(1, {0, 2});
    AutWord g(2, {BasicAut::affine(CMat::Identity(2, 2) * 0.5, p * 0.5)});  // x -> p + (x - p)/2
    oracle::Rng rng(65);
    for (int i = 0; i < 50; ++i) {
        const CVec x = p + rng.vec(2, 3.0);
        EXPECT_LE((koenigs_limit(g, p, x) - (x - p)).norm(), 1e-12 * (1.0 + (x - p).norm()));
    }
}

TEST(Koenigs, MatchesClosedFormAndBruteForce) {
    const AutWord g = diag_plus_square(0.5, 1.0 / 3.0);
    // Lambda(z, w) = (z + 18/7 w^2, w) conjugates g to diag(1/2, 1/3).
    auto closed = [](const CVec& x) { return v2(x[0] + 18.0 / 7.0 * x[1] * x[1], x[1]); };
    auto brute = [&](CVec x) {
        for (int k = 0; k < 200; ++k) x = v2(0.5 * x[0] + x[1] * x[1], x[1] / 3.0);
        return v2(x[0] * std::pow(2.0, 200), x[1] * std::pow(3.0, 200));
    };
    const KoenigsModel m = koenigs_model(g, zeros(2));
    oracle::Rng rng(66);
    for (int i = 0; i < 100; ++i) {
        const CVec x = rng.vec(2, 1.0);
        const CVec got = koenigs_limit(m, g, x);
        EXPECT_LE((got - closed(x)).norm(), 1e-9 * (1.0 + closed(x).norm()));
        EXPECT_LE((got - brute(x)).norm(), 1e-9 * (1.0 + closed(x).norm()));
    }
}

TEST(Koenigs, FunctionalEquationOnBasinPoints) {
    const AutWord g = diag_plus_square(0.5, 1.0 / 3.0);
    const KoenigsModel m = koenigs_model(g, zeros(2));
    oracle::Rng rng(67);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const CVec x = rng.vec(2, 1.0);
        const CVec lhs = koenigs_limit(m, g, g.apply(x).value);
        const CVec rhs = m.lambda.asDiagonal() * koenigs_limit(m, g, x);
        worst = std::max(worst, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Koenigs, NonDiagonalJacobianInEigenbasis) {
    // h o g o h^{-1} for a linear change h has the same linearization up to basis.
    CMat H(2, 2);
    H << 1.0, 0.4, Cpx(0.2, 0.1), 1.0;
    const AutWord h(2, {BasicAut::affine(H)});
    const AutWord g = h.inverse().then(diag_plus_square(0.5, 1.0 / 3.0)).then(h);
    const KoenigsModel m = koenigs_model(g, zeros(2));
    EXPECT_FALSE(m.diagonal);
    oracle::Rng rng(68);
    for (int i = 0; i < 200; ++i) {
        const CVec x = rng.vec(2, 0.8);
        const CVec lhs = koenigs_limit(m, g, g.apply(x).value);
        const CVec rhs = m.lambda.asDiagonal() * koenigs_limit(m, g, x);
        EXPECT_LE((lhs - rhs).norm(), 1e-8 * std::max(1.0, rhs.norm()));
    }
}

TEST(Koenigs, RefusesResonanceAndBadFixedPoints) {
    try {
        koenigs_model(diag_plus_square(0.25, 0.5), zeros(2));
        FAIL() << "resonant map accepted";
    } catch (const BasinError& e) {
        EXPECT_EQ(e.reason, "resonance");
    }
    try {
        koenigs_model(AutWord(2, {BasicAut::scale(2, 1.5)}), zeros(2));
        FAIL() << "repelling point accepted";
    } catch (const BasinError& e) {
        EXPECT_EQ(e.reason, "non-contracting fixed point");
    }
    try {
        koenigs_model(halving(), v2(1, 0));
        FAIL() << "non-fixed point accepted";
    } catch (const BasinError& e) {
        EXPECT_EQ(e.reason, "not a fixed point");
    }
    CMat J(2, 2);
    J << 0.5, 1.0, 0.0, 0.5;  // Jordan block
    try {
        koenigs_model(AutWord(2, {BasicAut::affine(J)}), zeros(2));
        FAIL() << "Jordan block accepted";
    } catch (const BasinError& e) {
        EXPECT_EQ(e.reason, "not diagonalizable");
    }
}
