#include "fbpush/calg.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fbpush;

namespace {

MultiPoly Z() { return MultiPoly::variable(2, 0); }
MultiPoly W() { return MultiPoly::variable(2, 1); }
MultiPoly C(Cpx c) { return MultiPoly::constant(2, c); }

CVec v2(Cpx a, Cpx b) {
    CVec x(2);
    x << a, b;
    return x;
}

}  // namespace

TEST(PolyEval, HandExamples) {
    EXPECT_EQ((Z() * Z() + W()).eval(v2({1, 1}, 2)), Cpx(2, 2));
    EXPECT_EQ(MultiPoly(2).eval(v2({3, -1}, {0.5, 7})), Cpx(0));
    EXPECT_EQ((Z() * W() - C(3)).eval(v2(2, 5)), Cpx(7));
}

TEST(PolyEval, DimensionMismatchThrows) {
    CVec x(3);
    x.setZero();
    EXPECT_THROW(Z().eval(x), DimensionError);
}

TEST(PolyArith, CanonicalForms) {
    EXPECT_EQ(Z() * Z(), MultiPoly::monomial({2, 0}, 1.0));
    const MultiPoly d = (Z() + W()) - (Z() + W());
    EXPECT_TRUE(d.is_zero());
    EXPECT_EQ(d.size(), 0u);
    EXPECT_EQ((Z() + C(1)) * (Z() - C(1)), Z() * Z() - C(1));
    EXPECT_EQ(poly_arith(Z(), W(), ArithOp::Scale, 2.0), Z().scaled(2.0));
    EXPECT_THROW(Z() + MultiPoly::variable(3, 0), DimensionError);
}

TEST(PolyArith, MulDegreeAdds) {
    oracle::Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const MultiPoly a = rng.poly(3, 4, 5), b = rng.poly(3, 4, 5);
        if (a.is_zero() || b.is_zero()) continue;
        EXPECT_EQ((a * b).degree(), a.degree() + b.degree());
    }
}

TEST(PolyArith, SelfSubtractionIsEmpty) {
    oracle::Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const MultiPoly a = rng.poly(static_cast<std::size_t>(rng.integer(1, 4)), 6, 8);
        EXPECT_TRUE((a - a).terms().empty());
    }
}

TEST(PolyArith, RingLawsOnRandomTriples) {
    oracle::Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t d = static_cast<std::size_t>(rng.integer(1, 3));
        const MultiPoly a = rng.poly(d, 3, 4), b = rng.poly(d, 3, 4), c = rng.poly(d, 3, 4);
        const MultiPoly l1 = (a * b) * c, r1 = a * (b * c);
        const MultiPoly l2 = a * (b + c), r2 = a * b + a * c;
        const double s1 = std::max(1.0, l1.max_abs_coeff()), s2 = std::max(1.0, l2.max_abs_coeff());
        EXPECT_LE(coeff_distance(l1, r1) / s1, 1e-12);
        EXPECT_LE(coeff_distance(l2, r2) / s2, 1e-12);
    }
}

TEST(PolyArith, ProductMatchesPointwiseProduct) {
    oracle::Rng rng(13);
    for (int i = 0; i < 500; ++i) {
        const MultiPoly a = rng.poly(2, 4, 5), b = rng.poly(2, 4, 5);
        const CVec x = rng.vec(2, 1.5);
        const Cpx want = oracle::eval(a, x) * oracle::eval(b, x);
        EXPECT_LE(oracle::rel_err((a * b).eval(x), want), 1e-12);
        EXPECT_LE(oracle::rel_err((a + b).eval(x), oracle::eval(a, x) + oracle::eval(b, x)), 1e-13);
    }
}

TEST(PolyEval, MatchesNaiveSum) {
    oracle::Rng rng(14);
    for (int i = 0; i < 1000; ++i) {
        const MultiPoly p = rng.poly(3, 6, 10);
        const CVec x = rng.vec(3, 1.2);
        EXPECT_LE(oracle::rel_err(p.eval(x), oracle::eval(p, x)), 1e-13);
    }
}

TEST(ComposeAffine, Examples) {
    const CMat I = CMat::Identity(2, 2);
    EXPECT_EQ(poly_compose_affine(Z() * Z(), I, zeros(2)), Z() * Z());
    CMat S(2, 2);
    S << 0, 1, 1, 0;
    EXPECT_EQ(poly_compose_affine(Z(), S, zeros(2)), W());
    EXPECT_EQ(poly_compose_affine(Z() * Z(), I, v2(1, 0)), Z() * Z() + Z().scaled(2) + C(1));
}

TEST(ComposeAffine, AgreesWithEvaluationAtTransformedPoint) {
    oracle::Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t d = static_cast<std::size_t>(rng.integer(1, 3));
        const MultiPoly p = rng.poly(d, 6, 6);
        const CMat A = rng.mat(d, 0.7);
        const CVec b = rng.vec(d, 0.5), x = rng.vec_in_ball(d, 2.0);
        const Cpx want = oracle::eval(p, A * x + b);
        const Cpx got = poly_compose_affine(p, A, b).eval(x);
        EXPECT_LE(std::abs(got - want) / std::max(1.0, std::abs(want)), 1e-12);
    }
}

TEST(Partial, Examples) {
    EXPECT_EQ(poly_partial(Z() * Z() * W(), 0), (Z() * W()).scaled(2));
    EXPECT_TRUE(poly_partial(C(5), 0).is_zero());
    EXPECT_EQ(poly_partial(Z() * Z() + W() * W() * W(), 1), (W() * W()).scaled(3));
    EXPECT_THROW(poly_partial(Z(), 2), std::out_of_range);
}

TEST(Partial, MatchesCentralDifferences) {
    oracle::Rng rng(16);
    for (int i = 0; i < 500; ++i) {
        const MultiPoly p = rng.poly(3, 5, 6);
        const CVec x = rng.vec(3, 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            const Cpx got = poly_partial(p, j).eval(x);
            EXPECT_LE(std::abs(got - oracle::central_difference(p, x, j)), 1e-6 * (1.0 + std::abs(got)));
        }
    }
}

TEST(Jacobian, Examples) {
    const CVec x = v2({0.3, -1}, 2);
    EXPECT_TRUE(jacobian_at(PolyMap::identity(2), x).isApprox(CMat::Identity(2, 2)));
    CMat S(2, 2);
    S << 0, 1, 1, 0;
    EXPECT_EQ(jacobian_at(PolyMap(2, {W(), Z()}), x), S);
    CMat J(2, 2);
    J << 1, Cpx(2, 2), 0, 1;
    EXPECT_EQ(jacobian_at(PolyMap(2, {Z() + W() * W(), W()}), v2(0, {1, 1})), J);
}

TEST(PolyMapType, ComponentsShareSourceDimension) {
    EXPECT_THROW(PolyMap(2, {Z(), MultiPoly::variable(3, 0)}), DimensionError);
}

TEST(MultiPolyType, RejectsNonFiniteCoefficients) {
    MultiPoly p(1);
    EXPECT_THROW(p.add_term({1}, Cpx(std::numeric_limits<double>::infinity(), 0)), std::invalid_argument);
    EXPECT_THROW(p.add_term({-1}, 1.0), std::invalid_argument);
}
