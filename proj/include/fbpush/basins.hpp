#pragma once

#include "fbpush/autword.hpp"
#include "fbpush/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fbpush {

class BasinError : public std::runtime_error {
public:
    BasinError(std::string reason, std::string detail)
        : std::runtime_error(reason + ": " + detail), reason(std::move(reason)) {}
    std::string reason;
};

// A sequence G_0, G_1, ... of automorphisms sharing an attracting fixed point.
// Words are used cyclically; generated sequences are materialized up front.
class AutSequence {
public:
    AutSequence() = default;

    static AutSequence cyclic(std::vector<AutWord> words, CVec center) {
        if (words.empty()) throw std::invalid_argument("AutSequence: empty word list");
        for (const auto& w : words) require_dim(w.dim(), static_cast<std::size_t>(center.size()), "AutSequence word");
        AutSequence s;
        s.words_ = std::move(words);
        s.center_ = std::move(center);
        return s;
    }

    // count linear contractions U diag(sigma) V^* about center, with unitary U, V
    // from QR of complex Gaussian matrices and sigma uniform in [lo, hi].
    static AutSequence linear_contractions(std::size_t n, double lo, double hi, std::uint64_t seed,
                                           std::size_t count, CVec center) {
        if (!(0.0 < lo && lo <= hi)) throw std::invalid_argument("linear_contractions: need 0 < lo <= hi");
        require_dim(static_cast<std::size_t>(center.size()), n, "linear_contractions center");
        const auto ni = static_cast<Eigen::Index>(n);
        std::uint64_t state = seed;
        auto uniform = [&state] {
            state = splitmix64(state);
            return (static_cast<double>(state >> 11) + 0.5) * 0x1.0p-53;
        };
        auto gaussian = [&] {
            const double rad = std::sqrt(-2.0 * std::log(uniform()));
            return std::polar(rad, 2.0 * std::numbers::pi * uniform());
        };
        auto unitary = [&] {
            CMat G(ni, ni);
            for (Eigen::Index i = 0; i < ni; ++i)
                for (Eigen::Index j = 0; j < ni; ++j) G(i, j) = gaussian();
            Eigen::HouseholderQR<CMat> qr(G);
            return CMat(qr.householderQ());
        };
        std::vector<AutWord> words;
        for (std::size_t k = 0; k < count; ++k) {
            const CMat U = unitary(), V = unitary();
            CVec sigma(ni);
            for (Eigen::Index i = 0; i < ni; ++i) sigma[i] = lo + (hi - lo) * uniform();
            const CMat A = U * sigma.asDiagonal() * V.adjoint();
            words.emplace_back(n, std::vector<BasicAut>{BasicAut::affine(A, center - A * center)});
        }
        return cyclic(std::move(words), std::move(center));
    }

    std::size_t dim() const { return static_cast<std::size_t>(center_.size()); }
    std::size_t period() const { return words_.size(); }
    const CVec& center() const { return center_; }
    const AutWord& word(std::size_t j) const { return words_[j % words_.size()]; }

    Applied apply(std::size_t j, const CVec& x) const { return word(j).apply(x); }

    // The local model F_j(v) = G_j(center + v) - center.
    Applied local(std::size_t j, const CVec& v) const {
        Applied a = apply(j, center_ + v);
        a.value -= center_;
        return a;
    }

private:
    std::vector<AutWord> words_;
    CVec center_;
};

struct RateBounds {
    double s = 0.4;
    double r = 0.6;
    double delta = 0.5;

    RateBounds() = default;
    RateBounds(double s_, double r_, double delta_) : s(s_), r(r_), delta(delta_) {
        if (!(0.0 < s && s < 0.5 && 0.5 < r && r < 1.0)) {
            throw std::invalid_argument("RateBounds: need 0 < s < 1/2 < r < 1");
        }
        if (!(r * r < s)) throw std::invalid_argument("RateBounds: need r^2 < s");
        if (!(delta > 0.0)) throw std::invalid_argument("RateBounds: delta must be positive");
    }
};

struct RateViolation {
    std::size_t sample = 0;
    std::size_t step = 0;
    double ratio = 0.0;
    bool upper = true;  // which side of the window was crossed
};

enum class BasinVerdict { Attracted, Escaped, Undecided };

inline const char* to_string(BasinVerdict v) {
    switch (v) {
        case BasinVerdict::Attracted: return "attracted";
        case BasinVerdict::Escaped: return "escaped";
        case BasinVerdict::Undecided: return "undecided";
    }
    return "?";
}

struct BasinReport {
    RateBounds bounds;
    double measured_s = std::numeric_limits<double>::infinity();
    double measured_r = 0.0;
    std::size_t samples = 0;
    std::size_t horizon = 0;
    std::size_t violation_count = 0;
    std::vector<RateViolation> violations;  // first few, in sample order
    bool r2_below_s = false;
    std::size_t attracted = 0, escaped = 0, undecided = 0;

    bool passed() const { return violation_count == 0 && r2_below_s; }
};

inline constexpr std::size_t kMaxListedViolations = 64;

// Checks s|v| <= |F_j(v)| <= r|v| for sampled v in the delta-ball and j < horizon
// (horizon 0 means one period of the sequence).
inline BasinReport verify_rates(const AutSequence& seq, const RateBounds& bounds, std::size_t samples,
                                std::size_t horizon = 0, std::uint64_t seed = 1) {
    BasinReport rep;
    rep.bounds = bounds;
    rep.horizon = horizon == 0 ? seq.period() : horizon;
    rep.r2_below_s = bounds.r * bounds.r < bounds.s;
    const std::size_t n = seq.dim();
    const CVec origin = zeros(n);
    LowDiscrepancy ld(2 * n + 1, derive_seed(seed, 0xBA5));
    std::size_t m = 0;
    while (rep.samples < samples) {
        const auto u = ld.point(m++);
        const CVec v = uniforms_to_ball(u.data(), origin, bounds.delta, false);
        const double nv = v.norm();
        if (nv == 0.0) continue;
        const std::size_t idx = rep.samples++;
        for (std::size_t j = 0; j < rep.horizon; ++j) {
            const Applied a = seq.local(j, v);
            const double ratio = a.escaped ? std::numeric_limits<double>::infinity() : a.value.norm() / nv;
            rep.measured_s = std::min(rep.measured_s, ratio);
            rep.measured_r = std::max(rep.measured_r, ratio);
            const bool low = ratio < bounds.s, high = ratio > bounds.r;
            if (low || high) {
                ++rep.violation_count;
                if (rep.violations.size() < kMaxListedViolations) rep.violations.push_back({idx, j, ratio, high});
            }
        }
    }
    return rep;
}

struct Membership {
    BasinVerdict verdict = BasinVerdict::Undecided;
    std::size_t step = 0;
};

inline Membership basin_membership(const AutSequence& seq, const CVec& x, double escape_radius, std::size_t horizon,
                                   double delta) {
    require_dim(static_cast<std::size_t>(x.size()), seq.dim(), "basin_membership point");
    if (!(escape_radius > delta)) throw std::invalid_argument("basin_membership: escape radius must exceed delta");
    CVec cur = x;
    for (std::size_t k = 0;; ++k) {
        if ((cur - seq.center()).norm() <= delta) return {BasinVerdict::Attracted, k};
        if (cur.norm() > escape_radius) return {BasinVerdict::Escaped, k};
        if (k == horizon) return {BasinVerdict::Undecided, k};
        const Applied a = seq.apply(k, cur);
        if (a.escaped) return {BasinVerdict::Escaped, k + 1};
        cur = a.value;
    }
}

// The map (z, w) -> (0.1 w, 0.1 (z + w^2)): a shear, a coordinate swap and a
// contraction, with an attracting fixed point at the origin.
inline AutWord henon_word() {
    AutWord w(2);
    const MultiPoly y = MultiPoly::variable(2, 1);
    w.push_back(BasicAut::shear(2, 0, y * y));
    CMat swap(2, 2);
    swap << 0.0, 1.0, 1.0, 0.0;
    w.push_back(BasicAut::affine(swap));
    w.push_back(BasicAut::scale(2, 0.1));
    return w;
}

namespace detail {

inline MultiPoly truncate(const MultiPoly& p, int degree) {
    MultiPoly out(p.dim());
    for (const auto& [a, c] : p.terms()) {
        int t = 0;
        for (int e : a) t += e;
        if (t <= degree) out.add_term(a, c);
    }
    return out;
}

inline MultiPoly mul_trunc(const MultiPoly& a, const MultiPoly& b, int degree) { return truncate(a * b, degree); }

// p(S(u)) truncated, where S is a vector of series in u.
inline MultiPoly compose_trunc(const MultiPoly& p, const std::vector<MultiPoly>& S, int degree) {
    const std::size_t du = S.empty() ? 0 : S[0].dim();
    std::vector<std::vector<MultiPoly>> powers(S.size());
    auto power = [&](std::size_t i, int e) -> const MultiPoly& {
        auto& v = powers[i];
        if (v.empty()) v.push_back(MultiPoly::constant(du, 1.0));
        while (static_cast<int>(v.size()) <= e) v.push_back(mul_trunc(v.back(), S[i], degree));
        return v[static_cast<std::size_t>(e)];
    };
    MultiPoly out(du);
    for (const auto& [a, c] : p.terms()) {
        MultiPoly term = MultiPoly::constant(du, c);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i] > 0) term = mul_trunc(term, power(i, a[i]), degree);
        out = out + term;
    }
    return out;
}

inline MultiPoly exp_trunc(const MultiPoly& q, int degree) {
    const std::size_t d = q.dim();
    const Cpx c0 = q.coeff(MultiIndex(d, 0));
    MultiPoly r = q - MultiPoly::constant(d, c0);
    MultiPoly term = MultiPoly::constant(d, 1.0), sum = term;
    for (int m = 1; m <= degree; ++m) {
        term = mul_trunc(term, r, degree).scaled(1.0 / m);
        sum = sum + term;
    }
    return sum.scaled(std::exp(c0));
}

// Taylor series of the word at p, in coordinates u with x = p + T u.
inline std::vector<MultiPoly> word_series(const AutWord& G, const CVec& p, const CMat& T, int degree) {
    const std::size_t n = G.dim();
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<MultiPoly> S(n, MultiPoly(n));
    for (Eigen::Index i = 0; i < ni; ++i) {
        S[static_cast<std::size_t>(i)] = MultiPoly::constant(n, p[i]);
        for (Eigen::Index j = 0; j < ni; ++j) {
            MultiIndex e(n, 0);
            e[static_cast<std::size_t>(j)] = 1;
            S[static_cast<std::size_t>(i)].add_term(e, T(i, j));
        }
    }
    for (const auto& L : G.letters()) {
        if (auto* s = L.as<ShearLetter>()) {
            S[s->j] = S[s->j] + compose_trunc(s->p, S, degree);
        } else if (auto* o = L.as<OvershearLetter>()) {
            const MultiPoly e = exp_trunc(compose_trunc(o->p, S, degree), degree);
            const MultiPoly q = compose_trunc(o->q, S, degree);
            S[o->j] = o->form == OvershearForm::ScaleThenShift ? mul_trunc(S[o->j], e, degree) + q
                                                               : mul_trunc(S[o->j] + q, e, degree);
        } else if (auto* a = L.as<AffineLetter>()) {
            std::vector<MultiPoly> next(n, MultiPoly(n));
            for (Eigen::Index i = 0; i < ni; ++i) {
                MultiPoly acc = MultiPoly::constant(n, a->b[i]);
                for (Eigen::Index j = 0; j < ni; ++j)
                    if (a->A(i, j) != Cpx(0.0)) acc = acc + S[static_cast<std::size_t>(j)].scaled(a->A(i, j));
                next[static_cast<std::size_t>(i)] = std::move(acc);
            }
            S = std::move(next);
        } else if (auto* c = L.as<ScaleLetter>()) {
            for (std::size_t i = c->first; i < n; ++i) S[i] = S[i].scaled(c->t);
        }
    }
    // Back to u coordinates.
    const CMat Tinv = T.inverse();
    std::vector<MultiPoly> out(n, MultiPoly(n));
    for (Eigen::Index i = 0; i < ni; ++i) {
        MultiPoly acc(n);
        for (Eigen::Index j = 0; j < ni; ++j) {
            const MultiPoly shifted = S[static_cast<std::size_t>(j)] - MultiPoly::constant(n, p[j]);
            if (Tinv(i, j) != Cpx(0.0)) acc = acc + shifted.scaled(Tinv(i, j));
        }
        out[static_cast<std::size_t>(i)] = std::move(acc);
    }
    return out;
}

inline void for_each_multi_index(std::size_t n, int lo, int hi, const std::function<void(const MultiIndex&)>& fn) {
    MultiIndex a(n, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == n) {
            a[i] = left;
            fn(a);
            return;
        }
        for (int e = left; e >= 0; --e) {
            a[i] = e;
            rec(i + 1, left - e);
        }
    };
    if (n == 0) return;
    for (int d = lo; d <= hi; ++d) rec(0, d);
}

inline Cpx lambda_power(const CVec& lambda, const MultiIndex& a) {
    Cpx v = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int e = 0; e < a[i]; ++e) v *= lambda[static_cast<Eigen::Index>(i)];
    return v;
}

}  // namespace detail

// Linearization data at an attracting fixed point: eigenvalues, eigenbasis and
// the Koenigs series L with L(G~(u)) = D L(u) through the configured degree.
struct KoenigsModel {
    CVec p;
    CVec lambda;
    CMat T, Tinv;
    bool diagonal = false;
    int degree = 8;
    std::vector<MultiPoly> series;
};

inline constexpr double kResonanceTol = 1e-9;

inline KoenigsModel koenigs_model(const AutWord& G, const CVec& p, int degree = 8) {
    const std::size_t n = G.dim();
    require_dim(static_cast<std::size_t>(p.size()), n, "koenigs fixed point");
    const Applied gp = G.apply(p);
    if (gp.escaped || (gp.value - p).norm() > 1e-10 * (1.0 + p.norm())) {
        throw BasinError("not a fixed point", "G(p) != p");
    }
    KoenigsModel m;
    m.p = p;
    m.degree = degree;
    const CMat J = G.jacobian(p);
    const CMat off = J - CMat(J.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0) {
        m.diagonal = true;
        m.lambda = J.diagonal();
        m.T = CMat::Identity(J.rows(), J.cols());
    } else {
        Eigen::ComplexEigenSolver<CMat> es(J);
        m.lambda = es.eigenvalues();
        m.T = es.eigenvectors();
        const Eigen::JacobiSVD<CMat> svd(m.T);
        const auto sv = svd.singularValues();
        if (sv[sv.size() - 1] <= 1e-8 * sv[0]) throw BasinError("not diagonalizable", "eigenbasis is singular");
    }
    m.Tinv = m.T.inverse();
    for (Eigen::Index i = 0; i < m.lambda.size(); ++i) {
        const double a = std::abs(m.lambda[i]);
        if (!(a > 0.0 && a < 1.0)) {
            throw BasinError("non-contracting fixed point", "eigenvalue modulus " + std::to_string(a));
        }
    }
    detail::for_each_multi_index(n, 2, degree, [&](const MultiIndex& a) {
        const Cpx la = detail::lambda_power(m.lambda, a);
        for (Eigen::Index i = 0; i < m.lambda.size(); ++i) {
            if (std::abs(la - m.lambda[i]) <= kResonanceTol * std::abs(m.lambda[i])) {
                std::string alpha;
                for (int e : a) alpha += (alpha.empty() ? "" : ",") + std::to_string(e);
                throw BasinError("resonance", "lambda_" + std::to_string(i) + " = lambda^(" + alpha + ")");
            }
        }
    });

    const auto Gt = detail::word_series(G, p, m.T, degree);
    m.series.assign(n, MultiPoly(n));
    for (std::size_t i = 0; i < n; ++i) m.series[i] = MultiPoly::variable(n, i);
    for (int d = 2; d <= degree; ++d) {
        std::vector<MultiPoly> next = m.series;
        for (std::size_t i = 0; i < n; ++i) {
            const MultiPoly C = detail::compose_trunc(m.series[i], Gt, d);
            const Cpx li = m.lambda[static_cast<Eigen::Index>(i)];
            for (const auto& [a, c] : C.terms()) {
                int t = 0;
                for (int e : a) t += e;
                if (t != d) continue;
                next[i].add_term(a, c / (li - detail::lambda_power(m.lambda, a)));
            }
        }
        m.series = std::move(next);
    }
    return m;
}

struct KoenigsOptions {
    double tol = 1e-14;          // relative displacement between successive estimates
    double series_radius = 0.05; // |u| below which the series is trusted
    std::size_t max_iter = 100000;
};

// lim D^{-k} L(T^{-1}(G^k(x) - p)); for a linear G the series is the identity and
// this is the classical limit of D^{-k}(G^k(x) - p).
inline CVec koenigs_limit(const KoenigsModel& m, const AutWord& G, const CVec& x, const KoenigsOptions& opt = {}) {
    const auto ni = m.lambda.size();
    require_dim(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(ni), "koenigs_limit point");
    CVec cur = x;
    CVec inv_pow = CVec::Ones(ni);
    CVec prev;
    bool have_prev = false;
    double last_disp = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= opt.max_iter; ++k) {
        const CVec u = m.Tinv * (cur - m.p);
        if (u.norm() <= opt.series_radius) {
            CVec est(ni);
            for (Eigen::Index i = 0; i < ni; ++i) est[i] = inv_pow[i] * m.series[static_cast<std::size_t>(i)].eval(u);
            if (have_prev) {
                const double disp = (est - prev).norm();
                if (disp <= opt.tol * (1.0 + est.norm())) return est;
                // Past this point rounding, amplified by D^{-k}, dominates.
                if (disp >= last_disp) return prev;
                last_disp = disp;
            }
            prev = est;
            have_prev = true;
        }
        const Applied a = G.apply(cur);
        if (a.escaped) throw BasinError("not attracted", "orbit escaped");
        cur = a.value;
        for (Eigen::Index i = 0; i < ni; ++i) inv_pow[i] /= m.lambda[i];
    }
    throw BasinError("not attracted", "no convergence within the iteration budget");
}

inline CVec koenigs_limit(const AutWord& G, const CVec& p, const CVec& x) {
    return koenigs_limit(koenigs_model(G, p), G, x);
}

}  // namespace fbpush
