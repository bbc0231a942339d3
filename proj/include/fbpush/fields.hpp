#pragma once

#include "fbpush/autword.hpp"

#include <numbers>
#include <tuple>

namespace fbpush {

// V(x) = sum_j V_j(x) d/dx_j.
class PolyField {
public:
    PolyField() = default;
    explicit PolyField(PolyMap comps) : comps_(std::move(comps)) {
        if (comps_.src_dim() != comps_.dst_dim()) throw DimensionError("PolyField: components must map C^n to C^n");
    }
    explicit PolyField(std::vector<MultiPoly> comps) : PolyField(to_map(std::move(comps))) {}

    static PolyField zero(std::size_t n) { return PolyField(PolyMap::zero(n, n)); }

    std::size_t dim() const { return comps_.src_dim(); }
    const PolyMap& components() const { return comps_; }
    const MultiPoly& operator[](std::size_t j) const { return comps_[j]; }
    int degree() const { return comps_.degree(); }
    CVec eval(const CVec& x) const { return comps_.eval(x); }

    PolyField operator+(const PolyField& o) const {
        require_dim(o.dim(), dim(), "PolyField add");
        std::vector<MultiPoly> c;
        for (std::size_t j = 0; j < dim(); ++j) c.push_back(comps_[j] + o[j]);
        return PolyField(std::move(c));
    }

    PolyField operator-(const PolyField& o) const {
        require_dim(o.dim(), dim(), "PolyField sub");
        std::vector<MultiPoly> c;
        for (std::size_t j = 0; j < dim(); ++j) c.push_back(comps_[j] - o[j]);
        return PolyField(std::move(c));
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& c : comps_.components()) m = std::max(m, c.max_abs_coeff());
        return m;
    }

private:
    static PolyMap to_map(std::vector<MultiPoly> comps) {
        const std::size_t dim = comps.empty() ? 0 : comps.front().dim();
        return PolyMap(dim, std::move(comps));
    }

    PolyMap comps_;
};

enum class FieldKind { Shear, Overshear };

// A complete field acting on coordinate j, optionally read in the linear
// coordinates y = A x. Shear: y_j' = p(y).  Overshear: y_j' = y_j p(y) + q(y).
class BasicField {
public:
    static BasicField shear(std::size_t dim, std::size_t j, MultiPoly p) {
        return BasicField(FieldKind::Shear, dim, j, std::move(p), MultiPoly(dim));
    }

    static BasicField overshear(std::size_t dim, std::size_t j, MultiPoly p, MultiPoly q) {
        return BasicField(FieldKind::Overshear, dim, j, std::move(p), std::move(q));
    }

    BasicField conjugated(const CMat& A) const {
        if (A.rows() != static_cast<Eigen::Index>(dim_) || A.cols() != A.rows()) {
            throw DimensionError("BasicField: conjugation matrix has wrong shape");
        }
        if (std::abs(A.determinant()) <= 1e-12) throw std::invalid_argument("BasicField: singular conjugation");
        BasicField out = *this;
        out.A_ = A;
        out.Ainv_ = A.inverse();
        return out;
    }

    FieldKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t j() const { return j_; }
    const MultiPoly& p() const { return p_; }
    const MultiPoly& q() const { return q_; }
    bool is_conjugated() const { return A_.has_value(); }
    const std::optional<CMat>& conjugation() const { return A_; }
    const std::optional<CMat>& conjugation_inverse() const { return Ainv_; }

    // Field value in the original coordinates.
    CVec value(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), dim_, "BasicField::value");
        const CVec y = A_ ? CVec(*A_ * x) : x;
        CVec v = zeros(dim_);
        const auto jj = static_cast<Eigen::Index>(j_);
        v[jj] = kind_ == FieldKind::Shear ? p_.eval(y) : y[jj] * p_.eval(y) + q_.eval(y);
        return Ainv_ ? CVec(*Ainv_ * v) : v;
    }

    // The field written as a PolyField in the original coordinates.
    PolyField expanded() const {
        MultiPoly comp = kind_ == FieldKind::Shear ? p_ : MultiPoly::variable(dim_, j_) * p_ + q_;
        if (!A_) {
            std::vector<MultiPoly> c(dim_, MultiPoly(dim_));
            c[j_] = comp;
            return PolyField(std::move(c));
        }
        const MultiPoly pulled = comp.compose_affine(*A_, zeros(dim_));
        std::vector<MultiPoly> c;
        for (std::size_t i = 0; i < dim_; ++i) {
            c.push_back(pulled.scaled((*Ainv_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j_))));
        }
        return PolyField(std::move(c));
    }

private:
    BasicField(FieldKind kind, std::size_t dim, std::size_t j, MultiPoly p, MultiPoly q)
        : kind_(kind), dim_(dim), j_(j), p_(std::move(p)), q_(std::move(q)) {
        if (j_ >= dim_) throw std::out_of_range("BasicField: coordinate index out of range");
        require_dim(p_.dim(), dim_, "BasicField p");
        require_dim(q_.dim(), dim_, "BasicField q");
        if (!p_.independent_of(j_) || !q_.independent_of(j_)) {
            throw std::invalid_argument("BasicField: coefficients must not depend on the moving coordinate");
        }
    }

    FieldKind kind_;
    std::size_t dim_;
    std::size_t j_;
    MultiPoly p_, q_;
    std::optional<CMat> A_, Ainv_;
};

// (e^z - 1) without cancellation for small |z|.
inline Cpx expm1c(Cpx z) {
    const double x = z.real(), y = z.imag();
    const double s = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

inline CVec exact_flow(const BasicField& B, Cpx t, const CVec& x) {
    require_dim(static_cast<std::size_t>(x.size()), B.dim(), "exact_flow");
    if (t == Cpx(0.0)) return x;
    CVec y = B.is_conjugated() ? CVec(*B.conjugation() * x) : x;
    const auto jj = static_cast<Eigen::Index>(B.j());
    if (B.kind() == FieldKind::Shear) {
        y[jj] += t * B.p().eval(y);
    } else {
        const Cpx p = B.p().eval(y);
        const Cpx q = B.q().is_zero() ? Cpx(0.0) : B.q().eval(y);
        const Cpx tp = t * p;
        if (std::abs(tp) < 1e-6) {
            // Series branch of (e^{tp} - 1)/p around the removable singularity.
            const Cpx g = t * (1.0 + tp / 2.0 + tp * tp / 6.0 + tp * tp * tp / 24.0);
            y[jj] = y[jj] * (1.0 + p * g) + q * g;
        } else {
            const Cpx em1 = expm1c(tp);
            y[jj] = y[jj] * (em1 + 1.0) + q * (em1 / p);
        }
    }
    return B.is_conjugated() ? CVec(*B.conjugation_inverse() * y) : y;
}

class DecompositionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FieldSum {
    std::vector<BasicField> parts;
    PolyField claimed_total;

    PolyField expanded() const {
        PolyField acc = PolyField::zero(claimed_total.dim());
        for (const auto& b : parts) acc = acc + b.expanded();
        return acc;
    }

    // Largest coefficient-wise discrepancy, relative to max(1, largest input coefficient).
    double residual() const {
        const PolyField diff = expanded() - claimed_total;
        return diff.max_abs_coeff() / std::max(1.0, claimed_total.max_abs_coeff());
    }
};

enum class FieldClass { PureShearSum, NeedsDecomposition };

inline FieldClass classify_field(const PolyField& V) {
    for (std::size_t j = 0; j < V.dim(); ++j) {
        for (const auto& [a, c] : V[j].terms()) {
            if (a[j] >= 2) return FieldClass::NeedsDecomposition;
        }
    }
    return FieldClass::PureShearSum;
}

namespace detail {

inline double binomial(int m, int s) {
    double r = 1.0;
    for (int i = 1; i <= s; ++i) r = r * (m - s + i) / i;
    return r;
}

inline Cpx root_power(int order, long long e) {
    const long long r = ((e % order) + order) % order;
    return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(r) / order);
}

// Rows j and jp of the identity replaced by y_j = x_j / w, y_jp = x_j + w x_jp.
inline CMat form_conjugation(std::size_t n, std::size_t j, std::size_t jp, Cpx w) {
    CMat A = CMat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const auto a = static_cast<Eigen::Index>(j), b = static_cast<Eigen::Index>(jp);
    A(a, a) = 1.0 / w;
    A(a, b) = 0.0;
    A(b, a) = 1.0;
    A(b, b) = w;
    return A;
}

struct PartKey {
    int kind;  // 0 shear, 1 overshear
    std::size_t j, jp;
    int order;
    int index;
    auto operator<=>(const PartKey&) const = default;
};

}  // namespace detail

// Writes V as a sum of shear and overshear fields, some read in linear
// coordinates. Monomials of degree >= 2 in their own direction are handled in
// the plane (x_j, x_j') with j' the smallest other index: the divergence is
// absorbed by overshear fields along powers of x_j + w^i x_j', and the
// divergence-free remainder is a Hamiltonian field split into shears along
// powers of forms of one higher order.
inline FieldSum al_decompose(const PolyField& V, int max_degree = 8, double tol = 1e-12) {
    const std::size_t n = V.dim();
    if (V.degree() > max_degree) throw DecompositionError("al_decompose: degree cap exceeded");

    std::map<detail::PartKey, MultiPoly> merged;
    auto accumulate = [&](const detail::PartKey& key, const MultiPoly& p) {
        auto [it, inserted] = merged.try_emplace(key, p);
        if (!inserted) it->second += p;
    };

    for (std::size_t j = 0; j < n; ++j) {
        for (const auto& [alpha, c] : V[j].terms()) {
            const int k = alpha[j];
            if (k == 0) {
                accumulate({0, j, j, 0, 0}, MultiPoly::monomial(alpha, c));
                continue;
            }
            if (k == 1) {
                MultiIndex a = alpha;
                a[j] = 0;
                accumulate({1, j, j, 0, 0}, MultiPoly::monomial(a, c));
                continue;
            }
            if (n < 2) throw DecompositionError("al_decompose: needs at least two coordinates");
            const std::size_t jp = j == 0 ? 1 : 0;
            const int b = alpha[jp];
            const int d = k + b;
            MultiIndex rest = alpha;
            rest[j] = 0;
            rest[jp] = 0;

            // Divergence c k x^{k-1} y^b expanded in powers of l_i = x + w^i y.
            const int m = d - 1;
            const int s = b;
            std::vector<BasicField> overs;
            for (int i = 0; i <= m; ++i) {
                const Cpx w = detail::root_power(m + 1, i);
                const Cpx e = c * static_cast<double>(k) * detail::root_power(m + 1, -static_cast<long long>(i) * s) /
                              ((m + 1) * detail::binomial(m, s));
                MultiIndex pa = rest;
                pa[jp] = m;
                MultiPoly p = MultiPoly::monomial(pa, e);
                accumulate({1, j, jp, m + 1, i}, p);
                overs.push_back(BasicField::overshear(n, j, p, MultiPoly(n))
                                    .conjugated(detail::form_conjugation(n, j, jp, w)));
            }

            // Divergence-free remainder R and its Hamiltonian H = (y R_x - x R_y)/(d+1).
            std::vector<MultiPoly> tc(n, MultiPoly(n));
            tc[j] = MultiPoly::monomial(alpha, c);
            PolyField R(tc);
            for (const auto& g : overs) R = R - g.expanded();
            const MultiPoly X = MultiPoly::variable(n, j), Y = MultiPoly::variable(n, jp);
            const MultiPoly H = (Y * R[j] - X * R[jp]).scaled(1.0 / (d + 1));

            const int mh = d + 1;
            for (int i = 0; i <= mh; ++i) {
                MultiPoly h(n);
                for (const auto& [ha, hc] : H.terms()) {
                    const int hs = ha[jp];
                    if (ha[j] + hs != mh) continue;
                    MultiIndex ua = ha;
                    ua[j] = 0;
                    ua[jp] = d;
                    h.add_term(ua, hc * static_cast<double>(d + 1) *
                                       detail::root_power(mh + 1, -static_cast<long long>(i) * hs) /
                                       ((mh + 1) * detail::binomial(mh, hs)));
                }
                if (!h.is_zero()) accumulate({0, j, jp, mh + 1, i}, h);
            }
        }
    }

    FieldSum out{{}, V};
    for (const auto& [key, p] : merged) {
        if (p.is_zero()) continue;
        BasicField f = key.kind == 0 ? BasicField::shear(n, key.j, p) : BasicField::overshear(n, key.j, p, MultiPoly(n));
        if (key.order > 0) {
            f = f.conjugated(detail::form_conjugation(n, key.j, key.jp, detail::root_power(key.order, key.index)));
        }
        out.parts.push_back(std::move(f));
    }
    const double res = out.residual();
    if (!(res <= tol)) {
        throw DecompositionError("al_decompose: residual " + std::to_string(res) + " exceeds tolerance");
    }
    return out;
}

enum class Splitting { LieTrotter, Strang };

// Applies the parts in list order, each for time t/m, repeated m times.
// Strang mode uses the symmetric half-step arrangement.
inline Applied trotter_flow(const FieldSum& S, Cpx t, int m, const CVec& x,
                            Splitting mode = Splitting::LieTrotter) {
    if (m < 1) throw std::invalid_argument("trotter_flow: m must be >= 1");
    Applied out{x, false, 0};
    const Cpx h = t / static_cast<double>(m);
    const std::size_t k = S.parts.size();
    auto step = [&](const BasicField& B, Cpx dt) {
        out.value = exact_flow(B, dt, out.value);
        out.escaped = beyond_guard(out.value);
        return !out.escaped;
    };
    for (int r = 0; r < m; ++r) {
        if (mode == Splitting::LieTrotter || k < 2) {
            for (const auto& B : S.parts) {
                if (!step(B, h)) return out;
            }
        } else {
            for (std::size_t i = 0; i + 1 < k; ++i) {
                if (!step(S.parts[i], h / 2.0)) return out;
            }
            if (!step(S.parts[k - 1], h)) return out;
            for (std::size_t i = k - 1; i-- > 0;) {
                if (!step(S.parts[i], h / 2.0)) return out;
            }
        }
    }
    return out;
}

// The Lie-Trotter product as an automorphism word. Overshear parts carrying both
// p and q are realized as an overshear followed by a shear.
inline AutWord trotter_word(const FieldSum& S, Cpx t, int m) {
    if (m < 1) throw std::invalid_argument("trotter_word: m must be >= 1");
    const std::size_t n = S.claimed_total.dim();
    const Cpx h = t / static_cast<double>(m);
    AutWord step(n);
    for (const auto& B : S.parts) {
        if (B.is_conjugated()) step.push_back(BasicAut::affine(*B.conjugation()));
        if (B.kind() == FieldKind::Shear) {
            step.push_back(BasicAut::shear(n, B.j(), B.p().scaled(h)));
        } else {
            if (!B.p().is_zero()) step.push_back(BasicAut::overshear(n, B.j(), B.p().scaled(h), MultiPoly(n)));
            if (!B.q().is_zero()) step.push_back(BasicAut::shear(n, B.j(), B.q().scaled(h)));
        }
        if (B.is_conjugated()) step.push_back(BasicAut::affine(*B.conjugation_inverse()));
    }
    AutWord out(n);
    for (int r = 0; r < m; ++r) out = out.then(step);
    return out;
}

// Classical RK4 for x' = V(x); reference orbits only.
inline Applied rk4_flow(const PolyField& V, Cpx t, int steps, const CVec& x) {
    if (steps < 1) throw std::invalid_argument("rk4_flow: steps must be >= 1");
    require_dim(static_cast<std::size_t>(x.size()), V.dim(), "rk4_flow");
    Applied out{x, false, 0};
    const Cpx h = t / static_cast<double>(steps);
    CVec& y = out.value;
    for (int i = 0; i < steps; ++i) {
        const CVec k1 = V.eval(y);
        const CVec k2 = V.eval(y + (h / 2.0) * k1);
        const CVec k3 = V.eval(y + (h / 2.0) * k2);
        const CVec k4 = V.eval(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (beyond_guard(y)) {
            out.escaped = true;
            return out;
        }
    }
    return out;
}

// psi_m(s_m) o ... o psi_1(s_1) applied to x: the first field acts first.
inline CVec compose_spanning_flows(const std::vector<BasicField>& fields, const CVec& s, const CVec& x) {
    require_dim(static_cast<std::size_t>(s.size()), fields.size(), "compose_spanning_flows times");
    CVec y = x;
    for (std::size_t i = 0; i < fields.size(); ++i) y = exact_flow(fields[i], s[static_cast<Eigen::Index>(i)], y);
    return y;
}

inline CMat field_value_matrix(const std::vector<BasicField>& fields, const CVec& x) {
    CMat M(x.size(), static_cast<Eigen::Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = fields[i].value(x);
    return M;
}

inline int numerical_rank(const CMat& M, double rel_tol = 1e-10) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<CMat> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv[i] > rel_tol * sv[0] ? 1 : 0;
    return r;
}

// Rank of d/ds of the composed flows at s = 0, which is the matrix of field values at x.
inline int spanning_rank(const std::vector<BasicField>& fields, const CVec& x) {
    return numerical_rank(field_value_matrix(fields, x));
}

}  // namespace fbpush
