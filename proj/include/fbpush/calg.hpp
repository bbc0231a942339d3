#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbpush {

using Cpx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using MultiIndex = std::vector<int>;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                             ", got " + std::to_string(got));
    }
}

inline bool all_finite(const CVec& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i].real()) || !std::isfinite(x[i].imag())) return false;
    }
    return true;
}

inline CVec zeros(std::size_t n) { return CVec::Zero(static_cast<Eigen::Index>(n)); }

inline CVec concat(const CVec& a, const CVec& b) {
    CVec out(a.size() + b.size());
    out << a, b;
    return out;
}

// Sparse polynomial in `dim` complex variables. Terms live in a map keyed by
// exponent vector, so iteration is lexicographic and evaluation order is fixed.
class MultiPoly {
public:
    using TermMap = std::map<MultiIndex, Cpx>;

    explicit MultiPoly(std::size_t dim = 0) : dim_(dim) {}

    static MultiPoly constant(std::size_t dim, Cpx c) {
        MultiPoly p(dim);
        p.add_term(MultiIndex(dim, 0), c);
        return p;
    }

    static MultiPoly variable(std::size_t dim, std::size_t j) {
        if (j >= dim) throw std::out_of_range("MultiPoly::variable: index out of range");
        MultiIndex a(dim, 0);
        a[j] = 1;
        MultiPoly p(dim);
        p.add_term(a, 1.0);
        return p;
    }

    static MultiPoly monomial(MultiIndex alpha, Cpx c) {
        MultiPoly p(alpha.size());
        p.add_term(alpha, c);
        return p;
    }

    std::size_t dim() const { return dim_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    int degree() const {
        int d = 0;
        for (const auto& [a, c] : terms_) d = std::max(d, total(a));
        return d;
    }

    int degree_in(std::size_t j) const { return j < max_exp_.size() ? max_exp_[j] : 0; }

    bool independent_of(std::size_t j) const { return degree_in(j) == 0; }

    Cpx coeff(const MultiIndex& a) const {
        auto it = terms_.find(a);
        return it == terms_.end() ? Cpx(0.0) : it->second;
    }

    // Accumulates c into the coefficient of x^alpha, dropping exact zeros.
    void add_term(const MultiIndex& alpha, Cpx c) {
        require_dim(alpha.size(), dim_, "MultiPoly::add_term");
        for (int e : alpha) {
            if (e < 0) throw std::invalid_argument("MultiPoly: negative exponent");
        }
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
            throw std::invalid_argument("MultiPoly: non-finite coefficient");
        }
        if (c == Cpx(0.0)) return;
        auto [it, inserted] = terms_.try_emplace(alpha, c);
        if (!inserted) {
            it->second += c;
            if (it->second == Cpx(0.0)) {
                terms_.erase(it);
                refresh_exponents();
                return;
            }
        }
        note_exponents(alpha);
    }

    Cpx eval(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), dim_, "poly_eval");
        if (terms_.empty()) return 0.0;
        thread_local std::vector<Cpx> table;
        thread_local std::vector<std::size_t> offset;
        offset.resize(dim_ + 1);
        std::size_t total_len = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            offset[i] = total_len;
            total_len += static_cast<std::size_t>(max_exp_[i]) + 1;
        }
        table.resize(total_len);
        for (std::size_t i = 0; i < dim_; ++i) {
            Cpx* row = table.data() + offset[i];
            row[0] = 1.0;
            for (int e = 1; e <= max_exp_[i]; ++e) row[e] = row[e - 1] * x[static_cast<Eigen::Index>(i)];
        }
        Cpx sum = 0.0;
        for (const auto& [a, c] : terms_) {
            Cpx t = c;
            for (std::size_t i = 0; i < dim_; ++i) {
                if (a[i] != 0) t *= table[offset[i] + static_cast<std::size_t>(a[i])];
            }
            sum += t;
        }
        return sum;
    }

    MultiPoly operator+(const MultiPoly& b) const {
        require_dim(b.dim_, dim_, "poly_arith add");
        MultiPoly out = *this;
        for (const auto& [a, c] : b.terms_) out.add_term(a, c);
        return out;
    }

    MultiPoly operator-(const MultiPoly& b) const {
        require_dim(b.dim_, dim_, "poly_arith sub");
        MultiPoly out = *this;
        for (const auto& [a, c] : b.terms_) out.add_term(a, -c);
        return out;
    }

    MultiPoly operator-() const { return scaled(-1.0); }

    MultiPoly operator*(const MultiPoly& b) const {
        require_dim(b.dim_, dim_, "poly_arith mul");
        MultiPoly out(dim_);
        MultiIndex s(dim_);
        for (const auto& [a1, c1] : terms_) {
            for (const auto& [a2, c2] : b.terms_) {
                for (std::size_t i = 0; i < dim_; ++i) s[i] = a1[i] + a2[i];
                out.add_term(s, c1 * c2);
            }
        }
        return out;
    }

    MultiPoly& operator+=(const MultiPoly& b) { return *this = *this + b; }
    MultiPoly& operator-=(const MultiPoly& b) { return *this = *this - b; }
    MultiPoly& operator*=(const MultiPoly& b) { return *this = *this * b; }

    MultiPoly scaled(Cpx s) const {
        MultiPoly out(dim_);
        for (const auto& [a, c] : terms_) out.add_term(a, c * s);
        return out;
    }

    MultiPoly pow(int e) const {
        if (e < 0) throw std::invalid_argument("MultiPoly::pow: negative exponent");
        MultiPoly out = constant(dim_, 1.0);
        for (int i = 0; i < e; ++i) out = out * *this;
        return out;
    }

    bool operator==(const MultiPoly& b) const { return dim_ == b.dim_ && terms_ == b.terms_; }
    bool operator!=(const MultiPoly& b) const { return !(*this == b); }

    MultiPoly partial(std::size_t j) const {
        if (j >= dim_) throw std::out_of_range("poly_partial: index out of range");
        MultiPoly out(dim_);
        for (const auto& [a, c] : terms_) {
            if (a[j] == 0) continue;
            MultiIndex d = a;
            d[j] -= 1;
            out.add_term(d, c * static_cast<double>(a[j]));
        }
        return out;
    }

    // q(x) = p(Ax + b), expanded exactly.
    MultiPoly compose_affine(const CMat& A, const CVec& b) const {
        require_dim(static_cast<std::size_t>(A.rows()), dim_, "poly_compose_affine rows");
        require_dim(static_cast<std::size_t>(A.cols()), dim_, "poly_compose_affine cols");
        require_dim(static_cast<std::size_t>(b.size()), dim_, "poly_compose_affine shift");
        std::vector<std::vector<MultiPoly>> powers(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            MultiPoly lin = constant(dim_, b[static_cast<Eigen::Index>(i)]);
            for (std::size_t k = 0; k < dim_; ++k) {
                Cpx a = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                if (a != Cpx(0.0)) lin.add_term(unit(k), a);
            }
            powers[i].push_back(constant(dim_, 1.0));
            for (int e = 1; e <= max_exp_[i]; ++e) powers[i].push_back(powers[i].back() * lin);
        }
        MultiPoly out(dim_);
        for (const auto& [a, c] : terms_) {
            MultiPoly t = constant(dim_, c);
            for (std::size_t i = 0; i < dim_; ++i) {
                if (a[i] != 0) t = t * powers[i][static_cast<std::size_t>(a[i])];
            }
            out += t;
        }
        return out;
    }

    // Substitutes x_0..x_{k-1} := w and returns a polynomial in the remaining
    // dim - k variables.
    MultiPoly substitute_prefix(const CVec& w) const {
        const std::size_t k = static_cast<std::size_t>(w.size());
        if (k > dim_) throw DimensionError("substitute_prefix: too many values");
        MultiPoly out(dim_ - k);
        MultiIndex rest(dim_ - k);
        for (const auto& [a, c] : terms_) {
            Cpx v = c;
            for (std::size_t i = 0; i < k; ++i) {
                for (int e = 0; e < a[i]; ++e) v *= w[static_cast<Eigen::Index>(i)];
            }
            std::copy(a.begin() + static_cast<std::ptrdiff_t>(k), a.end(), rest.begin());
            out.add_term(rest, v);
        }
        return out;
    }

    // Re-embeds into a larger space, placing variable i at position offset + i.
    MultiPoly embed(std::size_t new_dim, std::size_t offset) const {
        if (offset + dim_ > new_dim) throw DimensionError("MultiPoly::embed: target too small");
        MultiPoly out(new_dim);
        MultiIndex big(new_dim, 0);
        for (const auto& [a, c] : terms_) {
            std::fill(big.begin(), big.end(), 0);
            std::copy(a.begin(), a.end(), big.begin() + static_cast<std::ptrdiff_t>(offset));
            out.add_term(big, c);
        }
        return out;
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    static int total(const MultiIndex& a) {
        int s = 0;
        for (int e : a) s += e;
        return s;
    }

private:
    MultiIndex unit(std::size_t k) const {
        MultiIndex a(dim_, 0);
        a[k] = 1;
        return a;
    }

    void note_exponents(const MultiIndex& a) {
        if (max_exp_.size() != dim_) max_exp_.assign(dim_, 0);
        for (std::size_t i = 0; i < dim_; ++i) max_exp_[i] = std::max(max_exp_[i], a[i]);
    }

    void refresh_exponents() {
        max_exp_.assign(dim_, 0);
        for (const auto& [a, c] : terms_) note_exponents(a);
    }

    std::size_t dim_;
    TermMap terms_;
    std::vector<int> max_exp_ = std::vector<int>(dim_, 0);
};

inline MultiPoly operator*(Cpx s, const MultiPoly& p) { return p.scaled(s); }

// Largest coefficient-wise difference between two polynomials.
inline double coeff_distance(const MultiPoly& a, const MultiPoly& b) {
    return (a - b).max_abs_coeff();
}

class PolyMap {
public:
    PolyMap() = default;

    PolyMap(std::size_t src_dim, std::vector<MultiPoly> components)
        : src_dim_(src_dim), components_(std::move(components)) {
        for (const auto& c : components_) require_dim(c.dim(), src_dim_, "PolyMap component");
    }

    static PolyMap identity(std::size_t n) {
        std::vector<MultiPoly> comps;
        for (std::size_t i = 0; i < n; ++i) comps.push_back(MultiPoly::variable(n, i));
        return PolyMap(n, std::move(comps));
    }

    static PolyMap zero(std::size_t src_dim, std::size_t dst_dim) {
        return PolyMap(src_dim, std::vector<MultiPoly>(dst_dim, MultiPoly(src_dim)));
    }

    std::size_t src_dim() const { return src_dim_; }
    std::size_t dst_dim() const { return components_.size(); }
    const std::vector<MultiPoly>& components() const { return components_; }
    const MultiPoly& operator[](std::size_t i) const { return components_.at(i); }

    bool is_zero() const {
        return std::all_of(components_.begin(), components_.end(),
                           [](const MultiPoly& p) { return p.is_zero(); });
    }

    int degree() const {
        int d = 0;
        for (const auto& c : components_) d = std::max(d, c.degree());
        return d;
    }

    CVec eval(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), src_dim_, "PolyMap::eval");
        CVec y(static_cast<Eigen::Index>(components_.size()));
        for (std::size_t i = 0; i < components_.size(); ++i) {
            y[static_cast<Eigen::Index>(i)] = components_[i].eval(x);
        }
        return y;
    }

    bool operator==(const PolyMap& o) const {
        return src_dim_ == o.src_dim_ && components_ == o.components_;
    }

private:
    std::size_t src_dim_ = 0;
    std::vector<MultiPoly> components_;
};

// Named entry points mirroring the algebra operations.

inline Cpx poly_eval(const MultiPoly& p, const CVec& x) { return p.eval(x); }

enum class ArithOp { Add, Sub, Mul, Scale };

inline MultiPoly poly_arith(const MultiPoly& a, const MultiPoly& b, ArithOp op, Cpx c = 1.0) {
    switch (op) {
        case ArithOp::Add: return a + b;
        case ArithOp::Sub: return a - b;
        case ArithOp::Mul: return a * b;
        case ArithOp::Scale: return a.scaled(c);
    }
    return a;
}

inline MultiPoly poly_compose_affine(const MultiPoly& p, const CMat& A, const CVec& b) {
    return p.compose_affine(A, b);
}

inline MultiPoly poly_partial(const MultiPoly& p, std::size_t j) { return p.partial(j); }

inline CMat jacobian_at(const PolyMap& m, const CVec& x) {
    require_dim(static_cast<std::size_t>(x.size()), m.src_dim(), "jacobian_at");
    CMat J(static_cast<Eigen::Index>(m.dst_dim()), static_cast<Eigen::Index>(m.src_dim()));
    for (std::size_t i = 0; i < m.dst_dim(); ++i) {
        for (std::size_t j = 0; j < m.src_dim(); ++j) {
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i].partial(j).eval(x);
        }
    }
    return J;
}

}  // namespace fbpush
