#pragma once

#include "fbpush/calg.hpp"

#include <optional>
#include <variant>

namespace fbpush {

// Orbits whose coordinates exceed this modulus are reported as escaped.
inline constexpr double kEscapeModulus = 1e12;

struct Applied {
    CVec value;
    bool escaped = false;
    std::size_t escape_letter = 0;
};

inline bool beyond_guard(const CVec& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double re = x[i].real(), im = x[i].imag();
        if (!std::isfinite(re) || !std::isfinite(im)) return true;
        if (std::abs(x[i]) > kEscapeModulus) return true;
    }
    return false;
}

struct ShearLetter {
    std::size_t j;
    MultiPoly p;
};

// ScaleThenShift: z_j -> z_j e^p + q.  ShiftThenScale: z_j -> (z_j + q) e^p.
// The second form is what inverting the first produces, which keeps the
// inverse symbolic.
enum class OvershearForm { ScaleThenShift, ShiftThenScale };

struct OvershearLetter {
    std::size_t j;
    MultiPoly p;
    MultiPoly q;
    OvershearForm form = OvershearForm::ScaleThenShift;
};

struct AffineLetter {
    CMat A;
    CVec b;
};

// Multiplies every coordinate with index >= first by t.
struct ScaleLetter {
    Cpx t;
    std::size_t first = 0;
};

class BasicAut {
public:
    using Variant = std::variant<ShearLetter, OvershearLetter, AffineLetter, ScaleLetter>;

    static BasicAut shear(std::size_t dim, std::size_t j, MultiPoly p) {
        check_index(dim, j);
        require_dim(p.dim(), dim, "Shear polynomial");
        if (!p.independent_of(j)) throw std::invalid_argument("Shear: p must not depend on z_j");
        return BasicAut(dim, ShearLetter{j, std::move(p)});
    }

    static BasicAut overshear(std::size_t dim, std::size_t j, MultiPoly p, MultiPoly q,
                              OvershearForm form = OvershearForm::ScaleThenShift) {
        check_index(dim, j);
        require_dim(p.dim(), dim, "Overshear exponent");
        require_dim(q.dim(), dim, "Overshear shift");
        if (!p.independent_of(j) || !q.independent_of(j)) {
            throw std::invalid_argument("Overshear: p and q must not depend on z_j");
        }
        return BasicAut(dim, OvershearLetter{j, std::move(p), std::move(q), form});
    }

    static BasicAut affine(CMat A, CVec b) {
        if (A.rows() != A.cols()) throw DimensionError("Affine: matrix must be square");
        require_dim(static_cast<std::size_t>(b.size()), static_cast<std::size_t>(A.rows()), "Affine shift");
        if (std::abs(A.determinant()) <= 1e-12) throw std::invalid_argument("Affine: singular matrix");
        const auto dim = static_cast<std::size_t>(A.rows());
        return BasicAut(dim, AffineLetter{std::move(A), std::move(b)});
    }

    static BasicAut affine(CMat A) {
        CVec b = CVec::Zero(A.rows());
        return affine(std::move(A), std::move(b));
    }

    static BasicAut scale(std::size_t dim, Cpx t, std::size_t first = 0) {
        if (t == Cpx(0.0) || !std::isfinite(std::abs(t))) throw std::invalid_argument("Scale: t must be finite and nonzero");
        if (first > dim) throw std::out_of_range("Scale: first fibre coordinate out of range");
        return BasicAut(dim, ScaleLetter{t, first});
    }

    std::size_t dim() const { return dim_; }
    const Variant& data() const { return data_; }

    template <class T>
    const T* as() const { return std::get_if<T>(&data_); }

    bool is_shear() const { return as<ShearLetter>() != nullptr; }

    // Overflow is detected by the caller, which owns the escape policy.
    void apply_in_place(CVec& x) const {
        if (auto* s = as<ShearLetter>()) {
            x[idx(s->j)] += s->p.eval(x);
        } else if (auto* o = as<OvershearLetter>()) {
            const Cpx e = std::exp(o->p.eval(x));
            const Cpx q = o->q.is_zero() ? Cpx(0.0) : o->q.eval(x);
            if (o->form == OvershearForm::ScaleThenShift) {
                x[idx(o->j)] = x[idx(o->j)] * e + q;
            } else {
                x[idx(o->j)] = (x[idx(o->j)] + q) * e;
            }
        } else if (auto* a = as<AffineLetter>()) {
            x = a->A * x + a->b;
        } else if (auto* c = as<ScaleLetter>()) {
            for (std::size_t i = c->first; i < dim_; ++i) x[idx(i)] *= c->t;
        }
    }

    CMat jacobian(const CVec& x) const {
        const auto n = static_cast<Eigen::Index>(dim_);
        CMat J = CMat::Identity(n, n);
        if (auto* s = as<ShearLetter>()) {
            for (std::size_t k = 0; k < dim_; ++k) {
                if (k != s->j) J(idx(s->j), idx(k)) = dp_[k].eval(x);
            }
        } else if (auto* o = as<OvershearLetter>()) {
            const Cpx e = std::exp(o->p.eval(x));
            const Cpx q = o->q.is_zero() ? Cpx(0.0) : o->q.eval(x);
            const Cpx base = o->form == OvershearForm::ScaleThenShift ? x[idx(o->j)] : x[idx(o->j)] + q;
            J(idx(o->j), idx(o->j)) = e;
            for (std::size_t k = 0; k < dim_; ++k) {
                if (k == o->j) continue;
                const Cpx dp = dp_[k].eval(x);
                const Cpx dq = dq_[k].is_zero() ? Cpx(0.0) : dq_[k].eval(x);
                J(idx(o->j), idx(k)) = o->form == OvershearForm::ScaleThenShift
                                           ? base * e * dp + dq
                                           : e * dq + base * e * dp;
            }
        } else if (auto* a = as<AffineLetter>()) {
            J = a->A;
        } else if (auto* c = as<ScaleLetter>()) {
            for (std::size_t i = c->first; i < dim_; ++i) J(idx(i), idx(i)) = c->t;
        }
        return J;
    }

    BasicAut inverse() const {
        if (auto* s = as<ShearLetter>()) return shear(dim_, s->j, -s->p);
        if (auto* o = as<OvershearLetter>()) {
            const auto flipped = o->form == OvershearForm::ScaleThenShift ? OvershearForm::ShiftThenScale
                                                                          : OvershearForm::ScaleThenShift;
            return overshear(dim_, o->j, -o->p, -o->q, flipped);
        }
        if (auto* a = as<AffineLetter>()) {
            CMat inv = a->A.inverse();
            CVec b = -(inv * a->b);
            return affine(std::move(inv), std::move(b));
        }
        const auto* c = as<ScaleLetter>();
        return scale(dim_, 1.0 / c->t, c->first);
    }

    // True when the letter maps {x_i = 0 for i >= fibre_start} into itself for
    // every choice of the leading coordinates.
    bool fixes_fibre_origin(std::size_t fibre_start) const {
        auto vanishes_on_base = [&](const MultiPoly& p) {
            for (const auto& [a, c] : p.terms()) {
                bool has_fibre = false;
                for (std::size_t i = fibre_start; i < a.size(); ++i) has_fibre |= a[i] != 0;
                if (!has_fibre) return false;
            }
            return true;
        };
        if (auto* s = as<ShearLetter>()) return s->j < fibre_start || vanishes_on_base(s->p);
        if (auto* o = as<OvershearLetter>()) return o->j < fibre_start || vanishes_on_base(o->q);
        if (auto* a = as<AffineLetter>()) {
            const auto f = static_cast<Eigen::Index>(fibre_start);
            const auto n = static_cast<Eigen::Index>(dim_);
            return a->A.block(f, 0, n - f, f).isZero(0.0) && a->b.tail(n - f).isZero(0.0);
        }
        return true;
    }

    // True when the letter leaves coordinates below fibre_start untouched.
    bool is_fibred(std::size_t fibre_start) const {
        if (auto* s = as<ShearLetter>()) return s->j >= fibre_start;
        if (auto* o = as<OvershearLetter>()) return o->j >= fibre_start;
        if (auto* a = as<AffineLetter>()) {
            const auto f = static_cast<Eigen::Index>(fibre_start);
            const auto n = static_cast<Eigen::Index>(dim_);
            return a->A.topLeftCorner(f, f).isIdentity(0.0) && a->A.topRightCorner(f, n - f).isZero(0.0) &&
                   a->b.head(f).isZero(0.0);
        }
        return as<ScaleLetter>()->first >= fibre_start;
    }

    // Substitutes the first k coordinates and returns the letter acting on the rest.
    BasicAut specialize(const CVec& w) const {
        const std::size_t k = static_cast<std::size_t>(w.size());
        if (!is_fibred(k)) throw std::invalid_argument("specialize: letter acts on parameter coordinates");
        const std::size_t n = dim_ - k;
        if (auto* s = as<ShearLetter>()) return shear(n, s->j - k, s->p.substitute_prefix(w));
        if (auto* o = as<OvershearLetter>()) {
            return overshear(n, o->j - k, o->p.substitute_prefix(w), o->q.substitute_prefix(w), o->form);
        }
        if (auto* a = as<AffineLetter>()) {
            const auto ki = static_cast<Eigen::Index>(k);
            const auto ni = static_cast<Eigen::Index>(n);
            return affine(a->A.block(ki, ki, ni, ni), a->b.tail(ni) + a->A.block(ki, 0, ni, ki) * w);
        }
        const auto* c = as<ScaleLetter>();
        return scale(n, c->t, c->first - k);
    }

private:
    BasicAut(std::size_t dim, Variant v) : dim_(dim), data_(std::move(v)) {
        if (auto* s = as<ShearLetter>()) {
            for (std::size_t k = 0; k < dim_; ++k) dp_.push_back(s->p.partial(k));
        } else if (auto* o = as<OvershearLetter>()) {
            for (std::size_t k = 0; k < dim_; ++k) {
                dp_.push_back(o->p.partial(k));
                dq_.push_back(o->q.partial(k));
            }
        }
    }

    static void check_index(std::size_t dim, std::size_t j) {
        if (j >= dim) throw std::out_of_range("letter coordinate index out of range");
    }

    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    std::size_t dim_;
    Variant data_;
    std::vector<MultiPoly> dp_, dq_;
};

class AutWord {
public:
    explicit AutWord(std::size_t dim = 0) : dim_(dim) {}

    AutWord(std::size_t dim, std::vector<BasicAut> letters) : dim_(dim), letters_(std::move(letters)) {
        for (const auto& l : letters_) require_dim(l.dim(), dim_, "AutWord letter");
    }

    std::size_t dim() const { return dim_; }
    const std::vector<BasicAut>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }

    AutWord& push_back(BasicAut l) {
        require_dim(l.dim(), dim_, "AutWord letter");
        letters_.push_back(std::move(l));
        return *this;
    }

    Applied apply(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), dim_, "apply");
        Applied out{x, false, 0};
        for (std::size_t i = 0; i < letters_.size(); ++i) {
            letters_[i].apply_in_place(out.value);
            if (beyond_guard(out.value)) {
                out.escaped = true;
                out.escape_letter = i;
                return out;
            }
        }
        return out;
    }

    AutWord inverse() const {
        AutWord out(dim_);
        for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) out.letters_.push_back(it->inverse());
        return out;
    }

    CMat jacobian(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), dim_, "word_jacobian");
        CVec y = x;
        CMat J = CMat::Identity(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        for (const auto& l : letters_) {
            J = l.jacobian(y) * J;
            l.apply_in_place(y);
            if (beyond_guard(y)) throw std::overflow_error("word_jacobian: orbit escaped");
        }
        return J;
    }

    // Letters of *this followed by letters of v.
    AutWord then(const AutWord& v) const {
        require_dim(v.dim_, dim_, "compose");
        AutWord out = *this;
        out.letters_.insert(out.letters_.end(), v.letters_.begin(), v.letters_.end());
        return out;
    }

private:
    std::size_t dim_;
    std::vector<BasicAut> letters_;
};

inline Applied apply(const AutWord& w, const CVec& x) { return w.apply(x); }
inline AutWord invert(const AutWord& w) { return w.inverse(); }
inline CMat word_jacobian(const AutWord& w, const CVec& x) { return w.jacobian(x); }
// apply(compose(u, v), x) == apply(v, apply(u, x)).
inline AutWord compose(const AutWord& u, const AutWord& v) { return u.then(v); }

// A fibred automorphism (z, zeta) -> (z, phi(z, zeta)) of C^{N+n}, stored as a
// word over all N+n coordinates whose letters never move the first N.
class ParamAutWord {
public:
    ParamAutWord() = default;

    ParamAutWord(std::size_t param_dim, AutWord word, bool origin_fixing = false)
        : param_dim_(param_dim), word_(std::move(word)), origin_fixing_(origin_fixing) {
        if (param_dim_ > word_.dim()) throw DimensionError("ParamAutWord: param_dim exceeds word dimension");
        for (const auto& l : word_.letters()) {
            if (!l.is_fibred(param_dim_)) throw std::invalid_argument("ParamAutWord: letter is not fibred");
            if (origin_fixing_ && !l.fixes_fibre_origin(param_dim_)) {
                throw std::invalid_argument("ParamAutWord: letter does not fix the fibre origin");
            }
        }
    }

    std::size_t param_dim() const { return param_dim_; }
    std::size_t fibre_dim() const { return word_.dim() - param_dim_; }
    std::size_t total_dim() const { return word_.dim(); }
    const AutWord& word() const { return word_; }
    bool origin_fixing() const { return origin_fixing_; }

    Applied apply(const CVec& z, const CVec& zeta) const {
        require_dim(static_cast<std::size_t>(z.size()), param_dim_, "ParamAutWord parameter");
        require_dim(static_cast<std::size_t>(zeta.size()), fibre_dim(), "ParamAutWord fibre");
        return word_.apply(concat(z, zeta));
    }

    ParamAutWord inverse() const { return ParamAutWord(param_dim_, word_.inverse(), origin_fixing_); }

    AutWord specialize(const CVec& w) const {
        require_dim(static_cast<std::size_t>(w.size()), param_dim_, "param_specialize");
        AutWord out(fibre_dim());
        for (const auto& l : word_.letters()) out.push_back(l.specialize(w));
        return out;
    }

private:
    std::size_t param_dim_ = 0;
    AutWord word_;
    bool origin_fixing_ = false;
};

inline AutWord param_specialize(const ParamAutWord& pw, const CVec& w) { return pw.specialize(w); }

}  // namespace fbpush
