#pragma once

#include "fbpush/calg.hpp"
#include "fbpush/sampling.hpp"

#include <limits>
#include <string>

namespace fbpush {

class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SetKind { Ball, Polydisc, Union };

enum class SampleMode { Interior, Boundary, Mixed };

class CompactSet {
public:
    static CompactSet ball(CVec center, double radius) {
        if (!(radius > 0.0)) throw ScenarioError("ball radius must be positive");
        CompactSet s(SetKind::Ball, static_cast<std::size_t>(center.size()));
        s.center_ = std::move(center);
        s.radii_ = {radius};
        return s;
    }

    static CompactSet polydisc(CVec center, std::vector<double> radii) {
        require_dim(radii.size(), static_cast<std::size_t>(center.size()), "polydisc radii");
        if (radii.empty()) throw ScenarioError("polydisc needs at least one coordinate");
        for (double r : radii) {
            if (!(r > 0.0)) throw ScenarioError("polydisc radii must be positive");
        }
        CompactSet s(SetKind::Polydisc, static_cast<std::size_t>(center.size()));
        s.center_ = std::move(center);
        s.radii_ = std::move(radii);
        return s;
    }

    // An empty part list is the empty set.
    static CompactSet union_of(std::size_t dim, std::vector<CompactSet> parts, bool convexity_assumed = true) {
        for (const auto& p : parts) {
            require_dim(p.dim(), dim, "union part");
            if (p.kind() == SetKind::Union) throw ScenarioError("nested unions are not supported");
        }
        CompactSet s(SetKind::Union, dim);
        s.parts_ = std::move(parts);
        s.convexity_assumed_ = convexity_assumed;
        return s;
    }

    static CompactSet empty(std::size_t dim) { return union_of(dim, {}); }

    SetKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const CVec& center() const { return center_; }
    const std::vector<double>& radii() const { return radii_; }
    const std::vector<CompactSet>& parts() const { return parts_; }
    bool convexity_assumed() const { return convexity_assumed_; }
    bool is_empty() const { return kind_ == SetKind::Union && parts_.empty(); }

    // Characteristic radius used for default margins.
    double radius() const {
        if (kind_ == SetKind::Union) {
            double r = 0.0;
            for (const auto& p : parts_) r = std::max(r, p.radius());
            return r;
        }
        return *std::max_element(radii_.begin(), radii_.end());
    }

    double signed_gap(const CVec& x) const {
        require_dim(static_cast<std::size_t>(x.size()), dim_, "signed_gap");
        switch (kind_) {
            case SetKind::Ball: return (x - center_).norm() - radii_[0];
            case SetKind::Polydisc: {
                double g = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < dim_; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    g = std::max(g, std::abs(x[ii] - center_[ii]) - radii_[i]);
                }
                return g;
            }
            case SetKind::Union: {
                double g = std::numeric_limits<double>::infinity();
                for (const auto& p : parts_) g = std::min(g, p.signed_gap(x));
                return g;
            }
        }
        return 0.0;
    }

    bool contains(const CVec& x) const { return signed_gap(x) <= 0.0; }

    CompactSet inflated(double c) const {
        CompactSet s = *this;
        for (double& r : s.radii_) r += c;
        for (auto& p : s.parts_) p = p.inflated(c);
        return s;
    }

    CompactSet translated(const CVec& v) const {
        require_dim(static_cast<std::size_t>(v.size()), dim_, "translate");
        CompactSet s = *this;
        if (kind_ != SetKind::Union) s.center_ += v;
        for (auto& p : s.parts_) p = p.translated(v);
        return s;
    }

    // Number of uniforms consumed per sample.
    std::size_t uniform_dims() const { return 2 * dim_ + 2; }

    CVec sample_from(const double* u, bool on_boundary) const {
        switch (kind_) {
            case SetKind::Ball: return uniforms_to_ball(u, center_, radii_[0], on_boundary);
            case SetKind::Polydisc: return uniforms_to_polydisc(u, center_, radii_, on_boundary);
            case SetKind::Union: {
                if (parts_.empty()) throw ScenarioError("cannot sample the empty set");
                const auto idx = std::min<std::size_t>(
                    static_cast<std::size_t>(u[2 * dim_ + 1] * static_cast<double>(parts_.size())), parts_.size() - 1);
                return parts_[idx].sample_from(u, on_boundary);
            }
        }
        return center_;
    }

private:
    CompactSet(SetKind kind, std::size_t dim) : kind_(kind), dim_(dim), center_(zeros(dim)) {}

    SetKind kind_;
    std::size_t dim_;
    CVec center_;
    std::vector<double> radii_;
    std::vector<CompactSet> parts_;
    bool convexity_assumed_ = true;
};

inline double signed_gap(const CompactSet& s, const CVec& x) { return s.signed_gap(x); }

inline bool boundary_sample(SampleMode mode, std::size_t m) {
    return mode == SampleMode::Boundary || (mode == SampleMode::Mixed && m % 2 == 0);
}

// Deterministic low-discrepancy samples; in Mixed mode every even index lies on the boundary.
inline std::vector<CVec> sample_set(const CompactSet& set, std::size_t count, std::uint64_t seed,
                                    SampleMode mode = SampleMode::Interior) {
    LowDiscrepancy seq(set.uniform_dims(), seed);
    std::vector<CVec> out;
    out.reserve(count);
    for (std::size_t m = 0; m < count; ++m) {
        const auto u = seq.point(m);
        out.push_back(set.sample_from(u.data(), boundary_sample(mode, m)));
    }
    return out;
}

struct Sampler {
    CompactSet set;
    std::size_t count;
    std::uint64_t seed;
    SampleMode mode = SampleMode::Interior;

    std::vector<CVec> samples() const { return sample_set(set, count, seed, mode); }
};

class ShrinkSchedule {
public:
    ShrinkSchedule() = default;

    ShrinkSchedule(double c1, std::vector<double> explicit_gaps = {}) : c1_(c1), gaps_(std::move(explicit_gaps)) {
        if (!(c1_ > 0.0) && gaps_.empty()) throw ScenarioError("schedule: c1 must be positive");
        for (std::size_t i = 0; i < gaps_.size(); ++i) {
            if (!(gaps_[i] > 0.0)) throw ScenarioError("schedule: gaps must be positive");
            if (i > 0 && !(gaps_[i] < gaps_[i - 1])) throw ScenarioError("schedule: gaps must decrease");
        }
        if (!gaps_.empty()) c1_ = gaps_.front();
    }

    double c1() const { return c1_; }
    const std::vector<double>& explicit_gaps() const { return gaps_; }

    // Explicit gaps are used first; beyond them the sequence keeps halving.
    double gap(std::size_t i) const {
        if (i == 0) throw std::out_of_range("schedule index starts at 1");
        if (i <= gaps_.size()) return gaps_[i - 1];
        const double last = gaps_.empty() ? 2.0 * c1_ : gaps_.back();
        const std::size_t past = gaps_.empty() ? i : i - gaps_.size();
        return last * std::pow(0.5, static_cast<double>(past));
    }

private:
    double c1_ = 0.1;
    std::vector<double> gaps_;
};

enum class Direction { Forward, Inverse };

// psi(z, zeta) = (z, zeta - f(z)) and its inverse.
inline CVec graph_transform(const PolyMap& f, Direction dir, const CVec& point) {
    const auto N = static_cast<Eigen::Index>(f.src_dim());
    const auto n = static_cast<Eigen::Index>(f.dst_dim());
    require_dim(static_cast<std::size_t>(point.size()), static_cast<std::size_t>(N + n), "graph_transform");
    CVec out = point;
    const CVec fz = f.eval(point.head(N));
    if (dir == Direction::Forward) {
        out.tail(n) -= fz;
    } else {
        out.tail(n) += fz;
    }
    return out;
}

struct Tolerances {
    double eps0 = 1e-3;
    double margin_tau = -1.0;  // negative: 0.05 * radius(K)
};

class Scenario {
public:
    Scenario(std::string name, CompactSet K, CompactSet L, PolyMap f, ShrinkSchedule schedule, double ball_B,
             Tolerances tol = {}, std::uint64_t seed = 1, PolyMap K_shift = {})
        : name_(std::move(name)),
          K_(std::move(K)),
          L_(std::move(L)),
          f_(std::move(f)),
          shift_(std::move(K_shift)),
          schedule_(std::move(schedule)),
          ball_B_(ball_B),
          tol_(tol),
          seed_(seed) {
        n_ = K_.dim();
        N_ = L_.dim();
        if (n_ < 2) throw ScenarioError("scenario: fibre dimension n must be >= 2");
        if (f_.src_dim() != N_ || f_.dst_dim() != n_) throw ScenarioError("scenario: f must map C^N to C^n");
        if (shift_.dst_dim() == 0) shift_ = PolyMap::zero(N_, n_);
        if (shift_.src_dim() != N_ || shift_.dst_dim() != n_) throw ScenarioError("scenario: K shift must map C^N to C^n");
        if (!(ball_B_ > 0.0)) throw ScenarioError("scenario: ball_B must be positive");
        if (L_.is_empty()) throw ScenarioError("scenario: L must be nonempty");
    }

    const std::string& name() const { return name_; }
    std::size_t n() const { return n_; }
    std::size_t N() const { return N_; }
    const CompactSet& K() const { return K_; }
    const CompactSet& L() const { return L_; }
    const PolyMap& f() const { return f_; }
    const PolyMap& K_shift() const { return shift_; }
    bool moving_fibre() const { return !shift_.is_zero(); }
    const ShrinkSchedule& schedule() const { return schedule_; }
    double ball_B() const { return ball_B_; }
    const Tolerances& tolerances() const { return tol_; }
    std::uint64_t seed() const { return seed_; }

    double margin() const { return tol_.margin_tau >= 0.0 ? tol_.margin_tau : 0.05 * K_.radius(); }

    CompactSet K_at(const CVec& z) const { return shift_.is_zero() ? K_ : K_.translated(shift_.eval(z)); }

    CompactSet K_stage_at(std::size_t i, const CVec& z) const { return K_at(z).inflated(schedule_.gap(i)); }

    // Samples of S_i = psi(L x K_i) as points (z, zeta) of C^{N+n}.
    std::vector<CVec> pushed_set_samples(std::size_t i, std::size_t count, std::uint64_t seed) const {
        if (i < 1) throw std::out_of_range("pushed_set_samples: stage index starts at 1");
        std::vector<CVec> out;
        if (K_.is_empty()) return out;
        const CompactSet Ki = K_.inflated(schedule_.gap(i));
        const std::size_t dl = L_.uniform_dims(), dk = Ki.uniform_dims();
        LowDiscrepancy seq(dl + dk, seed);
        out.reserve(count);
        for (std::size_t m = 0; m < count; ++m) {
            const auto u = seq.point(m);
            const bool bd = boundary_sample(SampleMode::Mixed, m);
            const CVec z = L_.sample_from(u.data(), bd);
            CVec k = Ki.sample_from(u.data() + dl, bd);
            if (!shift_.is_zero()) k += shift_.eval(z);
            out.push_back(graph_transform(f_, Direction::Forward, concat(z, k)));
        }
        return out;
    }

    // Sampled admission: f(z) stays a margin away from K_1 and S_1 misses L x B.
    void admit(std::size_t samples = 2048) const {
        if (K_.is_empty()) return;
        const auto zs = sample_set(L_, samples, derive_seed(seed_, 0xAD01), SampleMode::Mixed);
        for (const auto& z : zs) {
            const double g = K_stage_at(1, z).signed_gap(f_.eval(z));
            if (!(g > margin())) {
                throw ScenarioError("scenario '" + name_ + "' rejected: f(z) within margin of K_1 (gap " +
                                    std::to_string(g) + ")");
            }
        }
        for (const auto& p : pushed_set_samples(1, samples, derive_seed(seed_, 0xAD02))) {
            const double mod = p.tail(static_cast<Eigen::Index>(n_)).norm();
            if (!(mod > ball_B_)) {
                throw ScenarioError("scenario '" + name_ + "' rejected: S_1 meets L x B (fibre modulus " +
                                    std::to_string(mod) + ")");
            }
        }
    }

private:
    std::string name_;
    CompactSet K_, L_;
    PolyMap f_, shift_;
    ShrinkSchedule schedule_;
    double ball_B_;
    Tolerances tol_;
    std::uint64_t seed_;
    std::size_t n_ = 0, N_ = 0;
};

inline std::vector<CVec> pushed_set_samples(const Scenario& s, std::size_t i, std::size_t count, std::uint64_t seed) {
    return s.pushed_set_samples(i, count, seed);
}

}  // namespace fbpush
