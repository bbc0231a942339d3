#pragma once

#include "fbpush/autword.hpp"
#include "fbpush/fields.hpp"
#include "fbpush/parallel.hpp"
#include "fbpush/scenario.hpp"

#include <functional>
#include <sstream>

namespace fbpush {

struct PushoutConfig {
    std::size_t max_stages = 8;
    double r = 2.0;                // per-stage scaling factor, B' = rB
    int degree = 12;               // fibre degree of the blended field, first attempt
    int param_degree = 2;          // total degree in the parameter
    int retries = 3;
    int degree_step = 2;
    double weight_step = 4.0;      // growth of the near-region weight per retry
    double near_weight = 1e-2;
    double frame_shear = 0.5;
    int trotter_steps = 1;
    std::size_t fit_samples = 3000;
    std::size_t near_samples = 2000;
    std::size_t cert_samples = 4000;
    double outlier_cap = 8.0;      // normalized radius beyond which pushed samples are not fitted
};

inline constexpr const char* kConvexityNote =
    "polynomial convexity of the pushed union is assumed for ball/polydisc shapes, not certified";

struct StageCertificate {
    std::size_t stage = 0;
    double eps = 0.0;
    double max_identity_deviation = 0.0;
    double min_gap = std::numeric_limits<double>::infinity();      // min fibre modulus minus (k+1) ball_B
    double min_modulus = std::numeric_limits<double>::infinity();
    std::size_t near_samples = 0;
    std::size_t pushed_samples = 0;
    std::size_t escaped_samples = 0;
    std::uint64_t seed = 0;
    int degree = 0;
    int attempts = 0;
    std::string convexity_note = kConvexityNote;

    bool deviation_ok() const { return max_identity_deviation <= eps; }
    bool gap_ok() const { return min_gap > 0.0; }
    bool passed() const { return deviation_ok() && gap_ok(); }
};

struct Stage {
    std::size_t index = 0;
    ParamAutWord word;
    ParamAutWord inverse;
    double eps = 0.0;
    StageCertificate certificate;
};

class CertificationFailed : public std::runtime_error {
public:
    CertificationFailed(StageCertificate cert, std::string condition)
        : std::runtime_error(describe(cert, condition)), certificate(std::move(cert)), condition(std::move(condition)) {}

    StageCertificate certificate;
    std::string condition;

private:
    static std::string describe(const StageCertificate& c, const std::string& cond) {
        std::ostringstream os;
        os << "stage " << c.stage << " failed certification (" << cond << "): deviation "
           << c.max_identity_deviation << " vs eps " << c.eps << ", gap " << c.min_gap;
        return os.str();
    }
};

inline double stage_eps(double eps0, std::size_t k) { return eps0 * std::pow(0.5, static_cast<double>(k)); }

struct PushOutPlan {
    Scenario scenario;
    PushoutConfig config;
    std::vector<Stage> stages;

    std::size_t N() const { return scenario.N(); }
    std::size_t n() const { return scenario.n(); }

    double eps_budget() const {
        double s = 0.0;
        for (const auto& st : stages) s += st.eps;
        return s;
    }

    bool certified() const {
        return std::all_of(stages.begin(), stages.end(), [](const Stage& s) { return s.certificate.passed(); });
    }

    // Min fibre modulus of the pushed S_k samples after Phi^k, per stage.
    std::vector<double> expulsion_trace() const {
        std::vector<double> t;
        for (const auto& st : stages) t.push_back(st.certificate.min_modulus);
        return t;
    }

    // Whether the trace is nondecreasing from stage 2 on.
    bool trace_nondecreasing() const {
        const auto t = expulsion_trace();
        for (std::size_t i = 2; i < t.size(); ++i)
            if (t[i] < t[i - 1]) return false;
        return true;
    }

    // Phi^k applied to (z, zeta), k = 0 meaning the identity.
    Applied forward(const CVec& point, std::size_t k) const {
        Applied a{point, false, 0};
        for (std::size_t i = 0; i < k && i < stages.size(); ++i) {
            a = stages[i].word.word().apply(a.value);
            if (a.escaped) {
                a.escape_letter = i + 1;
                return a;
            }
        }
        return a;
    }

    // (Phi^K)^{-1} as a single word: the last stage is undone first.
    AutWord inverse_word() const {
        AutWord w(N() + n());
        for (auto it = stages.rbegin(); it != stages.rend(); ++it) w = w.then(it->inverse.word());
        return w;
    }
};

namespace detail {

inline CMat block_diag_identity(std::size_t N, const CMat& P) {
    const auto Ni = static_cast<Eigen::Index>(N), n = P.rows();
    CMat M = CMat::Identity(Ni + n, Ni + n);
    M.bottomRightCorner(n, n) = P;
    return M;
}

inline std::vector<MultiIndex> param_exponents(std::size_t N, int degree) {
    std::vector<MultiIndex> out;
    MultiIndex a(N, 0);
    // Enumerate in lexicographic order.
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i == N) {
            out.push_back(a);
            return;
        }
        for (int e = 0; e <= left; ++e) {
            a[i] = e;
            rec(i + 1, left - e);
        }
        a[i] = 0;
    };
    rec(0, degree);
    return out;
}

// Monomials w^p y^q for the parameter exponents p and q = 0..D.
struct FitBasis {
    std::vector<MultiIndex> pexp;
    int D;

    std::size_t size() const { return pexp.size() * static_cast<std::size_t>(D + 1); }

    void row(const CVec& w, Cpx y, Cpx scale, Eigen::Ref<Eigen::RowVectorXcd, 0, Eigen::InnerStride<>> out) const {
        std::vector<Cpx> ypow(static_cast<std::size_t>(D) + 1);
        ypow[0] = 1.0;
        for (int q = 1; q <= D; ++q) ypow[static_cast<std::size_t>(q)] = ypow[static_cast<std::size_t>(q) - 1] * y;
        Eigen::Index c = 0;
        for (const auto& p : pexp) {
            Cpx wp = scale;
            for (std::size_t i = 0; i < p.size(); ++i) {
                for (int e = 0; e < p[i]; ++e) wp *= w[static_cast<Eigen::Index>(i)];
            }
            for (int q = 0; q <= D; ++q) out[c++] = wp * ypow[static_cast<std::size_t>(q)];
        }
    }

    Cpx eval(const Eigen::VectorXcd& coef, const CVec& w, Cpx y) const {
        Eigen::RowVectorXcd r(static_cast<Eigen::Index>(size()));
        row(w, y, 1.0, r);
        return r * coef;
    }

    // The fitted function as a polynomial on C^{N+n} in (w, y_pivot).
    MultiPoly to_poly(const Eigen::VectorXcd& coef, std::size_t N, std::size_t n, std::size_t pivot) const {
        MultiPoly out(N + n);
        Eigen::Index c = 0;
        for (const auto& p : pexp) {
            for (int q = 0; q <= D; ++q, ++c) {
                MultiIndex a(N + n, 0);
                std::copy(p.begin(), p.end(), a.begin());
                a[N + pivot] = q;
                out.add_term(a, coef[c]);
            }
        }
        return out;
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

// Unitary frame whose first column is c.
inline CMat unitary_frame(const CVec& c) {
    const auto n = c.size();
    CMat Q(n, n);
    Q.col(0) = c;
    Eigen::Index filled = 1;
    for (Eigen::Index e = 0; e < n && filled < n; ++e) {
        CVec v = CVec::Unit(n, e);
        for (Eigen::Index k = 0; k < filled; ++k) v -= Q.col(k).dot(v) * Q.col(k);
        const double nv = v.norm();
        if (nv > 1e-8) Q.col(filled++) = v / nv;
    }
    return Q;
}

}  // namespace detail

inline Stage identity_stage(const Scenario& scn, std::size_t k, double eps) {
    Stage st;
    st.index = k;
    st.eps = eps;
    st.word = ParamAutWord(scn.N(), AutWord(scn.N() + scn.n()), true);
    st.inverse = st.word;
    st.certificate.stage = k;
    st.certificate.eps = eps;
    st.certificate.attempts = 1;
    return st;
}

// Builds and certifies stage k. The blended field is sum_j y_j a_j(w, y_pivot(j)) d/dy_j
// in the frame y = P zeta / R, fitted so that its Lie-Trotter product is the
// scaling by r on the pushed set and the identity on L x kB.
inline Stage build_stage(const Scenario& scn, const PushoutConfig& cfg, std::size_t k,
                         const std::vector<Stage>& prior, double eps0) {
    const std::size_t N = scn.N(), n = scn.n();
    const auto Ni = static_cast<Eigen::Index>(N), ni = static_cast<Eigen::Index>(n);
    const double eps = stage_eps(eps0, k);
    const double Bk = static_cast<double>(k) * scn.ball_B();
    const std::uint64_t seed_k = derive_seed(scn.seed(), 1000 + k);

    auto push_prior = [&](const CVec& x) {
        Applied a{x, false, 0};
        for (const auto& st : prior) {
            a = st.word.word().apply(a.value);
            if (a.escaped) break;
        }
        return a;
    };

    std::vector<CVec> far;
    for (const auto& x : scn.pushed_set_samples(k, cfg.fit_samples, derive_seed(seed_k, 1))) {
        const Applied a = push_prior(x);
        if (!a.escaped) far.push_back(a.value);
    }
    if (far.empty()) return identity_stage(scn, k, eps);

    CVec centroid = zeros(n);
    for (const auto& x : far) centroid += x.tail(ni);
    centroid /= static_cast<double>(far.size());
    if (centroid.norm() < 1e-12) centroid = CVec::Unit(ni, 0);
    const CMat Q = detail::unitary_frame(centroid / centroid.norm());
    CMat P(ni, ni);
    P.row(0) = Q.col(0).adjoint() - cfg.frame_shear * Q.col(1).adjoint();
    for (Eigen::Index i = 1; i < ni; ++i) P.row(i) = Q.col(0).adjoint() + cfg.frame_shear * Q.col(i).adjoint();
    const CMat Pinv = P.inverse();

    std::vector<double> mods;
    for (const auto& x : far) mods.push_back((P * x.tail(ni)).norm());
    const double R = 2.0 * detail::median(mods);

    struct Sample {
        CVec w;
        CVec y;
    };
    std::vector<Sample> far_fit;
    for (const auto& x : far) {
        Sample s{x.head(Ni), P * x.tail(ni) / R};
        if (s.y.norm() <= cfg.outlier_cap) far_fit.push_back(std::move(s));
    }
    std::vector<Sample> near_fit;
    {
        const CompactSet fibre_ball = CompactSet::ball(zeros(n), Bk);
        const std::size_t dl = scn.L().uniform_dims();
        LowDiscrepancy seq(dl + fibre_ball.uniform_dims(), derive_seed(seed_k, 2));
        for (std::size_t m = 0; m < cfg.near_samples; ++m) {
            const auto u = seq.point(m);
            const CVec z = scn.L().sample_from(u.data(), false);
            const CVec zeta = fibre_ball.sample_from(u.data() + dl, false);
            near_fit.push_back({z, P * zeta / R});
        }
    }

    const double cond_scale = P.operatorNorm() * Pinv.operatorNorm();
    const double tau = eps / (Bk * cond_scale * 2.0);
    const double log_r = std::log(cfg.r);
    auto pivot_of = [&](std::size_t j) { return j == 0 ? std::size_t{1} : std::size_t{0}; };

    // Certification samples, independent of the fit.
    std::vector<CVec> cert_near;
    {
        const CompactSet fibre_ball = CompactSet::ball(zeros(n), Bk);
        const std::size_t dl = scn.L().uniform_dims();
        LowDiscrepancy seq(dl + fibre_ball.uniform_dims(), derive_seed(seed_k, 3));
        for (std::size_t m = 0; m < cfg.cert_samples; ++m) {
            const auto u = seq.point(m);
            const bool bd = boundary_sample(SampleMode::Mixed, m);
            cert_near.push_back(concat(scn.L().sample_from(u.data(), false), fibre_ball.sample_from(u.data() + dl, bd)));
        }
    }
    std::vector<CVec> cert_far;
    std::size_t cert_far_total = 0, prior_escaped = 0;
    for (const auto& x : scn.pushed_set_samples(k, cfg.cert_samples, derive_seed(seed_k, 4))) {
        ++cert_far_total;
        const Applied a = push_prior(x);
        if (a.escaped) {
            ++prior_escaped;
        } else {
            cert_far.push_back(a.value);
        }
    }

    StageCertificate cert, last_failed;
    Stage stage;
    std::optional<Stage> fallback;
    const std::size_t total = N + n;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        const int D = cfg.degree + attempt * cfg.degree_step;
        const double W = cfg.near_weight / tau * std::pow(cfg.weight_step, attempt);
        const detail::FitBasis basis{detail::param_exponents(N, cfg.param_degree), D};
        const auto cols = static_cast<Eigen::Index>(basis.size());

        std::vector<MultiPoly> comps(total, MultiPoly(total));
        std::vector<CVec> ycur;
        for (const auto& s : far_fit) ycur.push_back(s.y);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t pv = pivot_of(j);
            const auto rows = static_cast<Eigen::Index>(near_fit.size() + far_fit.size());
            Eigen::MatrixXcd A(rows, cols);
            Eigen::VectorXcd b = Eigen::VectorXcd::Zero(rows);
            Eigen::Index r = 0;
            for (const auto& s : near_fit) basis.row(s.w, s.y[static_cast<Eigen::Index>(pv)], W, A.row(r++));
            for (std::size_t i = 0; i < far_fit.size(); ++i) {
                basis.row(far_fit[i].w, ycur[i][static_cast<Eigen::Index>(pv)], 1.0, A.row(r));
                b[r++] = log_r;
            }
            Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
            svd.setThreshold(std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols)));
            const Eigen::VectorXcd coef = svd.solve(b);
            for (std::size_t i = 0; i < far_fit.size(); ++i) {
                const auto jj = static_cast<Eigen::Index>(j);
                ycur[i][jj] *= std::exp(basis.eval(coef, far_fit[i].w, ycur[i][static_cast<Eigen::Index>(pv)]));
            }
            comps[N + j] = MultiPoly::variable(total, N + j) * basis.to_poly(coef, N, n, pv);
        }

        // The blended field is overshear-compatible, so the decomposition is
        // a pass-through and the Trotter word is a product of overshears.
        const FieldSum parts = al_decompose(PolyField(comps), std::numeric_limits<int>::max());
        const AutWord core = trotter_word(parts, 1.0, cfg.trotter_steps);
        AutWord w(total);
        w.push_back(BasicAut::scale(total, 1.0 / R, N));
        w.push_back(BasicAut::affine(detail::block_diag_identity(N, P)));
        w = w.then(core);
        w.push_back(BasicAut::affine(detail::block_diag_identity(N, Pinv)));
        w.push_back(BasicAut::scale(total, R, N));
        stage.index = k;
        stage.eps = eps;
        stage.word = ParamAutWord(N, std::move(w), true);
        stage.inverse = stage.word.inverse();

        cert = StageCertificate{};
        cert.stage = k;
        cert.eps = eps;
        cert.seed = seed_k;
        cert.degree = D;
        cert.attempts = attempt + 1;
        cert.near_samples = cert_near.size();
        cert.pushed_samples = cert_far_total;
        cert.escaped_samples = prior_escaped;
        double dev = 0.0;
        for (const auto& x : cert_near) {
            const Applied a = stage.word.word().apply(x);
            dev = std::max(dev, a.escaped ? std::numeric_limits<double>::infinity()
                                          : (a.value.tail(ni) - x.tail(ni)).norm());
        }
        double minmod = std::numeric_limits<double>::infinity();
        for (const auto& x : cert_far) {
            const Applied a = stage.word.word().apply(x);
            if (a.escaped) {
                ++cert.escaped_samples;
                continue;
            }
            minmod = std::min(minmod, a.value.tail(ni).norm());
        }
        cert.max_identity_deviation = dev;
        cert.min_modulus = minmod;
        cert.min_gap = minmod - static_cast<double>(k + 1) * scn.ball_B();
        if (!cert.passed()) {
            if (!fallback) last_failed = cert;
            continue;
        }
        // Beyond stage 2 an attempt that keeps the expulsion trace monotone is
        // preferred; otherwise the first certified attempt is kept.
        const bool monotone = k <= 2 || prior.empty() || minmod >= prior.back().certificate.min_modulus;
        stage.certificate = cert;
        if (monotone) return stage;
        if (!fallback) fallback = stage;
    }
    if (fallback) return *fallback;
    throw CertificationFailed(last_failed, last_failed.deviation_ok() ? "expulsion gap" : "identity deviation");
}

struct PushoutRun {
    PushOutPlan plan;
    std::optional<StageCertificate> failed_certificate;
    std::string failure_condition;

    bool ok() const { return !failed_certificate.has_value(); }
};

inline PushoutRun run_pushout(const Scenario& scn, const PushoutConfig& cfg) {
    scn.admit();
    PushoutRun run{PushOutPlan{scn, cfg, {}}, std::nullopt, {}};
    for (std::size_t k = 1; k <= cfg.max_stages; ++k) {
        try {
            if (scn.K().is_empty()) {
                run.plan.stages.push_back(identity_stage(scn, k, stage_eps(scn.tolerances().eps0, k)));
                continue;
            }
            run.plan.stages.push_back(build_stage(scn, cfg, k, run.plan.stages, scn.tolerances().eps0));
        } catch (const CertificationFailed& e) {
            run.failed_certificate = e.certificate;
            run.failure_condition = e.condition;
            break;
        }
    }
    return run;
}

enum class LimitOutcome { Converged, Escaped, Undecided };

struct LimitClassification {
    LimitOutcome outcome = LimitOutcome::Undecided;
    CVec value;
    std::size_t stage = 0;
};

inline const char* to_string(LimitOutcome o) {
    switch (o) {
        case LimitOutcome::Converged: return "converged";
        case LimitOutcome::Escaped: return "escaped";
        case LimitOutcome::Undecided: return "undecided";
    }
    return "?";
}

// Iterates the stages on (z, zeta). A point has converged once three
// consecutive stages (fewer at the end of the plan) move it by at most twice
// their certified deviation while it sits inside the stage window kB. It has
// escaped if it ends outside the last window and is either still moving or
// was pushed out by at least B over the plan; far from the fitted region the
// stages are close to the identity, so a parked orbit counts as pushed.
inline LimitClassification eval_limit(const PushOutPlan& plan, const CVec& z, const CVec& zeta) {
    const auto ni = static_cast<Eigen::Index>(plan.n());
    require_dim(static_cast<std::size_t>(z.size()), plan.N(), "eval_limit parameter");
    require_dim(static_cast<std::size_t>(zeta.size()), plan.n(), "eval_limit fibre");
    const std::size_t K = plan.stages.size();
    const double B = plan.scenario.ball_B();
    if (K == 0) return {LimitOutcome::Converged, zeta, 1};

    std::vector<CVec> orbit{concat(z, zeta)};
    std::vector<double> disp(K + 1, 0.0);
    for (std::size_t k = 1; k <= K; ++k) {
        const Applied a = plan.stages[k - 1].word.word().apply(orbit.back());
        if (a.escaped) return {LimitOutcome::Escaped, a.value.tail(ni), k};
        disp[k] = (a.value.tail(ni) - orbit.back().tail(ni)).norm();
        orbit.push_back(a.value);
    }
    for (std::size_t ks = 1; ks <= K; ++ks) {
        bool still = orbit[ks - 1].tail(ni).norm() <= static_cast<double>(ks) * B;
        for (std::size_t j = ks; still && j <= std::min(ks + 2, K); ++j) still = disp[j] <= 2.0 * plan.stages[j - 1].eps;
        if (still) return {LimitOutcome::Converged, orbit[K].tail(ni), ks};
    }
    const CVec last = orbit[K].tail(ni);
    const bool moving = disp[K] > 2.0 * plan.stages[K - 1].eps;
    const bool pushed = last.norm() > zeta.norm() + B;
    if (last.norm() > static_cast<double>(K + 1) * B && (moving || pushed)) {
        std::size_t first = K;
        while (first > 1 && orbit[first - 1].tail(ni).norm() > static_cast<double>(first) * B) --first;
        return {LimitOutcome::Escaped, last, first};
    }
    return {LimitOutcome::Undecided, last, K};
}

struct FBValue {
    CVec value;
    bool escaped = false;
};

// F(z, zeta) = phi(z, zeta) + f(z) with phi the fibre part of (Phi^K)^{-1}.
inline FBValue fb_eval(const PushOutPlan& plan, const CVec& z, const CVec& zeta) {
    const auto ni = static_cast<Eigen::Index>(plan.n());
    Applied a{concat(z, zeta), false, 0};
    for (auto it = plan.stages.rbegin(); it != plan.stages.rend(); ++it) {
        a = it->inverse.word().apply(a.value);
        if (a.escaped) return {a.value.tail(ni), true};
    }
    return {CVec(a.value.tail(ni) + plan.scenario.f().eval(z)), false};
}

struct CheckConfig {
    std::size_t avoidance_samples = 100000;
    std::size_t injectivity_pairs = 10000;
    std::size_t param_samples = 64;
    double check_radius = 2.0;     // avoidance and injectivity sample |zeta| <= check_radius * ball_B
    double center_tol = 1e-9;
    double rank_tol = 1e-10;
    unsigned threads = 1;
};

struct CheckItem {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::size_t samples = 0;
    std::string witness;
    bool gating = true;
};

struct CheckReport {
    std::vector<CheckItem> items;
    bool passed() const {
        return std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.passed || !i.gating; });
    }
};

namespace detail {

inline std::string describe_point(const CVec& z, const CVec& zeta) {
    std::ostringstream os;
    os.precision(17);
    auto put = [&](const CVec& v) {
        os << '(';
        for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i].real() << (v[i].imag() < 0 ? "" : "+") << v[i].imag() << 'i';
        os << ')';
    };
    os << "z=";
    put(z);
    os << " zeta=";
    put(zeta);
    return os.str();
}

// Index of the minimal entry; the lowest index wins ties.
inline std::size_t argmin(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

inline CheckReport fb_check(const PushOutPlan& plan, const CheckConfig& cfg) {
    const Scenario& scn = plan.scenario;
    const std::size_t N = scn.N(), n = scn.n();
    const auto ni = static_cast<Eigen::Index>(n);
    const std::uint64_t seed = derive_seed(scn.seed(), 0xC4EC);
    const std::size_t K = plan.stages.size();
    const double radius = cfg.check_radius * scn.ball_B();
    const double outer_radius = static_cast<double>(std::max<std::size_t>(K, 1)) * scn.ball_B();
    const AutWord inv = plan.inverse_word();
    CheckReport rep;

    const std::size_t pcount = N == 0 ? 1 : cfg.param_samples;
    const auto zs = sample_set(scn.L(), pcount, derive_seed(seed, 1), SampleMode::Mixed);

    {
        std::vector<double> err(zs.size());
        parallel_for(zs.size(), cfg.threads, [&](std::size_t i) {
            const FBValue F = fb_eval(plan, zs[i], zeros(n));
            err[i] = F.escaped ? std::numeric_limits<double>::infinity() : (F.value - scn.f().eval(zs[i])).norm();
        });
        std::size_t worst = 0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            if (err[i] > err[worst]) worst = i;
        }
        CheckItem it{"center", err[worst] <= cfg.center_tol, err[worst], cfg.center_tol, zs.size(), {}};
        if (!it.passed) it.witness = detail::describe_point(zs[worst], zeros(n));
        rep.items.push_back(it);
    }

    const CompactSet fibre_ball = CompactSet::ball(zeros(n), radius);
    const std::size_t dl = scn.L().uniform_dims(), df = fibre_ball.uniform_dims();
    {
        LowDiscrepancy seq(dl + df, derive_seed(seed, 2));
        std::vector<double> gap(cfg.avoidance_samples);
        parallel_for(gap.size(), cfg.threads, [&](std::size_t m) {
            const auto u = seq.point(m);
            const bool bd = boundary_sample(SampleMode::Mixed, m);
            const CVec z = scn.L().sample_from(u.data(), bd);
            const CVec zeta = fibre_ball.sample_from(u.data() + dl, bd);
            const FBValue F = fb_eval(plan, z, zeta);
            gap[m] = F.escaped ? -std::numeric_limits<double>::infinity() : scn.K_at(z).signed_gap(F.value);
        });
        const std::size_t w = gap.empty() ? 0 : detail::argmin(gap);
        const double g = gap.empty() ? std::numeric_limits<double>::infinity() : gap[w];
        CheckItem it{"avoidance", g > 0.0, g, 0.0, gap.size(), {}};
        if (!it.passed) {
            const auto u = seq.point(w);
            const bool bd = boundary_sample(SampleMode::Mixed, w);
            it.witness = detail::describe_point(scn.L().sample_from(u.data(), bd), fibre_ball.sample_from(u.data() + dl, bd));
        }
        rep.items.push_back(it);
    }

    {
        // Over the whole kB window of the last stage, F can leave the range of
        // doubles. Reported for information: evaluable samples must avoid K.
        const CompactSet outer = CompactSet::ball(zeros(n), outer_radius);
        LowDiscrepancy seq(dl + df, derive_seed(seed, 5));
        const std::size_t count = std::min<std::size_t>(cfg.avoidance_samples, 20000);
        std::vector<double> gap(count);
        parallel_for(count, cfg.threads, [&](std::size_t m) {
            const auto u = seq.point(m);
            const CVec z = scn.L().sample_from(u.data(), false);
            const FBValue F = fb_eval(plan, z, outer.sample_from(u.data() + dl, false));
            gap[m] = F.escaped ? std::numeric_limits<double>::quiet_NaN() : scn.K_at(z).signed_gap(F.value);
        });
        double g = std::numeric_limits<double>::infinity();
        std::size_t evaluable = 0;
        for (double v : gap) {
            if (std::isnan(v)) continue;
            ++evaluable;
            g = std::min(g, v);
        }
        CheckItem it{"avoidance_outer", g > 0.0, g, 0.0, count, {}, false};
        it.witness = std::to_string(evaluable) + " of " + std::to_string(count) + " evaluable";
        rep.items.push_back(it);
    }

    {
        // Even pairs are independent points, odd pairs are close neighbours.
        LowDiscrepancy seq(dl + 2 * df, derive_seed(seed, 3));
        const std::size_t P = cfg.injectivity_pairs;
        std::vector<double> ratio(P), margin(P);
        parallel_for(P, cfg.threads, [&](std::size_t m) {
            const auto u = seq.point(m);
            const CVec z = scn.L().sample_from(u.data(), false);
            const CVec a = fibre_ball.sample_from(u.data() + dl, false);
            CVec b = fibre_ball.sample_from(u.data() + dl + df, true);
            if (m % 2 == 1) b = a + (b / radius) * (1e-4 * scn.ball_B());
            const FBValue Fa = fb_eval(plan, z, a), Fb = fb_eval(plan, z, b);
            if (Fa.escaped || Fb.escaped) {
                ratio[m] = margin[m] = -std::numeric_limits<double>::infinity();
                return;
            }
            const double dF = (Fa.value - Fb.value).norm();
            ratio[m] = dF / (a - b).norm();
            const CMat J = inv.jacobian(concat(z, a)).bottomRightCorner(ni, ni);
            Eigen::JacobiSVD<CMat> svd(J);
            const auto& sv = svd.singularValues();
            const double kappa = sv[0] / sv[sv.size() - 1];
            const double floor = 64.0 * std::numeric_limits<double>::epsilon() * kappa *
                                 (Fa.value.norm() + Fb.value.norm() + 1.0);
            margin[m] = dF - floor;
        });
        const std::size_t w = P == 0 ? 0 : detail::argmin(margin);
        const bool ok = P == 0 || margin[w] > 0.0;
        const double min_ratio = P == 0 ? 0.0 : *std::min_element(ratio.begin(), ratio.end());
        CheckItem it{"injectivity", ok, min_ratio, 0.0, P, {}};
        if (!ok) it.witness = "pair " + std::to_string(w);
        rep.items.push_back(it);
    }

    {
        std::vector<double> rel(zs.size());
        parallel_for(zs.size(), cfg.threads, [&](std::size_t i) {
            const CMat J = inv.jacobian(concat(zs[i], zeros(n))).bottomRightCorner(ni, ni);
            Eigen::JacobiSVD<CMat> svd(J);
            const auto& sv = svd.singularValues();
            rel[i] = sv[0] > 0.0 ? sv[sv.size() - 1] / sv[0] : 0.0;
        });
        const std::size_t w = detail::argmin(rel);
        CheckItem it{"domination", rel[w] > cfg.rank_tol, rel[w], cfg.rank_tol, zs.size(), {}};
        if (!it.passed) it.witness = detail::describe_point(zs[w], zeros(n));
        rep.items.push_back(it);
    }
    return rep;
}

}  // namespace fbpush
