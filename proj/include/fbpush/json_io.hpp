#pragma once

#include "fbpush/basins.hpp"
#include "fbpush/fields.hpp"
#include "fbpush/pushout.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fbpush {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io {

// Non-finite values are written as strings so the documents stay valid JSON.
inline Json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline double get_num(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw FormatError("expected a number, got " + j.dump());
}

inline const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("field '") + key + "': " + e.what());
    }
}

inline double num_or(const Json& j, const char* key, double fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return get_num(j.at(key));
}

inline void check_schema(const Json& j, const char* what) {
    if (!j.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
    if (!j.contains("schema_version")) throw FormatError(std::string(what) + ": missing schema_version");
    const int v = j.at("schema_version").get<int>();
    if (v != kSchemaVersion) {
        throw FormatError(std::string(what) + ": unsupported schema_version " + std::to_string(v));
    }
}

inline Json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
    if (!out) throw FormatError("write failed for " + path);
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Shortest-round-trip text for CSV cells.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return Json(x).dump();
}

}  // namespace io

// ---- numbers, vectors, matrices

inline Json to_json(Cpx c) { return Json::array({io::num(c.real()), io::num(c.imag())}); }

inline Cpx cpx_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_array() || j.size() != 2) throw FormatError("complex number must be [re, im]");
    return {io::get_num(j[0]), io::get_num(j[1])};
}

inline Json to_json(const CVec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
    return a;
}

inline CVec cvec_from_json(const Json& j) {
    if (!j.is_array()) throw FormatError("vector must be a list of [re, im]");
    CVec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = cpx_from_json(j[i]);
    return v;
}

// Row-major.
inline Json to_json(const CMat& A) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (Eigen::Index c = 0; c < A.cols(); ++c) data.push_back(to_json(A(r, c)));
    return Json{{"rows", A.rows()}, {"cols", A.cols()}, {"data", data}};
}

inline CMat cmat_from_json(const Json& j) {
    const auto rows = io::field(j, "rows").get<Eigen::Index>();
    const auto cols = io::field(j, "cols").get<Eigen::Index>();
    const Json& data = io::field(j, "data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw FormatError("matrix data does not match its shape");
    }
    CMat A(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) A(r, c) = cpx_from_json(data[k++]);
    return A;
}

// ---- polynomials

// List of {exponents, re, im}; the term map is already in lexicographic order.
inline Json to_json(const MultiPoly& p) {
    Json a = Json::array();
    for (const auto& [alpha, c] : p.terms()) {
        a.push_back(Json{{"exponents", alpha}, {"re", io::num(c.real())}, {"im", io::num(c.imag())}});
    }
    return a;
}

inline MultiPoly poly_from_json(const Json& j, std::size_t dim) {
    if (!j.is_array()) throw FormatError("polynomial literal must be a list of terms");
    MultiPoly p(dim);
    for (const auto& t : j) {
        const auto alpha = io::field(t, "exponents").get<MultiIndex>();
        if (alpha.size() != dim) {
            throw FormatError("polynomial term has " + std::to_string(alpha.size()) + " exponents, expected " +
                              std::to_string(dim));
        }
        try {
            p.add_term(alpha, Cpx(io::get_num(io::field(t, "re")), io::num_or(t, "im", 0.0)));
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
    }
    return p;
}

inline Json to_json(const PolyMap& m) {
    Json comps = Json::array();
    for (const auto& c : m.components()) comps.push_back(to_json(c));
    return Json{{"src_dim", m.src_dim()}, {"components", comps}};
}

inline PolyMap polymap_from_json(const Json& j) {
    const auto src = io::field(j, "src_dim").get<std::size_t>();
    std::vector<MultiPoly> comps;
    for (const auto& c : io::field(j, "components")) comps.push_back(poly_from_json(c, src));
    return PolyMap(src, std::move(comps));
}

// ---- words

inline const char* form_name(OvershearForm f) {
    return f == OvershearForm::ScaleThenShift ? "scale_then_shift" : "shift_then_scale";
}

inline Json to_json(const BasicAut& L) {
    if (auto* s = L.as<ShearLetter>()) return Json{{"kind", "shear"}, {"j", s->j}, {"p", to_json(s->p)}};
    if (auto* o = L.as<OvershearLetter>()) {
        return Json{{"kind", "overshear"}, {"j", o->j}, {"form", form_name(o->form)}, {"p", to_json(o->p)},
                    {"q", to_json(o->q)}};
    }
    if (auto* a = L.as<AffineLetter>()) return Json{{"kind", "affine"}, {"A", to_json(a->A)}, {"b", to_json(a->b)}};
    const auto* c = L.as<ScaleLetter>();
    return Json{{"kind", "scale"}, {"t", to_json(c->t)}, {"first", c->first}};
}

inline BasicAut letter_from_json(const Json& j, std::size_t dim) {
    const auto kind = io::field(j, "kind").get<std::string>();
    try {
        if (kind == "shear") {
            return BasicAut::shear(dim, io::field(j, "j").get<std::size_t>(), poly_from_json(io::field(j, "p"), dim));
        }
        if (kind == "overshear") {
            const auto form = io::get_or<std::string>(j, "form", "scale_then_shift");
            if (form != "scale_then_shift" && form != "shift_then_scale") throw FormatError("unknown overshear form " + form);
            return BasicAut::overshear(dim, io::field(j, "j").get<std::size_t>(), poly_from_json(io::field(j, "p"), dim),
                                       j.contains("q") ? poly_from_json(j.at("q"), dim) : MultiPoly(dim),
                                       form == "scale_then_shift" ? OvershearForm::ScaleThenShift
                                                                  : OvershearForm::ShiftThenScale);
        }
        if (kind == "affine") {
            CMat A = cmat_from_json(io::field(j, "A"));
            CVec b = j.contains("b") ? cvec_from_json(j.at("b")) : CVec(CVec::Zero(A.rows()));
            require_dim(static_cast<std::size_t>(A.rows()), dim, "affine letter");
            return BasicAut::affine(std::move(A), std::move(b));
        }
        if (kind == "scale") {
            return BasicAut::scale(dim, cpx_from_json(io::field(j, "t")), io::get_or<std::size_t>(j, "first", 0));
        }
    } catch (const std::logic_error& e) {
        throw FormatError(kind + " letter: " + e.what());
    }
    throw FormatError("unknown letter kind '" + kind + "'");
}

inline Json to_json(const AutWord& w) {
    Json letters = Json::array();
    for (const auto& L : w.letters()) letters.push_back(to_json(L));
    return Json{{"dim", w.dim()}, {"letters", letters}};
}

inline AutWord word_from_json(const Json& j) {
    const auto dim = io::field(j, "dim").get<std::size_t>();
    AutWord w(dim);
    for (const auto& L : io::field(j, "letters")) w.push_back(letter_from_json(L, dim));
    return w;
}

inline Json to_json(const ParamAutWord& pw) {
    return Json{{"param_dim", pw.param_dim()}, {"origin_fixing", pw.origin_fixing()}, {"word", to_json(pw.word())}};
}

inline ParamAutWord param_word_from_json(const Json& j) {
    try {
        return ParamAutWord(io::field(j, "param_dim").get<std::size_t>(), word_from_json(io::field(j, "word")),
                            io::get_or<bool>(j, "origin_fixing", false));
    } catch (const std::logic_error& e) {
        throw FormatError(std::string("parameterized word: ") + e.what());
    }
}

// ---- fields

inline Json to_json(const PolyField& V) {
    Json comps = Json::array();
    for (const auto& c : V.components().components()) comps.push_back(to_json(c));
    return Json{{"dim", V.dim()}, {"components", comps}};
}

inline PolyField field_from_json(const Json& j) {
    const auto dim = io::field(j, "dim").get<std::size_t>();
    std::vector<MultiPoly> comps;
    for (const auto& c : io::field(j, "components")) comps.push_back(poly_from_json(c, dim));
    if (comps.size() != dim) throw FormatError("field needs one component per coordinate");
    return PolyField(PolyMap(dim, std::move(comps)));
}

inline Json to_json(const BasicField& b) {
    Json out{{"kind", b.kind() == FieldKind::Shear ? "shear" : "overshear"}, {"j", b.j()}, {"p", to_json(b.p())}};
    if (b.kind() == FieldKind::Overshear) out["q"] = to_json(b.q());
    out["conjugation"] = b.is_conjugated() ? to_json(*b.conjugation()) : Json(nullptr);
    return out;
}

inline BasicField basic_field_from_json(const Json& j, std::size_t dim) {
    const auto kind = io::field(j, "kind").get<std::string>();
    const auto jj = io::field(j, "j").get<std::size_t>();
    try {
        BasicField b = kind == "shear"       ? BasicField::shear(dim, jj, poly_from_json(io::field(j, "p"), dim))
                       : kind == "overshear" ? BasicField::overshear(dim, jj, poly_from_json(io::field(j, "p"), dim),
                                                                     poly_from_json(io::field(j, "q"), dim))
                                             : throw FormatError("unknown field kind '" + kind + "'");
        if (j.contains("conjugation") && !j.at("conjugation").is_null()) b = b.conjugated(cmat_from_json(j.at("conjugation")));
        return b;
    } catch (const std::logic_error& e) {
        throw FormatError(kind + " field: " + e.what());
    }
}

inline Json to_json(const FieldSum& S) {
    Json parts = Json::array();
    for (const auto& b : S.parts) parts.push_back(to_json(b));
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "fbpush.field_sum"},
                {"dim", S.claimed_total.dim()},
                {"claimed_total", to_json(S.claimed_total)},
                {"parts", parts},
                {"residual", io::num(S.residual())}};
}

inline FieldSum field_sum_from_json(const Json& j) {
    io::check_schema(j, "field sum");
    FieldSum S;
    S.claimed_total = field_from_json(io::field(j, "claimed_total"));
    for (const auto& p : io::field(j, "parts")) S.parts.push_back(basic_field_from_json(p, S.claimed_total.dim()));
    return S;
}

// ---- sets and scenarios

inline Json to_json(const CompactSet& s) {
    switch (s.kind()) {
        case SetKind::Ball:
            return Json{{"kind", "ball"}, {"center", to_json(s.center())}, {"radius", s.radii().front()}};
        case SetKind::Polydisc:
            return Json{{"kind", "polydisc"}, {"center", to_json(s.center())}, {"radii", s.radii()}};
        case SetKind::Union: {
            Json parts = Json::array();
            for (const auto& p : s.parts()) parts.push_back(to_json(p));
            return Json{{"kind", "union"}, {"dim", s.dim()}, {"parts", parts},
                        {"convexity_assumed", s.convexity_assumed()}};
        }
    }
    return nullptr;
}

inline CompactSet set_from_json(const Json& j) {
    const auto kind = io::field(j, "kind").get<std::string>();
    try {
        if (kind == "ball") return CompactSet::ball(cvec_from_json(io::field(j, "center")), io::get_num(io::field(j, "radius")));
        if (kind == "polydisc") {
            return CompactSet::polydisc(cvec_from_json(io::field(j, "center")),
                                        io::field(j, "radii").get<std::vector<double>>());
        }
        if (kind == "union" || kind == "empty") {
            std::vector<CompactSet> parts;
            if (j.contains("parts"))
                for (const auto& p : j.at("parts")) parts.push_back(set_from_json(p));
            return CompactSet::union_of(io::field(j, "dim").get<std::size_t>(), std::move(parts),
                                        io::get_or<bool>(j, "convexity_assumed", true));
        }
    } catch (const std::logic_error& e) {
        throw FormatError(kind + " set: " + e.what());
    }
    throw FormatError("unknown set kind '" + kind + "'");
}

inline Json to_json(const PushoutConfig& c) {
    return Json{{"max_stages", c.max_stages},     {"r", c.r},
                {"degree", c.degree},             {"param_degree", c.param_degree},
                {"retries", c.retries},           {"degree_step", c.degree_step},
                {"weight_step", c.weight_step},   {"near_weight", c.near_weight},
                {"frame_shear", c.frame_shear},   {"trotter_steps", c.trotter_steps},
                {"fit_samples", c.fit_samples},   {"near_samples", c.near_samples},
                {"cert_samples", c.cert_samples}, {"outlier_cap", c.outlier_cap}};
}

inline PushoutConfig pushout_config_from_json(const Json& j) {
    PushoutConfig c;
    if (j.is_null()) return c;
    c.max_stages = io::get_or(j, "max_stages", c.max_stages);
    c.r = io::num_or(j, "r", c.r);
    c.degree = io::get_or(j, "degree", c.degree);
    c.param_degree = io::get_or(j, "param_degree", c.param_degree);
    c.retries = io::get_or(j, "retries", c.retries);
    c.degree_step = io::get_or(j, "degree_step", c.degree_step);
    c.weight_step = io::num_or(j, "weight_step", c.weight_step);
    c.near_weight = io::num_or(j, "near_weight", c.near_weight);
    c.frame_shear = io::num_or(j, "frame_shear", c.frame_shear);
    c.trotter_steps = io::get_or(j, "trotter_steps", c.trotter_steps);
    c.fit_samples = io::get_or(j, "fit_samples", c.fit_samples);
    c.near_samples = io::get_or(j, "near_samples", c.near_samples);
    c.cert_samples = io::get_or(j, "cert_samples", c.cert_samples);
    c.outlier_cap = io::num_or(j, "outlier_cap", c.outlier_cap);
    if (c.r <= 1.0) throw FormatError("pushout config: r must exceed 1");
    if (c.degree < 1 || c.trotter_steps < 1) throw FormatError("pushout config: degree and trotter_steps must be positive");
    return c;
}

inline Json to_json(const CheckConfig& c) {
    return Json{{"avoidance_samples", c.avoidance_samples}, {"injectivity_pairs", c.injectivity_pairs},
                {"param_samples", c.param_samples},         {"check_radius", c.check_radius},
                {"center_tol", c.center_tol},               {"rank_tol", c.rank_tol}};
}

inline CheckConfig check_config_from_json(const Json& j) {
    CheckConfig c;
    if (j.is_null()) return c;
    c.avoidance_samples = io::get_or(j, "avoidance_samples", c.avoidance_samples);
    c.injectivity_pairs = io::get_or(j, "injectivity_pairs", c.injectivity_pairs);
    c.param_samples = io::get_or(j, "param_samples", c.param_samples);
    c.check_radius = io::num_or(j, "check_radius", c.check_radius);
    c.center_tol = io::num_or(j, "center_tol", c.center_tol);
    c.rank_tol = io::num_or(j, "rank_tol", c.rank_tol);
    return c;
}

inline Json to_json(const Scenario& s) {
    Json tol{{"eps0", s.tolerances().eps0},
             {"margin_tau", s.tolerances().margin_tau >= 0.0 ? Json(s.tolerances().margin_tau) : Json(nullptr)}};
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "fbpush.scenario"},
                {"name", s.name()},
                {"N", s.N()},
                {"n", s.n()},
                {"K", to_json(s.K())},
                {"K_shift", s.moving_fibre() ? to_json(s.K_shift()) : Json(nullptr)},
                {"L", to_json(s.L())},
                {"f", to_json(s.f())},
                {"schedule", Json{{"c1", s.schedule().c1()}, {"gaps", s.schedule().explicit_gaps()}}},
                {"ball_B", s.ball_B()},
                {"tolerances", tol},
                {"seed", s.seed()}};
}

// Either a stored scenario or a scenario config; L defaults to the closed
// unit ball of C^N and f to zero.
inline Scenario scenario_from_json(const Json& j) {
    io::check_schema(j, "scenario");
    const auto N = io::field(j, "N").get<std::size_t>();
    const auto n = io::field(j, "n").get<std::size_t>();
    const CompactSet K = set_from_json(io::field(j, "K"));
    if (K.dim() != n) throw FormatError("scenario: K must live in C^n");
    const CompactSet L = j.contains("L") && !j.at("L").is_null() ? set_from_json(j.at("L")) : CompactSet::ball(zeros(N), 1.0);
    const PolyMap f = j.contains("f") && !j.at("f").is_null() ? polymap_from_json(j.at("f")) : PolyMap::zero(N, n);
    const PolyMap shift = j.contains("K_shift") && !j.at("K_shift").is_null() ? polymap_from_json(j.at("K_shift")) : PolyMap();
    const Json sched = j.contains("schedule") ? j.at("schedule") : Json::object();
    Tolerances tol;
    if (j.contains("tolerances")) {
        tol.eps0 = io::num_or(j.at("tolerances"), "eps0", tol.eps0);
        tol.margin_tau = io::num_or(j.at("tolerances"), "margin_tau", tol.margin_tau);
    }
    if (!(tol.eps0 > 0.0)) throw FormatError("scenario: eps0 must be positive");
    try {
        return Scenario(io::field(j, "name").get<std::string>(), K, L, f,
                        ShrinkSchedule(io::num_or(sched, "c1", 0.1), io::get_or<std::vector<double>>(sched, "gaps", {})),
                        io::get_num(io::field(j, "ball_B")), tol, io::get_or<std::uint64_t>(j, "seed", 1), shift);
    } catch (const std::logic_error& e) {
        throw FormatError(std::string("scenario: ") + e.what());
    }
}

// ---- plans and reports

inline Json to_json(const StageCertificate& c) {
    return Json{{"stage", c.stage},
                {"eps", io::num(c.eps)},
                {"max_identity_deviation", io::num(c.max_identity_deviation)},
                {"min_modulus", io::num(c.min_modulus)},
                {"min_gap", io::num(c.min_gap)},
                {"near_samples", c.near_samples},
                {"pushed_samples", c.pushed_samples},
                {"escaped_samples", c.escaped_samples},
                {"seed", c.seed},
                {"degree", c.degree},
                {"attempts", c.attempts},
                {"passed", c.passed()},
                {"convexity_note", c.convexity_note}};
}

inline StageCertificate certificate_from_json(const Json& j) {
    StageCertificate c;
    c.stage = io::field(j, "stage").get<std::size_t>();
    c.eps = io::get_num(io::field(j, "eps"));
    c.max_identity_deviation = io::get_num(io::field(j, "max_identity_deviation"));
    c.min_modulus = io::get_num(io::field(j, "min_modulus"));
    c.min_gap = io::get_num(io::field(j, "min_gap"));
    c.near_samples = io::get_or<std::size_t>(j, "near_samples", 0);
    c.pushed_samples = io::get_or<std::size_t>(j, "pushed_samples", 0);
    c.escaped_samples = io::get_or<std::size_t>(j, "escaped_samples", 0);
    c.seed = io::get_or<std::uint64_t>(j, "seed", 0);
    c.degree = io::get_or(j, "degree", 0);
    c.attempts = io::get_or(j, "attempts", 0);
    c.convexity_note = io::get_or<std::string>(j, "convexity_note", kConvexityNote);
    return c;
}

inline Json trace_json(const PushOutPlan& plan) {
    Json t = Json::array();
    for (double v : plan.expulsion_trace()) t.push_back(io::num(v));
    return t;
}

inline Json to_json(const PushOutPlan& plan, const std::string& scenario_ref) {
    Json stages = Json::array();
    for (const auto& st : plan.stages) {
        stages.push_back(Json{{"index", st.index},
                              {"eps", io::num(st.eps)},
                              {"word", to_json(st.word)},
                              {"certificate", to_json(st.certificate)}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "fbpush.plan"},
                {"scenario_ref", scenario_ref},
                {"scenario", to_json(plan.scenario)},
                {"config", to_json(plan.config)},
                {"stages", stages},
                {"expulsion_trace", trace_json(plan)},
                {"trace_nondecreasing", plan.trace_nondecreasing()}};
}

inline PushOutPlan plan_from_json(const Json& j) {
    io::check_schema(j, "plan");
    PushOutPlan plan{scenario_from_json(io::field(j, "scenario")),
                     pushout_config_from_json(j.contains("config") ? j.at("config") : Json()),
                     {}};
    for (const auto& s : io::field(j, "stages")) {
        Stage st;
        st.index = io::field(s, "index").get<std::size_t>();
        st.eps = io::get_num(io::field(s, "eps"));
        st.word = param_word_from_json(io::field(s, "word"));
        if (st.word.param_dim() != plan.N() || st.word.total_dim() != plan.N() + plan.n()) {
            throw FormatError("plan: stage word dimensions do not match the scenario");
        }
        st.inverse = st.word.inverse();
        st.certificate = certificate_from_json(io::field(s, "certificate"));
        plan.stages.push_back(std::move(st));
    }
    return plan;
}

inline Json run_report_json(const PushoutRun& run) {
    Json certs = Json::array();
    for (const auto& st : run.plan.stages) certs.push_back(to_json(st.certificate));
    Json out{{"schema_version", kSchemaVersion},
             {"kind", "fbpush.pushout_report"},
             {"scenario", run.plan.scenario.name()},
             {"status", run.ok() ? "certified" : "certification_failed"},
             {"stages_built", run.plan.stages.size()},
             {"eps_budget", io::num(run.plan.eps_budget())},
             {"certificates", certs},
             {"expulsion_trace", trace_json(run.plan)},
             {"trace_nondecreasing", run.plan.trace_nondecreasing()}};
    if (!run.ok()) {
        out["failed_certificate"] = to_json(*run.failed_certificate);
        out["failure_condition"] = run.failure_condition;
    }
    return out;
}

inline std::string run_report_csv(const PushoutRun& run) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    os << "stage,eps,max_identity_deviation,min_modulus,min_gap,degree,attempts,near_samples,pushed_samples,"
          "escaped_samples,passed\n";
    auto row = [&](const StageCertificate& c) {
        os << c.stage << ',' << io::fmt(c.eps) << ',' << io::fmt(c.max_identity_deviation) << ','
           << io::fmt(c.min_modulus) << ',' << io::fmt(c.min_gap) << ',' << c.degree << ',' << c.attempts << ','
           << c.near_samples << ',' << c.pushed_samples << ',' << c.escaped_samples << ','
           << (c.passed() ? "true" : "false") << '\n';
    };
    for (const auto& st : run.plan.stages) row(st.certificate);
    if (!run.ok()) row(*run.failed_certificate);
    return os.str();
}

inline Json to_json(const CheckReport& r) {
    Json items = Json::array();
    for (const auto& i : r.items) {
        items.push_back(Json{{"name", i.name},
                             {"passed", i.passed},
                             {"gating", i.gating},
                             {"measured", io::num(i.measured)},
                             {"threshold", io::num(i.threshold)},
                             {"samples", i.samples},
                             {"witness", i.witness}});
    }
    return Json{{"schema_version", kSchemaVersion}, {"kind", "fbpush.check_report"}, {"passed", r.passed()}, {"items", items}};
}

inline std::string check_report_csv(const CheckReport& r) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    os << "name,passed,gating,measured,threshold,samples\n";
    for (const auto& i : r.items) {
        os << i.name << ',' << (i.passed ? "true" : "false") << ',' << (i.gating ? "true" : "false") << ','
           << io::fmt(i.measured) << ',' << io::fmt(i.threshold) << ',' << i.samples << '\n';
    }
    return os.str();
}

inline Json to_json(const BasinReport& r) {
    Json v = Json::array();
    for (const auto& x : r.violations) {
        v.push_back(Json{{"sample", x.sample}, {"step", x.step}, {"ratio", io::num(x.ratio)}, {"bound", x.upper ? "upper" : "lower"}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "fbpush.basin_report"},
                {"bounds", Json{{"s", r.bounds.s}, {"r", r.bounds.r}, {"delta", r.bounds.delta}}},
                {"r2_below_s", r.r2_below_s},
                {"measured_s", io::num(r.measured_s)},
                {"measured_r", io::num(r.measured_r)},
                {"samples", r.samples},
                {"horizon", r.horizon},
                {"violation_count", r.violation_count},
                {"violations", v},
                {"membership", Json{{"attracted", r.attracted}, {"escaped", r.escaped}, {"undecided", r.undecided}}},
                {"passed", r.passed()}};
}

inline std::string basin_report_csv(const BasinReport& r) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    os << "quantity,value\n";
    os << "s," << io::fmt(r.bounds.s) << "\nr," << io::fmt(r.bounds.r) << "\ndelta," << io::fmt(r.bounds.delta) << '\n';
    os << "measured_s," << io::fmt(r.measured_s) << "\nmeasured_r," << io::fmt(r.measured_r) << '\n';
    os << "samples," << r.samples << "\nhorizon," << r.horizon << "\nviolations," << r.violation_count << '\n';
    os << "attracted," << r.attracted << "\nescaped," << r.escaped << "\nundecided," << r.undecided << '\n';
    os << "passed," << (r.passed() ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace fbpush
