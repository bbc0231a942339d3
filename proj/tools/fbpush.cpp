#include "fbpush/basins.hpp"
#include "fbpush/fields.hpp"
#include "fbpush/json_io.hpp"
#include "fbpush/pushout.hpp"
#include "fbpush/render.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace fbpush;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCertFailed = 2;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    unsigned threads = 1;
};

std::string out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

Scenario load_scenario(const Json& doc, const Globals& g) {
    Json j = doc;
    if (g.seed) j["seed"] = *g.seed;
    return scenario_from_json(j);
}

int cmd_decompose(const Globals& g, const std::string& path) {
    const Json j = io::read_file(path);
    io::check_schema(j, "field file");
    const PolyField V = field_from_json(io::field(j, "field"));
    const int max_degree = io::get_or(j, "max_degree", 8);
    const double tol = io::num_or(j, "tol", 1e-12);
    FieldSum S;
    try {
        S = al_decompose(V, max_degree, tol);
    } catch (const DecompositionError& e) {
        std::cerr << "decomposition failed: " << e.what() << "\n";
        return kCertFailed;
    }
    const Json out = to_json(S);
    io::write_text(out_path(g, "field_sum.json"), io::dump(out));
    std::cout << io::dump(out);
    std::printf("parts %zu residual %.3e\n", S.parts.size(), S.residual());
    return kOk;
}

int cmd_flow(const Globals& g, const std::string& path) {
    // Default: the linear field (y, x) from (1, 0), whose time-1 value is (cosh 1, sinh 1).
    PolyField V(std::vector<MultiPoly>{MultiPoly::variable(2, 1), MultiPoly::variable(2, 0)});
    CVec x0(2);
    x0 << 1.0, 0.0;
    Cpx t = 1.0;
    std::vector<int> steps{10, 100, 1000, 10000};
    int rk4_steps = 10000;
    if (!path.empty()) {
        const Json j = io::read_file(path);
        io::check_schema(j, "flow config");
        V = field_from_json(io::field(j, "field"));
        x0 = cvec_from_json(io::field(j, "x0"));
        if (j.contains("t")) t = cpx_from_json(j.at("t"));
        steps = io::get_or(j, "steps", steps);
        rk4_steps = io::get_or(j, "rk4_steps", rk4_steps);
    }
    require_dim(static_cast<std::size_t>(x0.size()), V.dim(), "flow x0");
    const FieldSum S = al_decompose(V);
    const Applied ref = rk4_flow(V, t, rk4_steps, x0);
    std::ostringstream csv;
    csv << "# schema_version=" << kSchemaVersion << "\n";
    csv << "steps,lie_trotter_error,lie_trotter_order,strang_error,strang_order\n";
    std::printf("%8s %16s %8s %16s %8s\n", "steps", "lie-trotter", "order", "strang", "order");
    double prev_lt = 0.0, prev_st = 0.0;
    int prev_m = 0;
    for (int m : steps) {
        const Applied lt = trotter_flow(S, t, m, x0, Splitting::LieTrotter);
        const Applied st = trotter_flow(S, t, m, x0, Splitting::Strang);
        const double elt = lt.escaped ? std::numeric_limits<double>::infinity() : (lt.value - ref.value).norm();
        const double est = st.escaped ? std::numeric_limits<double>::infinity() : (st.value - ref.value).norm();
        double olt = std::numeric_limits<double>::quiet_NaN(), ost = olt;
        if (prev_m > 0) {
            const double r = std::log(static_cast<double>(m) / prev_m);
            olt = std::log(prev_lt / elt) / r;
            ost = std::log(prev_st / est) / r;
        }
        std::printf("%8d %16.6e %8.3f %16.6e %8.3f\n", m, elt, olt, est, ost);
        csv << m << ',' << io::fmt(elt) << ',' << io::fmt(olt) << ',' << io::fmt(est) << ',' << io::fmt(ost) << '\n';
        prev_lt = elt;
        prev_st = est;
        prev_m = m;
    }
    io::write_text(out_path(g, "flow.csv"), csv.str());
    return kOk;
}

int cmd_pushout_run(const Globals& g, const std::string& path) {
    const Json doc = io::read_file(path);
    const Scenario scn = load_scenario(doc, g);
    const PushoutConfig cfg = pushout_config_from_json(doc.contains("pushout") ? doc.at("pushout") : Json());
    const PushoutRun run = run_pushout(scn, cfg);
    io::write_text(out_path(g, "report.json"), io::dump(run_report_json(run)));
    io::write_text(out_path(g, "report.csv"), run_report_csv(run));
    for (const auto& st : run.plan.stages) {
        const auto& c = st.certificate;
        std::printf("stage %zu  deviation %.3e / eps %.3e  min modulus %.4f  gap %.4f  degree %d\n", c.stage,
                    c.max_identity_deviation, c.eps, c.min_modulus, c.min_gap, c.degree);
    }
    if (!run.ok()) {
        std::cerr << "certification failed at stage " << run.failed_certificate->stage << " ("
                  << run.failure_condition << ")\n";
        return kCertFailed;
    }
    io::write_text(out_path(g, "plan.json"), io::dump(to_json(run.plan, path)));
    std::printf("plan certified: %zu stages, eps budget %.3e, trace %s\n", run.plan.stages.size(),
                run.plan.eps_budget(), run.plan.trace_nondecreasing() ? "nondecreasing" : "not monotone");
    return kOk;
}

int cmd_pushout_check(const Globals& g, const std::string& path, std::optional<std::size_t> samples) {
    const Json doc = io::read_file(path);
    const PushOutPlan plan = plan_from_json(doc);
    CheckConfig cc = check_config_from_json(doc.contains("check") ? doc.at("check") : Json());
    if (samples) cc.avoidance_samples = *samples;
    cc.threads = g.threads;
    const CheckReport rep = fb_check(plan, cc);
    io::write_text(out_path(g, "check.json"), io::dump(to_json(rep)));
    io::write_text(out_path(g, "check.csv"), check_report_csv(rep));
    for (const auto& i : rep.items) {
        std::printf("%-18s %-4s measured %.4e threshold %.4e samples %zu%s\n", i.name.c_str(), i.passed ? "ok" : "FAIL",
                    i.measured, i.threshold, i.samples, i.gating ? "" : " (informational)");
    }
    return rep.passed() ? kOk : kCertFailed;
}

AutSequence sequence_from_json(const Json& j, std::uint64_t seed) {
    const auto kind = io::field(j, "kind").get<std::string>();
    if (kind == "henon") return AutSequence::cyclic({henon_word()}, zeros(2));
    if (kind == "scale") {
        const auto n = io::field(j, "n").get<std::size_t>();
        AutWord w(n);
        w.push_back(BasicAut::scale(n, cpx_from_json(io::field(j, "factor"))));
        return AutSequence::cyclic({w}, zeros(n));
    }
    if (kind == "words") {
        std::vector<AutWord> words;
        for (const auto& w : io::field(j, "words")) words.push_back(word_from_json(w));
        return AutSequence::cyclic(std::move(words), cvec_from_json(io::field(j, "center")));
    }
    if (kind == "linear_contractions") {
        const auto n = io::field(j, "n").get<std::size_t>();
        return AutSequence::linear_contractions(n, io::get_num(io::field(j, "lo")), io::get_num(io::field(j, "hi")),
                                                io::get_or<std::uint64_t>(j, "seed", seed),
                                                io::get_or<std::size_t>(j, "count", 16),
                                                j.contains("center") ? cvec_from_json(j.at("center")) : zeros(n));
    }
    throw FormatError("unknown sequence kind '" + kind + "'");
}

int cmd_basin(const Globals& g, const std::string& path) {
    const Json j = io::read_file(path);
    io::check_schema(j, "basin config");
    const std::uint64_t seed = g.seed.value_or(io::get_or<std::uint64_t>(j, "seed", 1));
    const AutSequence seq = sequence_from_json(io::field(j, "sequence"), seed);
    // Without a rates section only the membership grid is produced.
    const bool has_rates = j.contains("rates");
    RateBounds bounds;
    BasinReport rep;
    if (has_rates) {
        const Json& rj = j.at("rates");
        try {
            bounds = RateBounds(io::num_or(rj, "s", 0.4), io::num_or(rj, "r", 0.6), io::num_or(rj, "delta", 0.5));
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
        rep = verify_rates(seq, bounds, io::get_or<std::size_t>(j, "samples", 1000),
                           io::get_or<std::size_t>(j, "horizon", 0), seed);
    }
    if (j.contains("slice")) {
        const Json mj = j.contains("membership") ? j.at("membership") : Json::object();
        MembershipParams mp;
        mp.escape_radius = io::num_or(mj, "escape_radius", mp.escape_radius);
        mp.horizon = io::get_or(mj, "horizon", mp.horizon);
        mp.delta = io::num_or(mj, "delta", has_rates ? bounds.delta : mp.delta);
        const SliceSpec spec = slice_from_json(j.at("slice"));
        const RasterResult grid = raster_slice(seq, spec, mp, g.threads);
        rep.attracted = grid.count(PixelClass::Converged);
        rep.escaped = grid.count(PixelClass::Escaped);
        rep.undecided = grid.count(PixelClass::Undecided);
        io::write_text(out_path(g, "basin_grid.csv"), write_grid_csv(grid));
        io::write_text(out_path(g, "basin.ppm"), write_ppm(grid, io::get_or<std::string>(j, "palette", "mono")));
    }
    Json rj = to_json(rep);
    if (!has_rates) {
        rj["rates_checked"] = false;
        rj["passed"] = true;
    }
    io::write_text(out_path(g, "basin_report.json"), io::dump(rj));
    io::write_text(out_path(g, "basin_report.csv"), basin_report_csv(rep));
    if (has_rates) {
        std::printf("rates: measured [%.6f, %.6f] vs window [%.3f, %.3f], r^2 < s %s, violations %zu\n", rep.measured_s,
                    rep.measured_r, bounds.s, bounds.r, rep.r2_below_s ? "yes" : "no", rep.violation_count);
    }
    std::printf("membership: attracted %zu escaped %zu undecided %zu\n", rep.attracted, rep.escaped, rep.undecided);
    return !has_rates || rep.passed() ? kOk : kCertFailed;
}

int cmd_render(const Globals& g, const std::string& plan_path, const std::string& slice_path) {
    const Json pj = io::read_file(plan_path);
    const PushOutPlan plan = plan_from_json(pj);
    const Json sj = io::read_file(slice_path);
    const SliceSpec spec = slice_from_json(sj);
    if (!plan.certified()) {
        std::cerr << "plan is not certified\n";
        return kCertFailed;
    }
    const RasterResult r = raster_slice(plan, spec, g.threads);
    io::write_text(out_path(g, "render.ppm"), write_ppm(r, io::get_or<std::string>(sj, "palette", "stage")));
    io::write_text(out_path(g, "render.csv"), write_grid_csv(r));
    io::write_text(out_path(g, "render.json"), io::dump(raster_summary_json(r)));
    std::printf("%zux%zu: converged %zu escaped %zu undecided %zu\n", r.width, r.height, r.count(PixelClass::Converged),
                r.count(PixelClass::Escaped), r.count(PixelClass::Undecided));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fatou-Bieberbach push-out toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out-dir", g.out_dir, "directory for written files");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 1024u));

    std::string path, path2;
    std::optional<std::size_t> samples;
    auto* dec = app.add_subcommand("decompose", "decompose a polynomial field into complete parts");
    dec->add_option("field", path, "field file")->required();
    auto* flow = app.add_subcommand("flow", "compare splitting flows against RK4");
    flow->add_option("config", path, "flow config (optional)");
    auto* po = app.add_subcommand("pushout", "build or check push-out plans");
    po->require_subcommand(1);
    auto* run = po->add_subcommand("run", "build and certify a plan");
    run->add_option("scenario", path, "scenario file")->required();
    auto* check = po->add_subcommand("check", "run the post-hoc checks on a plan");
    check->add_option("plan", path, "plan file")->required();
    check->add_option("--samples", samples, "avoidance samples");
    auto* basin = app.add_subcommand("basin", "rate bounds and membership grid");
    basin->add_option("config", path, "basin config")->required();
    auto* render = app.add_subcommand("render", "rasterize a slice of a plan");
    render->add_option("plan", path, "plan file")->required();
    render->add_option("slice", path2, "slice file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kUsage;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (*dec) return cmd_decompose(g, path);
        if (*flow) return cmd_flow(g, path);
        if (*run) return cmd_pushout_run(g, path);
        if (*check) return cmd_pushout_check(g, path, samples);
        if (*basin) return cmd_basin(g, path);
        if (*render) return cmd_render(g, path, path2);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    std::cerr << app.help();
    return kUsage;
}
