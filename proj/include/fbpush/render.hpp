#pragma once

#include "fbpush/basins.hpp"
#include "fbpush/json_io.hpp"
#include "fbpush/parallel.hpp"
#include "fbpush/pushout.hpp"

#include <array>
#include <cstdint>
#include <sstream>
#include <string>

namespace fbpush {

inline constexpr std::size_t kMaxPixels = 4096ull * 4096ull;

enum class SliceKind { RealPlane, ComplexLine };

// Pixel (col, row) maps to base + s dir1 + t dir2 with (s, t) in the window;
// on a complex line dir2 is i dir1. Row 0 is the top of the image.
struct SliceSpec {
    SliceKind kind = SliceKind::RealPlane;
    CVec base;
    CVec dir1, dir2;
    double center_s = 0.0, center_t = 0.0;
    double half_s = 1.0, half_t = 1.0;
    std::size_t width = 64, height = 64;
    CVec param;  // parameter value z for parameterized plans
    std::size_t max_pixels = kMaxPixels;

    CVec second() const { return kind == SliceKind::ComplexLine ? CVec(Cpx(0.0, 1.0) * dir1) : dir2; }

    void validate() const {
        if (width == 0 || height == 0) throw std::invalid_argument("slice: resolution must be positive");
        if (width * height > max_pixels) throw std::invalid_argument("slice: resolution exceeds the configured maximum");
        if (!(half_s > 0.0 && half_t > 0.0)) throw std::invalid_argument("slice: half-widths must be positive");
        require_dim(static_cast<std::size_t>(dir1.size()), static_cast<std::size_t>(base.size()), "slice dir1");
        const CVec d2 = second();
        require_dim(static_cast<std::size_t>(d2.size()), static_cast<std::size_t>(base.size()), "slice dir2");
        // Independence over R: Gram determinant of the real 2n-vectors.
        const double a = dir1.squaredNorm(), b = d2.squaredNorm(), c = dir1.dot(d2).real();
        if (!(a * b - c * c > 1e-12 * a * b) || a == 0.0) throw std::invalid_argument("slice: directions are dependent");
    }

    CVec point(std::size_t col, std::size_t row) const {
        const double s = center_s + half_s * (2.0 * (static_cast<double>(col) + 0.5) / static_cast<double>(width) - 1.0);
        const double t = center_t - half_t * (2.0 * (static_cast<double>(row) + 0.5) / static_cast<double>(height) - 1.0);
        return base + s * dir1 + t * second();
    }
};

enum class PixelClass : std::uint8_t { Converged, Escaped, Undecided };

inline const char* to_string(PixelClass c) {
    switch (c) {
        case PixelClass::Converged: return "converged";
        case PixelClass::Escaped: return "escaped";
        case PixelClass::Undecided: return "undecided";
    }
    return "?";
}

struct Pixel {
    PixelClass cls = PixelClass::Undecided;
    std::size_t stage = 0;
    double scalar = 0.0;  // gap to K (plans) or steps to attraction (sequences)
};

struct RasterResult {
    std::size_t width = 0, height = 0;
    std::vector<Pixel> pixels;  // row-major
    std::string scalar_name;

    const Pixel& at(std::size_t col, std::size_t row) const { return pixels[row * width + col]; }

    std::size_t count(PixelClass c) const {
        std::size_t k = 0;
        for (const auto& p : pixels) k += p.cls == c;
        return k;
    }
};

inline RasterResult raster_slice(const PushOutPlan& plan, const SliceSpec& spec, unsigned threads = 1) {
    spec.validate();
    if (!plan.certified()) throw std::invalid_argument("raster_slice: plan is not certified");
    require_dim(static_cast<std::size_t>(spec.base.size()), plan.n(), "slice base");
    const CVec z = spec.param.size() == 0 ? zeros(plan.N()) : spec.param;
    require_dim(static_cast<std::size_t>(z.size()), plan.N(), "slice parameter");
    const CompactSet Kz = plan.scenario.K().is_empty() ? plan.scenario.K() : plan.scenario.K_at(z);
    RasterResult out{spec.width, spec.height, std::vector<Pixel>(spec.width * spec.height), "gap_to_K"};
    parallel_for(out.pixels.size(), threads, [&](std::size_t i) {
        const CVec zeta = spec.point(i % spec.width, i / spec.width);
        const LimitClassification lc = eval_limit(plan, z, zeta);
        Pixel& px = out.pixels[i];
        px.cls = lc.outcome == LimitOutcome::Converged ? PixelClass::Converged
                 : lc.outcome == LimitOutcome::Escaped ? PixelClass::Escaped
                                                       : PixelClass::Undecided;
        px.stage = lc.stage;
        px.scalar = Kz.is_empty() ? std::numeric_limits<double>::infinity() : Kz.signed_gap(zeta);
    });
    return out;
}

struct MembershipParams {
    double escape_radius = 1e6;
    std::size_t horizon = 1000;
    double delta = 0.05;
};

inline RasterResult raster_slice(const AutSequence& seq, const SliceSpec& spec, const MembershipParams& mp,
                                 unsigned threads = 1) {
    spec.validate();
    require_dim(static_cast<std::size_t>(spec.base.size()), seq.dim(), "slice base");
    RasterResult out{spec.width, spec.height, std::vector<Pixel>(spec.width * spec.height), "steps"};
    parallel_for(out.pixels.size(), threads, [&](std::size_t i) {
        const Membership m = basin_membership(seq, spec.point(i % spec.width, i / spec.width), mp.escape_radius,
                                              mp.horizon, mp.delta);
        Pixel& px = out.pixels[i];
        px.cls = m.verdict == BasinVerdict::Attracted ? PixelClass::Converged
                 : m.verdict == BasinVerdict::Escaped ? PixelClass::Escaped
                                                      : PixelClass::Undecided;
        px.stage = m.step;
        px.scalar = static_cast<double>(m.step);
    });
    return out;
}

using Rgb = std::array<std::uint8_t, 3>;

namespace detail {

inline constexpr std::array<Rgb, 8> kConvergedRamp{{{{250, 250, 240}},
                                                    {{214, 234, 248}},
                                                    {{174, 214, 241}},
                                                    {{133, 193, 233}},
                                                    {{93, 173, 226}},
                                                    {{52, 152, 219}},
                                                    {{40, 116, 166}},
                                                    {{27, 79, 114}}}};
inline constexpr std::array<Rgb, 8> kEscapedRamp{{{{120, 40, 31}},
                                                  {{146, 43, 33}},
                                                  {{176, 58, 46}},
                                                  {{203, 67, 53}},
                                                  {{231, 76, 60}},
                                                  {{236, 112, 99}},
                                                  {{241, 148, 138}},
                                                  {{245, 183, 177}}}};
inline constexpr Rgb kUndecided{{255, 0, 255}};

}  // namespace detail

inline Rgb palette_color(const Pixel& p, const std::string& palette) {
    if (palette == "mono") {
        switch (p.cls) {
            case PixelClass::Converged: return {255, 255, 255};
            case PixelClass::Escaped: return {0, 0, 0};
            case PixelClass::Undecided: return {128, 128, 128};
        }
    }
    if (palette == "stage") {
        const std::size_t k = p.stage == 0 ? 0 : (p.stage - 1) % 8;
        switch (p.cls) {
            case PixelClass::Converged: return detail::kConvergedRamp[k];
            case PixelClass::Escaped: return detail::kEscapedRamp[k];
            case PixelClass::Undecided: return detail::kUndecided;
        }
    }
    throw std::invalid_argument("unknown palette '" + palette + "'");
}

// Binary P6: "P6 W H 255\n" followed by W*H RGB triples, row-major.
inline std::string write_ppm(const RasterResult& r, const std::string& palette) {
    std::string out = "P6 " + std::to_string(r.width) + " " + std::to_string(r.height) + " 255\n";
    out.reserve(out.size() + 3 * r.pixels.size());
    for (const auto& p : r.pixels) {
        const Rgb c = palette_color(p, palette);
        out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
    return out;
}

inline std::string write_grid_csv(const RasterResult& r) {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    os << "row,col,class,stage," << r.scalar_name << '\n';
    for (std::size_t row = 0; row < r.height; ++row) {
        for (std::size_t col = 0; col < r.width; ++col) {
            const Pixel& p = r.at(col, row);
            os << row << ',' << col << ',' << to_string(p.cls) << ',' << p.stage << ',' << io::fmt(p.scalar) << '\n';
        }
    }
    return os.str();
}

// Aggregates in row-major order, independent of how pixels were computed.
inline Json raster_summary_json(const RasterResult& r) {
    double min_scalar = std::numeric_limits<double>::infinity();
    for (const auto& p : r.pixels) min_scalar = std::min(min_scalar, p.scalar);
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "fbpush.raster_summary"},
                {"width", r.width},
                {"height", r.height},
                {"converged", r.count(PixelClass::Converged)},
                {"escaped", r.count(PixelClass::Escaped)},
                {"undecided", r.count(PixelClass::Undecided)},
                {"scalar", r.scalar_name},
                {"min_scalar", io::num(min_scalar)}};
}

inline SliceSpec slice_from_json(const Json& j) {
    io::check_schema(j, "slice");
    SliceSpec s;
    const auto kind = io::get_or<std::string>(j, "kind", "plane");
    if (kind != "plane" && kind != "line") throw FormatError("slice: kind must be 'plane' or 'line'");
    s.kind = kind == "plane" ? SliceKind::RealPlane : SliceKind::ComplexLine;
    s.base = cvec_from_json(io::field(j, "base"));
    s.dir1 = cvec_from_json(io::field(j, "dir1"));
    if (s.kind == SliceKind::RealPlane) s.dir2 = cvec_from_json(io::field(j, "dir2"));
    if (j.contains("center")) {
        const auto& c = j.at("center");
        s.center_s = io::get_num(c.at(0));
        s.center_t = io::get_num(c.at(1));
    }
    if (j.contains("half_width")) {
        const auto& h = j.at("half_width");
        s.half_s = io::get_num(h.at(0));
        s.half_t = io::get_num(h.at(1));
    }
    s.width = io::get_or<std::size_t>(j, "width", s.width);
    s.height = io::get_or<std::size_t>(j, "height", s.height);
    s.max_pixels = io::get_or<std::size_t>(j, "max_pixels", s.max_pixels);
    if (j.contains("param") && !j.at("param").is_null()) s.param = cvec_from_json(j.at("param"));
    try {
        s.validate();
    } catch (const std::logic_error& e) {
        throw FormatError(e.what());
    }
    return s;
}

}  // namespace fbpush
