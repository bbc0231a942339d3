#include "fbpush/render.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fbpush;

namespace {

CVec v2(Cpx a, Cpx b) {
    CVec x(2);
    x << a, b;
    return x;
}

Json load(const std::string& rel) { return io::read_file(std::string(FBPUSH_SOURCE_DIR) + "/" + rel); }

const PushOutPlan& ball_avoid_plan() {
    static const PushOutPlan plan = run_pushout(scenario_from_json(load("presets/ball-avoid.json")), {}).plan;
    return plan;
}

SliceSpec plane(CVec base, double half, std::size_t w, std::size_t h) {
    SliceSpec s;
    s.base = std::move(base);
    s.dir1 = v2(1, 0);
    s.dir2 = v2(0, 1);
    s.half_s = s.half_t = half;
    s.width = w;
    s.height = h;
    return s;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

TEST(SliceSpecType, PixelCentersAndOrientation) {
    const SliceSpec s = plane(v2(1, 0), 2.0, 4, 2);
    EXPECT_EQ(s.point(0, 0), v2(1.0 - 1.5, Cpx(0.0) + 1.0));
    EXPECT_EQ(s.point(3, 1), v2(1.0 + 1.5, Cpx(0.0) - 1.0));
    SliceSpec line = s;
    line.kind = SliceKind::ComplexLine;
    EXPECT_EQ(line.point(3, 0), v2(Cpx(2.5, 1.0), 0));
}

TEST(SliceSpecType, Validation) {
    SliceSpec s = plane(v2(0, 0), 1.0, 8, 8);
    EXPECT_NO_THROW(s.validate());
    s.dir2 = 2.0 * s.dir1;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = plane(v2(0, 0), 1.0, 8, 8);
    s.dir2 = Cpx(0, 1) * s.dir1;  // independent over R
    EXPECT_NO_THROW(s.validate());
    s = plane(v2(0, 0), 1.0, 4097, 4096);
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = plane(v2(0, 0), 1.0, 0, 4);
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = plane(v2(0, 0), 1.0, 64, 64);
    s.max_pixels = 1000;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(RasterPlan, IdentityPlanConvergesEverywhere) {
    const PushOutPlan id{scenario_from_json(load("presets/ball-avoid.json")), {}, {}};
    const RasterResult r = raster_slice(id, plane(v2(1, 0), 3.0, 16, 16));
    EXPECT_EQ(r.count(PixelClass::Converged), 256u);
    for (const auto& p : r.pixels) EXPECT_EQ(p.stage, 1u);
}

TEST(RasterPlan, ObstacleDiscClassifiesEscaped) {
    const PushOutPlan& plan = ball_avoid_plan();
    const SliceSpec s = slice_from_json(load("configs/ball-avoid-slice.json"));
    const RasterResult r = raster_slice(plan, s, 4);
    const CompactSet& K = plan.scenario.K();
    std::size_t inside = 0;
    for (std::size_t row = 0; row < r.height; ++row) {
        for (std::size_t col = 0; col < r.width; ++col) {
            const CVec x = s.point(col, row);
            const Pixel& p = r.at(col, row);
            EXPECT_NEAR(p.scalar, K.signed_gap(x), 1e-15);
            if ((x - v2(2, 0)).norm() < 0.5) {
                ++inside;
                EXPECT_EQ(p.cls, PixelClass::Escaped) << "row " << row << " col " << col;
            }
            if (x.norm() < plan.scenario.ball_B()) {
                EXPECT_EQ(p.cls, PixelClass::Converged);
            }
        }
    }
    EXPECT_GT(inside, 100u);
}

TEST(RasterPlan, SinglePixelIsADirectEvaluation) {
    const PushOutPlan& plan = ball_avoid_plan();
    for (const CVec& base : {v2(0.1, 0), v2(2, 0), v2(1.2, {0, 0.3})}) {
        const RasterResult r = raster_slice(plan, plane(base, 0.5, 1, 1));
        const LimitClassification lc = eval_limit(plan, CVec(0), base);
        ASSERT_EQ(r.pixels.size(), 1u);
        EXPECT_EQ(static_cast<int>(r.pixels[0].cls), static_cast<int>(lc.outcome));
        EXPECT_EQ(r.pixels[0].stage, lc.stage);
    }
}

TEST(RasterPlan, RejectsUncertifiedPlans) {
    PushOutPlan plan = ball_avoid_plan();
    plan.stages[0].certificate.min_gap = -1.0;
    EXPECT_THROW(raster_slice(plan, plane(v2(0, 0), 1.0, 2, 2)), std::invalid_argument);
}

TEST(RasterPlan, ThreadCountIndependent) {
    const PushOutPlan& plan = ball_avoid_plan();
    const SliceSpec s = plane(v2(1, 0), 2.0, 40, 30);
    const RasterResult a = raster_slice(plan, s, 1), b = raster_slice(plan, s, 8);
    EXPECT_EQ(write_ppm(a, "stage"), write_ppm(b, "stage"));
    EXPECT_EQ(write_grid_csv(a), write_grid_csv(b));
    EXPECT_EQ(io::dump(raster_summary_json(a)), io::dump(raster_summary_json(b)));
}

TEST(RasterPlan, DefaultSliceGolden) {
    const RasterResult r = raster_slice(ball_avoid_plan(), slice_from_json(load("configs/ball-avoid-slice.json")), 4);
    const std::string ppm = write_ppm(r, "stage");
    // Recorded from the first certified run of the shipped preset.
    EXPECT_EQ(fnv1a(ppm), 0x6b12b8cc444fb235ull) << std::hex << "hash " << fnv1a(ppm);
}

TEST(RasterSequence, HalvingAttractsEverything) {
    const AutSequence seq = AutSequence::cyclic({AutWord(2, {BasicAut::scale(2, 0.5)})}, zeros(2));
    const RasterResult r = raster_slice(seq, plane(v2(0, 0), 10.0, 8, 8), MembershipParams{});
    EXPECT_EQ(r.count(PixelClass::Converged), 64u);
    for (const auto& p : r.pixels) EXPECT_EQ(p.scalar, static_cast<double>(p.stage));
}

TEST(Ppm, SinglePixelDocument) {
    RasterResult r{1, 1, {Pixel{PixelClass::Converged, 1, 0.0}}, "x"};
    const std::string doc = write_ppm(r, "mono");
    EXPECT_EQ(doc, std::string("P6 1 1 255\n") + std::string(3, '\xff'));
    EXPECT_EQ(doc.size(), 14u);
    r.pixels[0].cls = PixelClass::Escaped;
    EXPECT_EQ(write_ppm(r, "mono"), std::string("P6 1 1 255\n") + std::string(3, '\0'));
    EXPECT_THROW(write_ppm(r, "sepia"), std::invalid_argument);
}

TEST(Ppm, HeaderAndPayloadSize) {
    RasterResult r{5, 3, std::vector<Pixel>(15), "x"};
    const std::string doc = write_ppm(r, "stage");
    const std::string header = "P6 5 3 255\n";
    EXPECT_EQ(doc.substr(0, header.size()), header);
    EXPECT_EQ(doc.size(), header.size() + 45);
    EXPECT_EQ(doc, write_ppm(r, "stage"));
}

TEST(GridCsv, RowMajorWithHeader) {
    RasterResult r{2, 2, std::vector<Pixel>(4), "steps"};
    r.pixels[1] = {PixelClass::Escaped, 3, 2.5};
    const std::string csv = write_grid_csv(r);
    EXPECT_EQ(csv,
              "# schema_version=1\n"
              "row,col,class,stage,steps\n"
              "0,0,undecided,0,0.0\n"
              "0,1,escaped,3,2.5\n"
              "1,0,undecided,0,0.0\n"
              "1,1,undecided,0,0.0\n");
}

TEST(SliceJson, ShippedConfigsParse) {
    const SliceSpec a = slice_from_json(load("configs/ball-avoid-slice.json"));
    EXPECT_EQ(a.kind, SliceKind::RealPlane);
    EXPECT_EQ(a.width, 128u);
    const SliceSpec b = slice_from_json(load("configs/param-disc-slice.json"));
    EXPECT_EQ(b.kind, SliceKind::ComplexLine);
    EXPECT_EQ(b.param.size(), 1);
    Json bad = load("configs/ball-avoid-slice.json");
    bad["kind"] = "cube";
    EXPECT_THROW(slice_from_json(bad), FormatError);
}
