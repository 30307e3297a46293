#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vesseltopo/metrics.hpp"
#include "vesseltopo/morphology.hpp"
#include "vesseltopo/phantom.hpp"
#include "vesseltopo/volume.hpp"

using namespace vt;

namespace {

BinaryVolume box(Dims3 d, std::array<int, 3> lo, std::array<int, 3> hi) {
    BinaryVolume m(d, 0);
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) m(x, y, z) = 1;
    return m;
}

// brute-force pooled bidirectional 95th percentile over 6-connectivity surfaces
double hd95_oracle(const BinaryVolume& pred, const BinaryVolume& gt, const VoxelSpacing& sp) {
    auto surf = [](const BinaryVolume& m) {
        std::vector<std::array<int, 3>> out;
        const Dims3 d = m.dims();
        static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                      {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.w; ++y)
                for (int x = 0; x < d.h; ++x) {
                    if (!m(x, y, z)) continue;
                    for (const auto& o : off) {
                        int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                        if (!m.in_bounds(xx, yy, zz) || !m(xx, yy, zz)) {
                            out.push_back({x, y, z});
                            break;
                        }
                    }
                }
        return out;
    };
    auto sp_v = surf(pred), sg_v = surf(gt);
    auto dmin = [&](const std::array<int, 3>& a, const std::vector<std::array<int, 3>>& pts) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : pts) {
            double dx = (a[0] - b[0]) * sp[0], dy = (a[1] - b[1]) * sp[1],
                   dz = (a[2] - b[2]) * sp[2];
            best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        return best;
    };
    std::vector<double> pooled;
    for (const auto& a : sp_v) pooled.push_back(dmin(a, sg_v));
    for (const auto& a : sg_v) pooled.push_back(dmin(a, sp_v));
    std::sort(pooled.begin(), pooled.end());
    if (pooled.size() == 1) return pooled[0];
    double h = 0.95 * double(pooled.size() - 1);
    size_t lo = size_t(std::floor(h));
    size_t hi = std::min(lo + 1, pooled.size() - 1);
    return pooled[lo] + (h - double(lo)) * (pooled[hi] - pooled[lo]);
}

}  // namespace

TEST_CASE("dice: identical, disjoint, half overlap, and empty conventions") {
    Dims3 d{8, 8, 8};
    BinaryVolume a = box(d, {1, 1, 1}, {4, 4, 4});
    CHECK(*dice_metric(a, a) == 1.0);

    BinaryVolume b = box(d, {6, 6, 6}, {7, 7, 7});
    CHECK(*dice_metric(a, b) == 0.0);

    // |P| = |G| = 8, |P ∩ G| = 4  ->  2*4 / 16 = 0.5
    BinaryVolume p = box(d, {0, 0, 0}, {1, 1, 1});
    BinaryVolume g = box(d, {1, 0, 0}, {2, 1, 1});
    CHECK(*dice_metric(p, g) == 0.5);

    BinaryVolume e(d, 0);
    CHECK_FALSE(dice_metric(e, e).has_value());
    CHECK(*dice_metric(a, e) == 0.0);
    CHECK(*dice_metric(e, a) == 0.0);

    BinaryVolume wrong(Dims3{2, 2, 2}, 0);
    CHECK_THROWS(dice_metric(a, wrong));
}

TEST_CASE("cldice: identical tube 1, dilated pred still 1, broken tube penalized") {
    PhantomSpec spec;
    spec.kind = PhantomKind::tube;
    spec.dims = {24, 11, 11};
    spec.radius_voxels = 2;
    LabelVolume tube = make_phantom(spec);
    BinaryVolume gt = tube.class_mask(1);

    CHECK(*cldice_metric(gt, gt) == 1.0);

    // Dilation keeps both centerlines inside the other mask.
    BinaryVolume fat = dilate(gt, 1);
    CHECK(*cldice_metric(fat, gt) == 1.0);

    LabelVolume broken = inject_break(tube, 1, 11, 3);
    BinaryVolume bm = broken.class_mask(1);
    double cl = *cldice_metric(bm, gt);
    CHECK(cl < 1.0);

    // equal-volume boundary jitter keeps the centerline intact: clDice stays
    // at 1 while Dice drops, so the break is the topologically worse error
    std::int64_t removed = count_nonzero(gt) - count_nonzero(bm);
    LabelVolume jit = jitter_boundary(tube, 1, int(removed), 4242, JitterMode::remove);
    BinaryVolume jm = jit.class_mask(1);
    CHECK(*dice_metric(jm, gt) < 1.0);
    CHECK(*cldice_metric(jm, gt) == 1.0);
    CHECK(cl < *cldice_metric(jm, gt));

    BinaryVolume e(gt.dims(), 0);
    CHECK_FALSE(cldice_metric(e, e).has_value());
    CHECK(*cldice_metric(e, gt) == 0.0);
}

TEST_CASE("hd95: zero for identical masks, exact for unit translations") {
    Dims3 d{10, 10, 10};
    VoxelSpacing iso(1, 1, 1);
    BinaryVolume cube = box(d, {2, 2, 2}, {5, 5, 5});
    CHECK(*hd95(cube, cube, iso) == 0.0);

    BinaryVolume moved = box(d, {3, 2, 2}, {6, 5, 5});
    CHECK(*hd95(cube, moved, iso) == doctest::Approx(1.0).epsilon(1e-12));

    // anisotropic spacing scales a unit z translation to 2 mm
    VoxelSpacing aniso(1, 1, 2);
    BinaryVolume zmoved = box(d, {2, 2, 3}, {5, 5, 6});
    CHECK(*hd95(cube, zmoved, aniso) == doctest::Approx(2.0).epsilon(1e-12));

    BinaryVolume e(d, 0);
    CHECK_FALSE(hd95(cube, e, iso).has_value());
    CHECK_FALSE(hd95(e, e, iso).has_value());
}

TEST_CASE("hd95 matches the brute-force surface-distance oracle") {
    std::mt19937_64 rng(77);
    int used = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Dims3 d{int(3 + rng() % 6), int(3 + rng() % 6), int(3 + rng() % 6)};
        VoxelSpacing sp = (trial % 3 == 0) ? VoxelSpacing(0.5, 1.0, 2.0) : VoxelSpacing(1, 1, 1);
        BinaryVolume p(d, 0), g(d, 0);
        for (std::int64_t i = 0; i < p.size(); ++i) {
            p[i] = (rng() % 3) == 0;
            g[i] = (rng() % 3) == 0;
        }
        if (count_nonzero(p) == 0 || count_nonzero(g) == 0) continue;
        ++used;
        CHECK(*hd95(p, g, sp) == doctest::Approx(hd95_oracle(p, g, sp)).epsilon(1e-9));
    }
    CHECK(used >= 30);
}

TEST_CASE("case_metrics on a perfect toy CoW prediction") {
    PhantomSpec spec;
    spec.kind = PhantomKind::toy_cow;
    spec.dims = kToyCowMinDims;
    LabelVolume gt = make_phantom(spec);
    ClassScheme scheme = default_cow_scheme();

    CaseMetrics cm = case_metrics(gt, gt, scheme, gt.spacing(), "perfect");
    CHECK(cm.per_class.size() == 20);
    for (int id = 1; id <= 20; ++id) {
        const ClassMetrics& m = cm.cls(id);
        CHECK(m.gt_present);
        CHECK(m.pred_present);
        CHECK(*m.dice == 1.0);
        CHECK(*m.cldice == 1.0);
        CHECK(*m.hd95_mm == 0.0);
        CHECK(m.b0_error == 0);
        CHECK(m.b_error == 0);
        CHECK_FALSE(m.missing_structure);
    }
    GroupSummary all = summarize(cm, scheme);
    CHECK(all.count == 20);
    CHECK(all.dice_mean == 1.0);
    CHECK(all.b0_mean == 0.0);
}

TEST_CASE("case_metrics flags a missing structure on exactly one side") {
    PhantomSpec spec;
    spec.kind = PhantomKind::toy_cow;
    spec.dims = kToyCowMinDims;
    LabelVolume gt = make_phantom(spec);
    PhantomSpec vspec = spec;
    vspec.absent = {"no-pcom-left"};
    LabelVolume pred = make_phantom(vspec);
    ClassScheme scheme = default_cow_scheme();
    int lp = scheme.id_of("L-Pcom");

    CaseMetrics cm = case_metrics(pred, gt, scheme, gt.spacing(), "variant");
    const ClassMetrics& m = cm.cls(lp);
    CHECK(m.gt_present);
    CHECK_FALSE(m.pred_present);
    CHECK(m.missing_structure);
    CHECK(*m.dice == 0.0);
    CHECK(*m.cldice == 0.0);
    CHECK_FALSE(m.hd95_mm.has_value());
    CHECK(m.b0_error == 1);  // 0 components vs 1
    // every other class is untouched
    for (int id = 1; id <= 20; ++id)
        if (id != lp) CHECK(*cm.cls(id).dice == 1.0);

    // a class absent from both sides yields undefined metrics
    LabelVolume both = make_phantom(vspec);
    CaseMetrics cb = case_metrics(both, both, scheme, gt.spacing(), "both");
    CHECK_FALSE(cb.cls(lp).defined());
    CHECK_FALSE(cb.cls(lp).dice.has_value());
}

TEST_CASE("absent_artery_fpr counts hallucinations over gt-absent cases") {
    PhantomSpec spec;
    spec.kind = PhantomKind::toy_cow;
    spec.dims = kToyCowMinDims;
    LabelVolume full = make_phantom(spec);
    PhantomSpec vspec = spec;
    vspec.absent = {"no-acom"};
    LabelVolume noacom = make_phantom(vspec);
    ClassScheme scheme = default_cow_scheme();
    int acom = scheme.id_of("Acom");

    // 4 gt-absent cases, 1 hallucination -> 0.25
    std::vector<std::pair<const LabelVolume*, const LabelVolume*>> cohort{
        {&full, &noacom},    // hallucinated
        {&noacom, &noacom},  // correct absence
        {&noacom, &noacom},
        {&noacom, &noacom},
    };
    CHECK(*absent_artery_fpr(cohort, acom) == 0.25);

    // min_voxels above the structure size suppresses the hit
    std::int64_t acom_sz = count_nonzero(full.class_mask(acom));
    CHECK(*absent_artery_fpr(cohort, acom, acom_sz + 1) == 0.0);

    // class present in every gt -> undefined
    std::vector<std::pair<const LabelVolume*, const LabelVolume*>> present{{&full, &full}};
    CHECK_FALSE(absent_artery_fpr(present, acom).has_value());
    CHECK_THROWS(absent_artery_fpr({}, acom));
}

TEST_CASE("mean_diameter of a straight tube tracks 2*(radius EDT)") {
    PhantomSpec spec;
    spec.kind = PhantomKind::tube;
    spec.dims = {30, 11, 11};
    spec.radius_voxels = 2;
    LabelVolume tube = make_phantom(spec);
    double dia = *mean_diameter(tube, 1, tube.spacing());
    // centerline EDT of a radius-2 tube is about 2 voxels -> diameter about 4
    CHECK(dia == doctest::Approx(4.0).epsilon(0.3));

    // doubling all spacings doubles the physical diameter
    LabelVolume scaled(tube.dims(), VoxelSpacing(2, 2, 2), tube.num_classes());
    for (std::int64_t i = 0; i < tube.voxels(); ++i) scaled[i] = tube[i];
    CHECK(*mean_diameter(scaled, 1, scaled.spacing()) ==
          doctest::Approx(2.0 * dia).epsilon(1e-9));

    CHECK_FALSE(mean_diameter(tube, 2, tube.spacing()).has_value());
}

TEST_CASE("snr_estimate is mean(fg)/sd(bg)") {
    Dims3 d{4, 4, 4};
    ScalarField img(d, 0.0);
    BinaryVolume fg(d, 0);
    fg(0, 0, 0) = fg(1, 0, 0) = 1;
    img(0, 0, 0) = 10.0;
    img(1, 0, 0) = 10.0;
    // background alternates 1 and -1: mean 0, sd 1
    int k = 0;
    for (std::int64_t i = 0; i < img.size(); ++i)
        if (!fg[i]) img[i] = (k++ % 2 == 0) ? 1.0 : -1.0;
    CHECK(*snr_estimate(img, fg) == doctest::Approx(10.0).epsilon(1e-12));

    // constant background has zero sd -> undefined
    for (std::int64_t i = 0; i < img.size(); ++i)
        if (!fg[i]) img[i] = 3.0;
    CHECK_FALSE(snr_estimate(img, fg).has_value());

    BinaryVolume all(d, 1);
    CHECK_THROWS(snr_estimate(img, all));
}

TEST_CASE("report CSV has the documented columns and is deterministic") {
    PhantomSpec spec;
    spec.kind = PhantomKind::toy_cow;
    spec.dims = kToyCowMinDims;
    LabelVolume gt = make_phantom(spec);
    PhantomSpec vspec = spec;
    vspec.absent = {"no-pcom-left"};
    LabelVolume pred = make_phantom(vspec);
    ClassScheme scheme = default_cow_scheme();

    CohortReport r;
    r.cases.push_back(case_metrics(pred, gt, scheme, gt.spacing(), "case01"));
    r.fpr_by_class[scheme.id_of("Acom")] = 0.25;

    auto tmp = std::filesystem::temp_directory_path();
    std::string p1 = (tmp / "vt_report_a.csv").string();
    std::string p2 = (tmp / "vt_report_b.csv").string();
    write_report_csv(r, scheme, p1);
    write_report_csv(r, scheme, p2);

    std::ifstream f1(p1), f2(p2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    std::istringstream lines(s1.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "case_id,class,dice,cldice,hd95_mm,b0_error,b_error,gt_present,pred_present");
    int rows = 0;
    bool saw_missing = false;
    for (std::string line; std::getline(lines, line);) {
        ++rows;
        if (line.rfind("case01,L-Pcom,", 0) == 0) {
            saw_missing = true;
            // dice 0, cldice 0, empty hd95, gt present, pred absent
            CHECK(line == "case01,L-Pcom,0,0,,1,1,1,0");
        }
    }
    CHECK(rows == 20);
    CHECK(saw_missing);

    nlohmann::json j = report_to_json(r, scheme);
    CHECK(j["cases"].size() == 1);
    CHECK(j["cases"][0]["classes"].size() == 20);
    CHECK(j["absent_artery_fpr"]["Acom"] == 0.25);

    std::string ps = (tmp / "vt_summary.csv").string();
    write_summary_csv(r, scheme, ps);
    std::ifstream fs(ps);
    std::string sh;
    std::getline(fs, sh);
    CHECK(sh ==
          "group,cases,dice_mean,dice_sd,cldice_mean,cldice_sd,hd95_mean,hd95_sd,b0_mean,b_mean");

    std::remove(p1.c_str());
    std::remove(p2.c_str());
    std::remove(ps.c_str());
}
