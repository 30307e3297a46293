// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
// argv[1] must be the path to the command-line binary (used by criterion 7).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "vesseltopo/adjacency.hpp"
#include "vesseltopo/analysis.hpp"
#include "vesseltopo/losses.hpp"
#include "vesseltopo/metrics.hpp"
#include "vesseltopo/morphology.hpp"
#include "vesseltopo/phantom.hpp"
#include "vesseltopo/scheme.hpp"
#include "vesseltopo/topology.hpp"
#include "vesseltopo/volume.hpp"

using namespace vt;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, const std::string& what, bool ok) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << what << std::endl;
    if (!ok) ++g_failures;
}

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

ProbVolume random_simplex(Dims3 d, int c, std::uint64_t seed) {
    ProbVolume p(c, d, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::int64_t v = 0; v < p.voxels(); ++v) {
        double s = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            double x = -std::log(1.0 - u(rng)) + 0.1;  // keep away from the eps clamp
            p.at(ch, v) = x;
            s += x;
        }
        for (int ch = 0; ch < c; ++ch) p.at(ch, v) /= s;
    }
    return p;
}

ProbVolume soften(const LabelVolume& l, double p_hit = 0.94) {
    const int c = l.num_classes();
    ProbVolume p(c, l.dims(), (1.0 - p_hit) / double(c - 1));
    for (std::int64_t v = 0; v < l.voxels(); ++v) p.at(l[v], v) = p_hit;
    return p;
}

// --- independent oracles -----------------------------------------------------

int bfs_components(const BinaryVolume& m, int connectivity) {
    Grid3<int> seen(m.dims(), 0);
    int count = 0;
    for (std::int64_t start = 0; start < m.size(); ++start) {
        if (!m[start] || seen[start]) continue;
        ++count;
        std::queue<std::int64_t> q;
        q.push(start);
        seen[start] = 1;
        while (!q.empty()) {
            auto c = m.coords(q.front());
            q.pop();
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dx && !dy && !dz) continue;
                        if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1)
                            continue;
                        int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        if (!m.in_bounds(x, y, z)) continue;
                        std::int64_t i = m.index(x, y, z);
                        if (m[i] && !seen[i]) {
                            seen[i] = 1;
                            q.push(i);
                        }
                    }
        }
    }
    return count;
}

long chi_oracle(const BinaryVolume& m) {
    std::set<std::tuple<int, int, int>> verts, cubes;
    std::set<std::tuple<int, int, int, int>> edges, faces;
    const Dims3 d = m.dims();
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (!m(x, y, z)) continue;
                cubes.insert({x, y, z});
                for (int a = 0; a <= 1; ++a)
                    for (int b = 0; b <= 1; ++b)
                        for (int c = 0; c <= 1; ++c) verts.insert({x + a, y + b, z + c});
                for (int a = 0; a <= 1; ++a)
                    for (int b = 0; b <= 1; ++b) {
                        edges.insert({0, x, y + a, z + b});
                        edges.insert({1, x + a, y, z + b});
                        edges.insert({2, x + a, y + b, z});
                    }
                for (int c = 0; c <= 1; ++c) {
                    faces.insert({0, x + c, y, z});
                    faces.insert({1, x, y + c, z});
                    faces.insert({2, x, y, z + c});
                }
            }
    return long(verts.size()) - long(edges.size()) + long(faces.size()) - long(cubes.size());
}

long cavities_oracle(const BinaryVolume& m) {
    const Dims3 d = m.dims();
    Grid3<int> seen(d, 0);
    long enclosed = 0;
    for (std::int64_t start = 0; start < m.size(); ++start) {
        if (m[start] || seen[start]) continue;
        bool border = false;
        std::queue<std::int64_t> q;
        q.push(start);
        seen[start] = 1;
        while (!q.empty()) {
            auto c = m.coords(q.front());
            q.pop();
            if (c[0] == 0 || c[0] == d.h - 1 || c[1] == 0 || c[1] == d.w - 1 || c[2] == 0 ||
                c[2] == d.d - 1)
                border = true;
            static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                          {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
            for (const auto& o : off) {
                int x = c[0] + o[0], y = c[1] + o[1], z = c[2] + o[2];
                if (!m.in_bounds(x, y, z)) continue;
                std::int64_t i = m.index(x, y, z);
                if (!m[i] && !seen[i]) {
                    seen[i] = 1;
                    q.push(i);
                }
            }
        }
        if (!border) ++enclosed;
    }
    return enclosed;
}

ScalarField edt_oracle(const BinaryVolume& mask, const VoxelSpacing& sp) {
    ScalarField out(mask.dims(), 0.0);
    std::vector<std::array<int, 3>> bg;
    const Dims3 d = mask.dims();
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x)
                if (!mask(x, y, z)) bg.push_back({x, y, z});
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (!mask(x, y, z)) continue;
                double best = std::numeric_limits<double>::infinity();
                for (const auto& b : bg) {
                    double dx = (x - b[0]) * sp[0], dy = (y - b[1]) * sp[1],
                           dz = (z - b[2]) * sp[2];
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                out(x, y, z) = bg.empty() ? std::numeric_limits<double>::infinity()
                                          : std::sqrt(best);
            }
    return out;
}

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

// --- criteria ----------------------------------------------------------------

bool criterion1_gradients() {
    const double t0 = now_s();
    const Dims3 d{6, 6, 6};
    const int C = 4;
    LabelVolume gt(d, VoxelSpacing(1, 1, 1), C);
    for (int x = 0; x < 6; ++x) gt(x, 2, 2) = x < 3 ? 1 : 2;
    gt(0, 0, 0) = 3;
    gt(5, 5, 5) = 3;
    ProbVolume gt1h = one_hot(gt);
    ProbVolume pred = random_simplex(d, C, 404);

    AdjacencyMatrix a(3);
    a.set_pair(0, 1);
    ScalarField w = radius_weight_map(compute_radius_map(gt, gt.spacing()));
    BinaryVolume kp = keypoint_mask(gt, a, 1);

    LossConfig cfg;
    cfg.skeleton_iterations = 2;

    struct Term {
        const char* name;
        std::function<double(const ProbVolume&)> fn;
        Channels<double> grad;
        double tol;
    };
    std::vector<Term> terms;
    terms.push_back({"ce", [&](const ProbVolume& p) { return ce_loss(p, gt).value; },
                     ce_loss(pred, gt).grad, 1e-4});
    terms.push_back({"dice_weighted",
                     [&](const ProbVolume& p) { return radius_dice_loss(gt1h, p, w).value; },
                     radius_dice_loss(gt1h, pred, w).grad, 1e-4});
    terms.push_back({"neighbors_cldice",
                     [&](const ProbVolume& p) { return breakage_cldice_loss(p, gt1h, cfg).value; },
                     breakage_cldice_loss(pred, gt1h, cfg).grad, 1e-3});
    terms.push_back({"cooccurrence_fp",
                     [&](const ProbVolume& p) { return cooccurrence_fp_loss(p, a).value; },
                     cooccurrence_fp_loss(pred, a).grad, 1e-4});
    terms.push_back(
        {"cooccurrence_fn",
         [&](const ProbVolume& p) { return cooccurrence_fn_loss(p, gt1h, a, kp).value; },
         cooccurrence_fn_loss(pred, gt1h, a, kp).grad, 1e-4});

    bool ok = true;
    for (auto& t : terms) {
        GradCheckResult r = finite_difference_check(t.fn, pred, t.grad, 1e-5, 200, 1234);
        if (!(r.max_rel_error <= t.tol)) {
            std::cout << "  gradient mismatch in " << t.name << ": rel err " << r.max_rel_error
                      << " at index " << r.worst_index << std::endl;
            ok = false;
        }
    }
    double dt = now_s() - t0;
    if (dt >= 60.0) {
        std::cout << "  gradient suite took " << dt << " s (budget 60 s)" << std::endl;
        ok = false;
    }
    return ok;
}

bool criterion2_topology() {
    bool ok = true;
    PhantomSpec tube;
    tube.kind = PhantomKind::tube;
    tube.dims = {16, 9, 9};
    ok &= betti_numbers(make_phantom(tube).class_mask(1)) == BettiNumbers{1, 0, 0};
    PhantomSpec torus;
    torus.kind = PhantomKind::torus;
    torus.dims = {16, 16, 9};
    ok &= betti_numbers(make_phantom(torus).class_mask(1)) == BettiNumbers{1, 1, 0};
    PhantomSpec shell;
    shell.kind = PhantomKind::shell;
    shell.dims = {16, 16, 16};
    ok &= betti_numbers(make_phantom(shell).class_mask(1)) == BettiNumbers{1, 0, 1};

    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 500 && ok; ++trial) {
        Dims3 dm{int(2 + rng() % 5), int(2 + rng() % 5), int(2 + rng() % 5)};
        BinaryVolume m(dm, 0);
        for (std::int64_t i = 0; i < m.size(); ++i) m[i] = (rng() % 2) == 0;
        long chi = euler_characteristic(m);
        BettiNumbers b = betti_numbers(m);
        ok &= chi == chi_oracle(m);
        ok &= b.b0 == bfs_components(m, 26);
        ok &= b.b2 == cavities_oracle(m);
        ok &= b.b0 - b.b1 + b.b2 == chi;
        ok &= b.b1 >= 0;
        if (!ok) std::cout << "  topology mismatch at trial " << trial << std::endl;
    }
    return ok;
}

bool criterion3_distances() {
    bool ok = true;
    std::mt19937_64 rng(301);
    for (int trial = 0; trial < 100 && ok; ++trial) {
        Dims3 dm{int(3 + rng() % 6), int(3 + rng() % 6), int(3 + rng() % 6)};
        VoxelSpacing sp = (trial % 3 == 0) ? VoxelSpacing(0.5, 1.0, 2.0) : VoxelSpacing(1, 1, 1);
        BinaryVolume p(dm, 0), g(dm, 0);
        for (std::int64_t i = 0; i < p.size(); ++i) {
            p[i] = (rng() % 3) == 0;
            g[i] = (rng() % 3) == 0;
        }
        if (count_nonzero(p) == 0 || count_nonzero(g) == 0 ||
            count_nonzero(p) == p.size()) continue;
        ScalarField de = edt(p, sp), dor = edt_oracle(p, sp);
        for (std::int64_t i = 0; i < de.size(); ++i)
            if (std::abs(de[i] - dor[i]) > 1e-9) {
                std::cout << "  edt mismatch at trial " << trial << std::endl;
                ok = false;
                break;
            }
        if (ok && std::abs(*hd95(p, g, sp) - hd95_oracle(p, g, sp)) > 1e-9) {
            std::cout << "  hd95 mismatch at trial " << trial << std::endl;
            ok = false;
        }
    }
    // trivial overlap metrics
    BinaryVolume a(Dims3{4, 4, 4}, 0), e(Dims3{4, 4, 4}, 0);
    a(1, 1, 1) = a(2, 1, 1) = 1;
    ok &= *dice_metric(a, a) == 1.0;
    ok &= *dice_metric(a, e) == 0.0;
    ok &= !dice_metric(e, e).has_value();
    ok &= !cldice_metric(e, e).has_value();
    return ok;
}

bool criterion4_loss_behavior() {
    bool ok = true;
    ClassScheme scheme = default_cow_scheme();
    AdjacencyMatrix adj = default_cow_adjacency(scheme);

    // (a) zero co-occurrence FP on the clean graph; positive after a label swap
    //     puts two non-adjacent classes in contact
    PhantomSpec cow;
    cow.kind = PhantomKind::toy_cow;
    cow.dims = kToyCowMinDims;
    LabelVolume gt = make_phantom(cow);
    ProbVolume gt1h = one_hot(gt);
    double fp_clean = cooccurrence_fp_loss(gt1h, adj).value;
    if (fp_clean != 0.0) {
        std::cout << "  clean-phantom FP loss is " << fp_clean << std::endl;
        ok = false;
    }
    int z = gt.dims().d / 2;
    LabelVolume swapped = swap_labels(gt, {10, 13, z}, {10, 17, z}, scheme.id_of("L-ICA"),
                                      scheme.id_of("R-MCA"));
    double fp_swapped = cooccurrence_fp_loss(one_hot(swapped), adj).value;
    if (!(fp_swapped > 0.0)) {
        std::cout << "  swapped-label FP loss is " << fp_swapped << std::endl;
        ok = false;
    }

    // (b) breaks hurt the connectivity term more than equal-volume jitter
    PhantomSpec tspec;
    tspec.kind = PhantomKind::tube;
    tspec.dims = {20, 9, 9};
    LabelVolume tube = make_phantom(tspec);
    ProbVolume tube1h = one_hot(tube);
    LabelVolume broken = inject_break(tube, 1, 9, 1);
    std::int64_t removed =
        count_nonzero(tube.class_mask(1)) - count_nonzero(broken.class_mask(1));
    LossConfig cfg3;
    cfg3.skeleton_iterations = 3;
    double lb = breakage_cldice_loss(soften(broken), tube1h, cfg3).value;
    int wins = 0;
    for (int trial = 0; trial < 20; ++trial) {
        LabelVolume jit =
            jitter_boundary(tube, 1, int(removed), 9000 + std::uint64_t(trial) * 7);
        double lj = breakage_cldice_loss(soften(jit), tube1h, cfg3).value;
        if (lb > lj) ++wins;
    }
    if (wins < 19) {
        std::cout << "  break out-scored jitter in only " << wins << "/20 trials" << std::endl;
        ok = false;
    }

    // (c) weight-map extremes: thinnest radius -> e, thickest -> 1, background -> 1
    ScalarField radius(Dims3{3, 3, 1}, 0.0);
    radius(0, 0, 0) = 1.0;
    radius(2, 2, 0) = 3.0;
    ScalarField w = radius_weight_map(radius);
    ok &= w(0, 0, 0) == std::exp(1.0);
    ok &= w(2, 2, 0) == 1.0;
    ok &= w(1, 1, 0) == 1.0;

    // (d) lambdas at zero reduce the composite to CE + weighted Dice, and the
    //     uniform-thickness phantom gives a unit weight map
    ScalarField cow_w = radius_weight_map(compute_radius_map(gt, gt.spacing()));
    for (std::int64_t i = 0; i < cow_w.size(); ++i)
        if (cow_w[i] != 1.0) {
            std::cout << "  phantom weight map is not uniform" << std::endl;
            ok = false;
            break;
        }
    ProbVolume pred = soften(gt, 0.9);
    LossConfig zero;
    zero.lambda1 = 0.0;
    zero.lambda2 = 0.0;
    LossBreakdown bd = composite_loss(pred, gt, scheme, adj, zero);
    double expect = ce_loss(pred, gt).value + radius_dice_loss(gt1h, pred, cow_w).value;
    if (std::abs(bd.total - expect) > 1e-9) {
        std::cout << "  lambda-zero composite differs by " << std::abs(bd.total - expect)
                  << std::endl;
        ok = false;
    }
    return ok;
}

bool criterion5_composition() {
    const Dims3 d{6, 6, 6};
    const int C = 4;
    ClassScheme scheme({{"A", SizeGroup::large, Laterality::midline},
                        {"B", SizeGroup::medium, Laterality::left},
                        {"C", SizeGroup::small_, Laterality::right}});
    AdjacencyMatrix a(3);
    a.set_pair(0, 1);
    LabelVolume gt(d, VoxelSpacing(1, 1, 1), C);
    for (int x = 0; x < 6; ++x) gt(x, 2, 2) = x < 3 ? 1 : 2;
    gt(1, 4, 4) = 3;
    gt(2, 4, 4) = 3;
    ProbVolume pred = random_simplex(d, C, 515);

    LossConfig cfg;  // defaults: lambda1 = 0.5, lambda2 = 1.0
    LossBreakdown b = composite_loss(pred, gt, scheme, a, cfg);

    ProbVolume gt1h = one_hot(gt);
    ScalarField w = radius_weight_map(compute_radius_map(gt, gt.spacing()));
    BinaryVolume kp = keypoint_mask(gt, a, 1);
    TermResult ce = ce_loss(pred, gt, cfg.epsilon);
    TermResult dice = radius_dice_loss(gt1h, pred, w, cfg);
    TermResult cld = breakage_cldice_loss(pred, gt1h, cfg);
    TermResult fp = cooccurrence_fp_loss(pred, a, cfg);
    TermResult fn = cooccurrence_fn_loss(pred, gt1h, a, kp, cfg);

    double total = ce.value + dice.value + cfg.lambda1 * cld.value +
                   cfg.lambda2 * (fp.value + fn.value);
    bool ok = std::abs(b.total - total) <= 1e-9;
    for (std::int64_t i = 0; i < b.total_grad.size() && ok; ++i) {
        double g = ce.grad[i] + dice.grad[i] + cfg.lambda1 * cld.grad[i] +
                   cfg.lambda2 * (fp.grad[i] + fn.grad[i]);
        ok = std::abs(b.total_grad[i] - g) <= 1e-9;
    }
    if (!ok) std::cout << "  composite does not equal its weighted terms" << std::endl;
    return ok;
}

bool criterion6_statistics() {
    bool ok = true;
    MeasurementTable t(5, 3);
    double vals[5] = {0.8, 0.85, 0.9, 0.7, 0.95};
    for (int s = 0; s < 5; ++s)
        for (int k = 0; k < 3; ++k) t(s, k) = vals[s];
    ok &= std::abs(icc_3_1(t) - 1.0) <= 1e-12;

    std::vector<double> a{1.0, 1.2, 0.9, 1.1};
    std::vector<double> b{2.0, 2.1, 1.9, 2.2};
    PermutationTestResult r1 = permutation_t_test(a, b, 3000, 77);
    PermutationTestResult r2 = permutation_t_test(a, b, 3000, 77);
    ok &= r1.p == r2.p && r1.t_observed == r2.t_observed;
    ok &= r1.p < 0.05;

    std::vector<double> adj = bh_fdr({0.01, 0.02, 0.03, 0.04});
    for (double v : adj) ok &= std::abs(v - 0.04) <= 1e-12;
    if (!ok) std::cout << "  statistics checks failed" << std::endl;
    return ok;
}

bool criterion7_cli(const std::string& cli) {
    const double t0 = now_s();
    fs::path work = fs::temp_directory_path() / "vt_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work / "gt");
    fs::create_directories(work / "pred");

    auto run = [&](const std::string& args) {
        std::string cmd = "\"" + cli + "\" " + args;
        int rc = std::system(cmd.c_str());
        if (rc != 0) std::cout << "  command failed (" << rc << "): " << cmd << std::endl;
        return rc == 0;
    };

    std::string gt_file = (work / "gt" / "case01.nii.gz").string();
    std::string pred_file = (work / "pred" / "case01.nii.gz").string();
    std::string report = (work / "report.csv").string();
    std::string summary = (work / "summary.csv").string();
    std::string fpr_json = (work / "fpr.json").string();

    bool ok = run("phantom --kind toy_cow --out \"" + gt_file + "\"");
    ok = ok && run("phantom --kind toy_cow --variant no-pcom-left --out \"" + pred_file + "\"");
    ok = ok && run("metrics --pred \"" + (work / "pred").string() + "\" --gt \"" +
                   (work / "gt").string() + "\" --out \"" + report + "\" --summary \"" +
                   summary + "\" > \"" + fpr_json + "\"");

    if (ok) {
        std::ifstream f(report);
        std::string line;
        std::getline(f, line);
        ok = line == "case_id,class,dice,cldice,hd95_mm,b0_error,b_error,gt_present,pred_present";
        bool saw_missing = false, saw_intact = false;
        int rows = 0;
        while (std::getline(f, line)) {
            ++rows;
            if (line.rfind("case01,L-Pcom,", 0) == 0)
                saw_missing = line == "case01,L-Pcom,0,0,,1,1,1,0";
            if (line.rfind("case01,BA,", 0) == 0)
                saw_intact = line.find(",1,1,0,") != std::string::npos;
        }
        ok = ok && rows == 20 && saw_missing && saw_intact;
        if (!ok) std::cout << "  report content check failed" << std::endl;
        ok = ok && fs::exists(summary);
    }

    double dt = now_s() - t0;
    if (dt >= 120.0) {
        std::cout << "  pipeline took " << dt << " s (budget 120 s)" << std::endl;
        ok = false;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-cli-binary>" << std::endl;
        return 2;
    }
    report(1, "analytic gradients match finite differences for all five terms",
           criterion1_gradients());
    report(2, "Betti numbers agree with flood-fill and cell-enumeration oracles",
           criterion2_topology());
    report(3, "distance transforms and surface metrics match brute-force oracles",
           criterion3_distances());
    report(4, "loss terms respond to breaks, contacts, and vessel thickness as designed",
           criterion4_loss_behavior());
    report(5, "composite loss equals the weighted sum of its terms", criterion5_composition());
    report(6, "reliability statistics are exact and reproducible", criterion6_statistics());
    report(7, "end-to-end phantom/metrics pipeline via the command line",
           criterion7_cli(argv[1]));
    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all criteria passed" << std::endl;
    return 0;
}
