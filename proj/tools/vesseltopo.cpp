// Command-line front end: cohort metrics, loss evaluation, gradient checking,
// phantom generation, diameter tables, and cohort statistics.

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vesseltopo/adjacency.hpp"
#include "vesseltopo/analysis.hpp"
#include "vesseltopo/losses.hpp"
#include "vesseltopo/metrics.hpp"
#include "vesseltopo/nifti.hpp"
#include "vesseltopo/phantom.hpp"
#include "vesseltopo/scheme.hpp"
#include "vesseltopo/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SharedConfig {
    std::string scheme_path, adjacency_path, loss_config_path;

    vt::ClassScheme scheme() const {
        return scheme_path.empty() ? vt::default_cow_scheme() : vt::load_scheme(scheme_path);
    }
    vt::AdjacencyMatrix adjacency(const vt::ClassScheme& s) const {
        return adjacency_path.empty() ? vt::default_cow_adjacency(s)
                                      : vt::load_adjacency(adjacency_path, s);
    }
    vt::LossConfig loss_config() const {
        return loss_config_path.empty() ? vt::LossConfig{} : vt::load_loss_config(loss_config_path);
    }
};

std::string volume_stem(const fs::path& p) {
    std::string name = p.filename().string();
    for (const char* ext : {".nii.gz", ".nii", ".raw"}) {
        size_t n = std::strlen(ext);
        if (name.size() > n && name.compare(name.size() - n, n, ext) == 0)
            return name.substr(0, name.size() - n);
    }
    return "";
}

std::map<std::string, fs::path> scan_volume_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string stem = volume_stem(e.path());
        if (stem.empty()) continue;
        if (!out.emplace(stem, e.path()).second)
            throw std::runtime_error("duplicate case stem in " + dir + ": " + stem);
    }
    return out;
}

vt::LabelVolume read_labels(const std::string& path, int num_classes) {
    vt::VolumeData v = vt::read_volume(path, num_classes);
    if (!v.is_labels) throw std::runtime_error(path + ": expected a label volume");
    return std::move(v.labels);
}

int cmd_metrics(const SharedConfig& shared, const std::string& pred_dir,
                const std::string& gt_dir, const std::string& out_csv,
                const std::string& summary_csv, long fpr_threshold) {
    vt::ClassScheme scheme = shared.scheme();
    auto preds = scan_volume_dir(pred_dir);
    auto gts = scan_volume_dir(gt_dir);

    std::vector<std::string> unmatched;
    for (const auto& [stem, p] : preds)
        if (!gts.count(stem)) unmatched.push_back(stem + " (prediction only)");
    for (const auto& [stem, p] : gts)
        if (!preds.count(stem)) unmatched.push_back(stem + " (ground truth only)");
    if (!unmatched.empty()) {
        std::cerr << "unmatched case stems:\n";
        for (const auto& s : unmatched) std::cerr << "  " << s << "\n";
        return 1;
    }
    if (preds.empty()) {
        std::cerr << "no volume files found in " << pred_dir << "\n";
        return 1;
    }

    vt::CohortReport report;
    std::vector<vt::LabelVolume> pred_store, gt_store;
    pred_store.reserve(preds.size());
    gt_store.reserve(preds.size());
    for (const auto& [stem, ppath] : preds) {
        vt::LabelVolume pred = read_labels(ppath.string(), scheme.num_classes());
        vt::LabelVolume gt = read_labels(gts.at(stem).string(), scheme.num_classes());
        if (!(pred.dims() == gt.dims()))
            throw std::runtime_error("case " + stem + ": pred/gt dimension mismatch");
        report.cases.push_back(vt::case_metrics(pred, gt, scheme, gt.spacing(), stem));
        pred_store.push_back(std::move(pred));
        gt_store.push_back(std::move(gt));
    }

    std::vector<std::pair<const vt::LabelVolume*, const vt::LabelVolume*>> cohort;
    for (size_t i = 0; i < pred_store.size(); ++i)
        cohort.emplace_back(&pred_store[i], &gt_store[i]);
    for (int id = 1; id < scheme.num_classes(); ++id)
        report.fpr_by_class[id] = vt::absent_artery_fpr(cohort, id, fpr_threshold);

    vt::write_report_csv(report, scheme, out_csv);
    if (!summary_csv.empty()) vt::write_summary_csv(report, scheme, summary_csv);

    json fpr = json::object();
    for (const auto& [id, v] : report.fpr_by_class)
        fpr[scheme.name(id)] = v ? json(*v) : json();
    std::cout << json{{"cases", report.cases.size()}, {"absent_artery_fpr", fpr}}.dump(2)
              << "\n";
    return 0;
}

int cmd_loss(const SharedConfig& shared, const std::string& pred_path,
             const std::string& gt_path, const std::string& grad_path) {
    vt::ClassScheme scheme = shared.scheme();
    vt::AdjacencyMatrix a = shared.adjacency(scheme);
    vt::LossConfig cfg = shared.loss_config();

    vt::LabelVolume gt = read_labels(gt_path, scheme.num_classes());
    vt::VolumeData pv = vt::read_volume(pred_path, scheme.num_classes());
    vt::ProbVolume pred;
    if (pv.is_labels) {
        if (!(pv.labels.dims() == gt.dims()))
            throw std::runtime_error("pred/gt dimension mismatch");
        pred = vt::one_hot(pv.labels);
    } else {
        pred = std::move(pv.probs);
        if (pred.channels() == 1)
            throw std::runtime_error(pred_path + ": probability volume needs one channel per class");
    }
    vt::LossBreakdown b = vt::composite_loss(pred, gt, scheme, a, cfg);

    json out{{"total", b.total},
             {"ce", b.ce.value},
             {"dice_weighted", b.dice_weighted.value},
             {"neighbors_cldice", b.neighbors_cldice.value},
             {"cooccurrence_fp", b.cooccurrence_fp.value},
             {"cooccurrence_fn", b.cooccurrence_fn.value},
             {"lambda1", cfg.lambda1},
             {"lambda2", cfg.lambda2}};
    std::cout << out.dump(2) << "\n";
    if (!grad_path.empty()) vt::write_channels(b.total_grad, gt.spacing(), grad_path);
    return 0;
}

// Random voxelwise simplex bounded away from the CE clamp, plus random labels.
void random_case(int size, int classes, std::uint64_t seed, vt::ProbVolume& pred,
                 vt::LabelVolume& gt) {
    vt::Dims3 d{size, size, size};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    pred = vt::ProbVolume(classes, d, 0.0);
    for (std::int64_t v = 0; v < pred.voxels(); ++v) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            double u = -std::log(1.0 - uni(rng)) + 0.1;
            pred.at(c, v) = u;
            sum += u;
        }
        for (int c = 0; c < classes; ++c) pred.at(c, v) /= sum;
    }
    gt = vt::LabelVolume(d, vt::VoxelSpacing(1, 1, 1), classes);
    for (std::int64_t v = 0; v < gt.voxels(); ++v)
        gt[v] = std::uint16_t(rng() % std::uint64_t(classes));
    // guarantee a nonempty foreground for the radius map
    gt[0] = 1;
}

int cmd_gradcheck(std::uint64_t seed, int size, int classes, int samples) {
    if (size < 3 || classes < 2) {
        std::cerr << "gradcheck: need --size >= 3 and --classes >= 2\n";
        return 1;
    }
    vt::ProbVolume pred;
    vt::LabelVolume gt;
    random_case(size, classes, seed, pred, gt);
    vt::ProbVolume gt1h = vt::one_hot(gt);
    vt::ScalarField weight = vt::radius_weight_map(vt::compute_radius_map(gt, gt.spacing()));
    vt::AdjacencyMatrix a(classes - 1);
    if (classes >= 4) a.set_pair(0, 1);  // leave at least one non-adjacent pair
    vt::BinaryVolume kp = vt::keypoint_mask(gt, a, 1);
    vt::LossConfig cfg;
    cfg.skeleton_iterations = 2;

    struct Term {
        const char* name;
        double tol;
        std::function<double(const vt::ProbVolume&)> value;
        vt::Channels<double> grad;
    };
    std::vector<Term> terms;
    terms.push_back({"ce", 1e-4,
                     [&](const vt::ProbVolume& p) { return vt::ce_loss(p, gt, cfg.epsilon).value; },
                     vt::ce_loss(pred, gt, cfg.epsilon).grad});
    terms.push_back({"radius_dice", 1e-4,
                     [&](const vt::ProbVolume& p) {
                         return vt::radius_dice_loss(gt1h, p, weight, cfg).value;
                     },
                     vt::radius_dice_loss(gt1h, pred, weight, cfg).grad});
    terms.push_back({"breakage_cldice", 1e-3,
                     [&](const vt::ProbVolume& p) {
                         return vt::breakage_cldice_loss(p, gt1h, cfg).value;
                     },
                     vt::breakage_cldice_loss(pred, gt1h, cfg).grad});
    terms.push_back({"cooccurrence_fp", 1e-4,
                     [&](const vt::ProbVolume& p) { return vt::cooccurrence_fp_loss(p, a, cfg).value; },
                     vt::cooccurrence_fp_loss(pred, a, cfg).grad});
    terms.push_back({"cooccurrence_fn", 1e-4,
                     [&](const vt::ProbVolume& p) {
                         return vt::cooccurrence_fn_loss(p, gt1h, a, kp, cfg).value;
                     },
                     vt::cooccurrence_fn_loss(pred, gt1h, a, kp, cfg).grad});

    bool ok = true;
    for (auto& t : terms) {
        vt::GradCheckResult r =
            vt::finite_difference_check(t.value, pred, t.grad, 1e-5, samples, seed + 17);
        bool pass = r.max_rel_error < t.tol;
        ok = ok && pass;
        std::cout << t.name << ": max_rel_error " << r.max_rel_error << " (tol " << t.tol
                  << ") " << (pass ? "OK" : "FAIL") << "\n";
    }
    return ok ? 0 : 1;
}

int cmd_phantom(const std::string& kind, const std::string& out_path,
                const std::vector<std::string>& variants, std::uint64_t seed,
                std::vector<int> dims, std::vector<double> spacing, int radius) {
    vt::PhantomSpec spec;
    if (kind == "tube") spec.kind = vt::PhantomKind::tube;
    else if (kind == "torus") spec.kind = vt::PhantomKind::torus;
    else if (kind == "shell") spec.kind = vt::PhantomKind::shell;
    else if (kind == "toy_cow") spec.kind = vt::PhantomKind::toy_cow;
    else {
        std::cerr << "unknown phantom kind: " << kind << "\n";
        return 1;
    }
    spec.rng_seed = seed;
    spec.radius_voxels = radius;
    spec.absent = variants;
    if (spec.kind == vt::PhantomKind::toy_cow) spec.dims = vt::kToyCowMinDims;
    if (!dims.empty()) spec.dims = {dims[0], dims[1], dims[2]};
    if (!spacing.empty()) spec.spacing = vt::VoxelSpacing(spacing[0], spacing[1], spacing[2]);
    vt::write_volume(vt::make_phantom(spec), out_path);
    return 0;
}

int cmd_diameters(const SharedConfig& shared, const std::string& seg_path,
                  const std::string& out_csv) {
    vt::ClassScheme scheme = shared.scheme();
    vt::LabelVolume seg = read_labels(seg_path, scheme.num_classes());
    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("cannot write " + out_csv);
    f << "class,mean_diameter_mm\n";
    for (int id = 1; id < scheme.num_classes(); ++id) {
        auto dm = vt::mean_diameter(seg, id, seg.spacing());
        f << scheme.name(id) << ',';
        if (dm) f << std::setprecision(9) << *dm;
        f << '\n';
    }
    return 0;
}

// Numeric CSV helpers; a non-numeric first line is treated as a header.
bool numeric_token(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

double parse_cell(const std::string& s, size_t row, size_t col) {
    if (!numeric_token(s))
        throw std::runtime_error("non-numeric value \"" + s + "\" at row " +
                                 std::to_string(row + 1) + ", column " + std::to_string(col + 1));
    return std::strtod(s.c_str(), nullptr);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_stats(const std::string& mode, const std::string& in_csv, const std::string& out_json,
              int iterations, std::uint64_t seed) {
    auto rows = read_csv(in_csv);
    if (rows.empty()) throw std::runtime_error(in_csv + ": empty table");
    json out;
    if (mode == "icc") {
        // rows = subjects, columns = repeated scans
        size_t start = numeric_token(rows[0][0]) ? 0 : 1;
        if (rows.size() - start < 2 || rows[start].size() < 2)
            throw std::runtime_error("icc: need >= 2 subjects and >= 2 scans");
        vt::MeasurementTable t(int(rows.size() - start), int(rows[start].size()));
        for (size_t r = start; r < rows.size(); ++r) {
            if (rows[r].size() != rows[start].size())
                throw std::runtime_error("icc: ragged table");
            for (size_t c = 0; c < rows[r].size(); ++c)
                t(int(r - start), int(c)) = parse_cell(rows[r][c], r, c);
        }
        out = {{"icc_3_1", vt::icc_3_1(t)},
               {"subjects", t.n_subjects},
               {"scans", t.n_scans}};
    } else if (mode == "permtest") {
        // columns: group label, value
        std::map<std::string, std::vector<double>> groups;
        size_t start = rows[0].size() == 2 && numeric_token(rows[0][1]) ? 0 : 1;
        for (size_t r = start; r < rows.size(); ++r) {
            if (rows[r].size() != 2) throw std::runtime_error("permtest: need group,value rows");
            groups[rows[r][0]].push_back(parse_cell(rows[r][1], r, 1));
        }
        if (groups.size() != 2) throw std::runtime_error("permtest: need exactly two groups");
        auto it = groups.begin();
        const auto& [ga, va] = *it;
        const auto& [gb, vb] = *std::next(it);
        vt::PermutationTestResult r = vt::permutation_t_test(va, vb, iterations, seed);
        out = {{"group_a", ga},    {"group_b", gb},     {"t_observed", r.t_observed},
               {"p_value", r.p},   {"iterations", iterations}, {"seed", seed}};
    } else if (mode == "fdr") {
        std::vector<double> p;
        size_t start = numeric_token(rows[0][0]) ? 0 : 1;
        for (size_t r = start; r < rows.size(); ++r) p.push_back(parse_cell(rows[r][0], r, 0));
        out = {{"p_raw", p}, {"p_adjusted", vt::bh_fdr(p)}};
    } else {
        std::cerr << "unknown stats mode: " << mode << "\n";
        return 1;
    }
    if (out_json.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::ofstream f(out_json);
        if (!f) throw std::runtime_error("cannot write " + out_json);
        f << out.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"topology-aware vascular segmentation toolkit"};
    app.require_subcommand(1);

    SharedConfig shared;
    app.add_option("--scheme", shared.scheme_path, "class scheme JSON (default: built-in CoW)");
    app.add_option("--adjacency", shared.adjacency_path,
                   "adjacency JSON (default: built-in CoW pairs)");
    app.add_option("--loss-config", shared.loss_config_path, "loss hyperparameter JSON");

    auto* metrics = app.add_subcommand("metrics", "per-case metric report over paired volumes");
    std::string pred_dir, gt_dir, out_csv, summary_csv;
    long fpr_threshold = 1;
    metrics->add_option("--pred", pred_dir, "directory of predicted label volumes")->required();
    metrics->add_option("--gt", gt_dir, "directory of ground-truth label volumes")->required();
    metrics->add_option("--out", out_csv, "output report CSV")->required();
    metrics->add_option("--summary", summary_csv, "optional per-size-group summary CSV");
    metrics->add_option("--fpr-threshold", fpr_threshold,
                        "voxel count that counts as a hallucinated artery");

    auto* loss = app.add_subcommand("loss", "composite loss breakdown for one case");
    std::string pred_path, gt_path, grad_path;
    loss->add_option("--pred", pred_path, "prediction (labels or probability volume)")->required();
    loss->add_option("--gt", gt_path, "ground-truth label volume")->required();
    loss->add_option("--grad", grad_path, "optional total-gradient output volume");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::uint64_t gc_seed = 0;
    int gc_size = 6, gc_classes = 4, gc_samples = 200;
    gradcheck->add_option("--seed", gc_seed, "RNG seed");
    gradcheck->add_option("--size", gc_size, "cubic volume edge length");
    gradcheck->add_option("--classes", gc_classes, "class count including background");
    gradcheck->add_option("--samples", gc_samples, "sampled coordinates per term");

    auto* phantom = app.add_subcommand("phantom", "write a synthetic phantom volume");
    std::string ph_kind = "toy_cow", ph_out;
    std::vector<std::string> ph_variants;
    std::vector<int> ph_dims;
    std::vector<double> ph_spacing;
    std::uint64_t ph_seed = 0;
    int ph_radius = 2;
    phantom->add_option("--kind", ph_kind, "tube | torus | shell | toy_cow");
    phantom->add_option("--out", ph_out, "output volume path")->required();
    phantom->add_option("--variant", ph_variants, "absent-structure flags, e.g. no-pcom-left");
    phantom->add_option("--seed", ph_seed, "RNG seed");
    phantom->add_option("--dims", ph_dims, "H W D")->expected(3);
    phantom->add_option("--spacing", ph_spacing, "dx dy dz in mm")->expected(3);
    phantom->add_option("--radius", ph_radius, "structure radius/thickness in voxels");

    auto* diameters = app.add_subcommand("diameters", "per-class mean diameter table");
    std::string dia_seg, dia_out;
    diameters->add_option("--seg", dia_seg, "label volume")->required();
    diameters->add_option("--out", dia_out, "output CSV")->required();

    auto* stats = app.add_subcommand("stats", "cohort statistics (icc | permtest | fdr)");
    std::string st_mode, st_in, st_out;
    int st_iter = 10000;
    std::uint64_t st_seed = 0;
    stats->add_option("mode", st_mode, "icc | permtest | fdr")->required();
    stats->add_option("--in", st_in, "input CSV")->required();
    stats->add_option("--out", st_out, "output JSON (default: stdout)");
    stats->add_option("--iterations", st_iter, "permutation count");
    stats->add_option("--seed", st_seed, "RNG seed");

    try {
        app.parse(argc, argv);
        if (metrics->parsed())
            return cmd_metrics(shared, pred_dir, gt_dir, out_csv, summary_csv, fpr_threshold);
        if (loss->parsed()) return cmd_loss(shared, pred_path, gt_path, grad_path);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_size, gc_classes, gc_samples);
        if (phantom->parsed())
            return cmd_phantom(ph_kind, ph_out, ph_variants, ph_seed, ph_dims, ph_spacing,
                               ph_radius);
        if (diameters->parsed()) return cmd_diameters(shared, dia_seg, dia_out);
        if (stats->parsed()) return cmd_stats(st_mode, st_in, st_out, st_iter, st_seed);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        // input validation failures (invalid_argument is-a logic_error, so it
        // must be caught before the internal-invariant handler)
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
