#pragma once

// Evaluation metrics: per-class Dice, centerline Dice, HD95, Betti errors,
// absent-artery false positive rate, mean arterial diameter, SNR, and the
// case/cohort report plumbing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vesseltopo/morphology.hpp"
#include "vesseltopo/scheme.hpp"
#include "vesseltopo/topology.hpp"
#include "vesseltopo/volume.hpp"

namespace vt {

// 2|P∩G| / (|P|+|G|). Both empty: undefined; one empty: 0.
inline std::optional<double> dice_metric(const BinaryVolume& pred, const BinaryVolume& gt) {
    if (!(pred.dims() == gt.dims())) throw std::invalid_argument("dice_metric: shape mismatch");
    std::int64_t inter = 0, np = 0, ng = 0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] != 0, g = gt[i] != 0;
        inter += p && g;
        np += p;
        ng += g;
    }
    if (np == 0 && ng == 0) return std::nullopt;
    return 2.0 * double(inter) / double(np + ng);
}

// Harmonic mean of centerline precision and sensitivity over hard skeletons.
inline std::optional<double> cldice_metric(const BinaryVolume& pred, const BinaryVolume& gt) {
    if (!(pred.dims() == gt.dims())) throw std::invalid_argument("cldice_metric: shape mismatch");
    std::int64_t np = count_nonzero(pred), ng = count_nonzero(gt);
    if (np == 0 && ng == 0) return std::nullopt;
    if (np == 0 || ng == 0) return 0.0;
    BinaryVolume sp = hard_skeleton(pred);
    BinaryVolume sg = hard_skeleton(gt);
    std::int64_t nsp = count_nonzero(sp), nsg = count_nonzero(sg);
    if (nsp == 0 || nsg == 0) return 0.0;
    std::int64_t prec_hits = 0, sens_hits = 0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        prec_hits += sp[i] && gt[i];
        sens_hits += sg[i] && pred[i];
    }
    double tprec = double(prec_hits) / double(nsp);
    double tsens = double(sens_hits) / double(nsg);
    if (tprec + tsens == 0.0) return 0.0;
    return 2.0 * tprec * tsens / (tprec + tsens);
}

namespace detail {

// Foreground voxels with a face-adjacent background voxel; outside the volume
// counts as background.
inline BinaryVolume surface_voxels(const BinaryVolume& mask) {
    const Dims3 d = mask.dims();
    BinaryVolume s(d, 0);
    static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                  {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (!mask(x, y, z)) continue;
                for (const auto& o : off) {
                    int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                    if (!mask.in_bounds(xx, yy, zz) || !mask(xx, yy, zz)) {
                        s(x, y, z) = 1;
                        break;
                    }
                }
            }
    return s;
}

// q-th percentile with linear interpolation over a sorted copy.
inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double h = q * double(v.size() - 1);
    size_t lo = size_t(std::floor(h));
    size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// 95th percentile of pooled bidirectional surface distances, in mm.
inline std::optional<double> hd95(const BinaryVolume& pred, const BinaryVolume& gt,
                                  const VoxelSpacing& spacing) {
    if (!(pred.dims() == gt.dims())) throw std::invalid_argument("hd95: shape mismatch");
    if (count_nonzero(pred) == 0 || count_nonzero(gt) == 0) return std::nullopt;
    BinaryVolume sp = detail::surface_voxels(pred);
    BinaryVolume sg = detail::surface_voxels(gt);
    ScalarField d2_to_g = squared_distance_to_sites(sg, spacing);
    ScalarField d2_to_p = squared_distance_to_sites(sp, spacing);
    std::vector<double> pooled;
    for (std::int64_t i = 0; i < sp.size(); ++i) {
        if (sp[i]) pooled.push_back(std::sqrt(d2_to_g[i]));
        if (sg[i]) pooled.push_back(std::sqrt(d2_to_p[i]));
    }
    return detail::percentile(std::move(pooled), 0.95);
}

struct ClassMetrics {
    std::optional<double> dice;
    std::optional<double> cldice;
    std::optional<double> hd95_mm;
    long b0_error = 0;
    long b_error = 0;
    bool gt_present = false;
    bool pred_present = false;
    bool missing_structure = false;  // exactly one side empty: hd95 undefined

    bool defined() const { return gt_present || pred_present; }
};

struct GroupSummary {
    int count = 0;  // classes with defined metrics
    double dice_mean = 0, dice_sd = 0;
    double cldice_mean = 0, cldice_sd = 0;
    double hd95_mean = 0, hd95_sd = 0;
    double b0_mean = 0, b_mean = 0;
};

struct CaseMetrics {
    std::string case_id;
    std::vector<ClassMetrics> per_class;  // index 0 = class id 1

    const ClassMetrics& cls(int id) const { return per_class.at(size_t(id) - 1); }
};

namespace detail {

inline void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= double(v.size());
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(sd / double(v.size() - 1)) : 0.0;
}

}  // namespace detail

inline GroupSummary summarize(const CaseMetrics& cm, const ClassScheme& scheme,
                              std::optional<SizeGroup> group = std::nullopt) {
    std::vector<double> dices, cldices, hds, b0s, bs;
    for (int id = 1; id < scheme.num_classes(); ++id) {
        if (group && scheme.size_group(id) != *group) continue;
        const ClassMetrics& m = cm.cls(id);
        if (!m.defined()) continue;
        if (m.dice) dices.push_back(*m.dice);
        if (m.cldice) cldices.push_back(*m.cldice);
        if (m.hd95_mm) hds.push_back(*m.hd95_mm);
        b0s.push_back(double(m.b0_error));
        bs.push_back(double(m.b_error));
    }
    GroupSummary s;
    s.count = int(b0s.size());
    detail::mean_sd(dices, s.dice_mean, s.dice_sd);
    detail::mean_sd(cldices, s.cldice_mean, s.cldice_sd);
    detail::mean_sd(hds, s.hd95_mean, s.hd95_sd);
    double dummy;
    detail::mean_sd(b0s, s.b0_mean, dummy);
    detail::mean_sd(bs, s.b_mean, dummy);
    return s;
}

inline CaseMetrics case_metrics(const LabelVolume& pred, const LabelVolume& gt,
                                const ClassScheme& scheme, const VoxelSpacing& spacing,
                                const std::string& case_id = "") {
    if (!(pred.dims() == gt.dims()))
        throw std::invalid_argument("case_metrics: shape mismatch");
    if (pred.num_classes() != scheme.num_classes() || gt.num_classes() != scheme.num_classes())
        throw std::invalid_argument("case_metrics: scheme mismatch");
    CaseMetrics cm;
    cm.case_id = case_id;
    for (int id = 1; id < scheme.num_classes(); ++id) {
        BinaryVolume pm = pred.class_mask(id);
        BinaryVolume gm = gt.class_mask(id);
        ClassMetrics m;
        m.pred_present = count_nonzero(pm) > 0;
        m.gt_present = count_nonzero(gm) > 0;
        if (m.defined()) {
            m.dice = dice_metric(pm, gm);
            m.cldice = cldice_metric(pm, gm);
            m.hd95_mm = hd95(pm, gm, spacing);
            m.missing_structure = m.pred_present != m.gt_present;
            BettiErrors be = betti_errors(pm, gm);
            m.b0_error = be.b0_error;
            m.b_error = be.b_error;
        }
        cm.per_class.push_back(m);
    }
    return cm;
}

// Fraction of gt-absent cases where the prediction contains >= min_voxels of
// the class. Undefined when no case lacks the class.
inline std::optional<double> absent_artery_fpr(
    const std::vector<std::pair<const LabelVolume*, const LabelVolume*>>& cohort,  // (pred, gt)
    int class_id, std::int64_t min_voxels = 1) {
    if (cohort.empty()) throw std::invalid_argument("absent_artery_fpr: empty cohort");
    std::int64_t absent = 0, hallucinated = 0;
    for (const auto& [pred, gt] : cohort) {
        if (count_nonzero(gt->class_mask(class_id)) > 0) continue;
        ++absent;
        if (count_nonzero(pred->class_mask(class_id)) >= min_voxels) ++hallucinated;
    }
    if (absent == 0) return std::nullopt;
    return double(hallucinated) / double(absent);
}

// Twice the mean centerline EDT value of the class mask, in mm.
inline std::optional<double> mean_diameter(const LabelVolume& seg, int class_id,
                                           const VoxelSpacing& spacing) {
    BinaryVolume m = seg.class_mask(class_id);
    if (count_nonzero(m) == 0) return std::nullopt;
    BinaryVolume skel = hard_skeleton(m);
    ScalarField d = edt(m, spacing);
    double sum = 0.0;
    std::int64_t cnt = 0;
    for (std::int64_t i = 0; i < m.size(); ++i)
        if (skel[i]) {
            sum += d[i];
            ++cnt;
        }
    if (cnt == 0) return std::nullopt;
    return 2.0 * sum / double(cnt);
}

// mean(foreground) / sd(background); undefined when the background is constant.
inline std::optional<double> snr_estimate(const ScalarField& image, const BinaryVolume& fg) {
    if (!(image.dims() == fg.dims())) throw std::invalid_argument("snr_estimate: shape mismatch");
    double fsum = 0.0, bsum = 0.0;
    std::int64_t nf = 0, nb = 0;
    for (std::int64_t i = 0; i < image.size(); ++i) {
        if (fg[i]) {
            fsum += image[i];
            ++nf;
        } else {
            bsum += image[i];
            ++nb;
        }
    }
    if (nf == 0 || nb == 0)
        throw std::invalid_argument("snr_estimate: foreground must be nonempty and not full");
    double bmean = bsum / double(nb);
    double bvar = 0.0;
    for (std::int64_t i = 0; i < image.size(); ++i)
        if (!fg[i]) bvar += (image[i] - bmean) * (image[i] - bmean);
    double bsd = std::sqrt(bvar / double(nb));
    if (bsd == 0.0) return std::nullopt;
    return (fsum / double(nf)) / bsd;
}

// ---------------------------------------------------------------------------
// Cohort report and serialization.
// ---------------------------------------------------------------------------

struct CohortReport {
    std::vector<CaseMetrics> cases;  // ordered by case id
    std::map<int, std::optional<double>> fpr_by_class;
};

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::setprecision(9) << *v;
    return os.str();
}

}  // namespace detail

inline void write_report_csv(const CohortReport& r, const ClassScheme& scheme,
                             const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report: " + path);
    f << "case_id,class,dice,cldice,hd95_mm,b0_error,b_error,gt_present,pred_present\n";
    for (const auto& cm : r.cases)
        for (int id = 1; id < scheme.num_classes(); ++id) {
            const ClassMetrics& m = cm.cls(id);
            f << cm.case_id << ',' << scheme.name(id) << ',' << detail::fmt_opt(m.dice) << ','
              << detail::fmt_opt(m.cldice) << ',' << detail::fmt_opt(m.hd95_mm) << ','
              << (m.defined() ? std::to_string(m.b0_error) : std::string()) << ','
              << (m.defined() ? std::to_string(m.b_error) : std::string()) << ','
              << (m.gt_present ? 1 : 0) << ',' << (m.pred_present ? 1 : 0) << '\n';
        }
}

inline void write_summary_csv(const CohortReport& r, const ClassScheme& scheme,
                              const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write summary: " + path);
    f << "group,cases,dice_mean,dice_sd,cldice_mean,cldice_sd,hd95_mean,hd95_sd,b0_mean,b_mean\n";
    auto emit = [&](const std::string& label, std::optional<SizeGroup> g) {
        std::vector<double> dice, cld, hd, b0, be;
        for (const auto& cm : r.cases) {
            GroupSummary s = summarize(cm, scheme, g);
            if (s.count == 0) continue;
            dice.push_back(s.dice_mean);
            cld.push_back(s.cldice_mean);
            hd.push_back(s.hd95_mean);
            b0.push_back(s.b0_mean);
            be.push_back(s.b_mean);
        }
        double m, sd, dummy;
        f << label << ',' << dice.size();
        detail::mean_sd(dice, m, sd);
        f << ',' << std::setprecision(9) << m << ',' << sd;
        detail::mean_sd(cld, m, sd);
        f << ',' << m << ',' << sd;
        detail::mean_sd(hd, m, sd);
        f << ',' << m << ',' << sd;
        detail::mean_sd(b0, m, dummy);
        f << ',' << m;
        detail::mean_sd(be, m, dummy);
        f << ',' << m << '\n';
    };
    emit("large", SizeGroup::large);
    emit("medium", SizeGroup::medium);
    emit("small", SizeGroup::small_);
    emit("all", std::nullopt);
}

inline nlohmann::json report_to_json(const CohortReport& r, const ClassScheme& scheme) {
    nlohmann::json cases = nlohmann::json::array();
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json();
    };
    for (const auto& cm : r.cases) {
        nlohmann::json classes = nlohmann::json::array();
        for (int id = 1; id < scheme.num_classes(); ++id) {
            const ClassMetrics& m = cm.cls(id);
            classes.push_back({{"class", scheme.name(id)},
                               {"dice", opt(m.dice)},
                               {"cldice", opt(m.cldice)},
                               {"hd95_mm", opt(m.hd95_mm)},
                               {"b0_error", m.defined() ? nlohmann::json(m.b0_error) : nlohmann::json()},
                               {"b_error", m.defined() ? nlohmann::json(m.b_error) : nlohmann::json()},
                               {"gt_present", m.gt_present},
                               {"pred_present", m.pred_present}});
        }
        cases.push_back({{"case_id", cm.case_id}, {"classes", classes}});
    }
    nlohmann::json fpr = nlohmann::json::object();
    for (const auto& [id, v] : r.fpr_by_class) fpr[scheme.name(id)] = opt(v);
    return {{"cases", cases}, {"absent_artery_fpr", fpr}};
}

}  // namespace vt
