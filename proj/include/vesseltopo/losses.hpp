#pragma once

// Forward values and analytic gradients for the composite topology-aware
// segmentation objective: cross-entropy, radius-weighted Dice, breakage-aware
// centerline Dice, and the adjacency-gated co-occurrence penalties, plus a
// finite-difference gradient checker.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vesseltopo/adjacency.hpp"
#include "vesseltopo/morphology.hpp"
#include "vesseltopo/volume.hpp"

namespace vt {

struct LossConfig {
    double lambda1 = 0.5;
    double lambda2 = 1.0;
    double epsilon = 1e-5;
    int skeleton_iterations = 5;
    bool occurrence_normalization = true;  // divide 3x3x3 occurrence sums by 27
    bool include_background_in_dice = false;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0)
            throw std::invalid_argument("LossConfig: lambda1/lambda2 must be >= 0");
        if (!(epsilon > 0)) throw std::invalid_argument("LossConfig: epsilon must be > 0");
        if (skeleton_iterations < 1)
            throw std::invalid_argument("LossConfig: skeleton_iterations must be >= 1");
    }
};

inline nlohmann::json loss_config_to_json(const LossConfig& c) {
    return {{"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"epsilon", c.epsilon},
            {"skeleton_iterations", c.skeleton_iterations},
            {"occurrence_normalization", c.occurrence_normalization},
            {"include_background_in_dice", c.include_background_in_dice}};
}

inline LossConfig loss_config_from_json(const nlohmann::json& j) {
    LossConfig c;
    if (j.contains("lambda1")) c.lambda1 = j["lambda1"].get<double>();
    if (j.contains("lambda2")) c.lambda2 = j["lambda2"].get<double>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("skeleton_iterations")) c.skeleton_iterations = j["skeleton_iterations"].get<int>();
    if (j.contains("occurrence_normalization"))
        c.occurrence_normalization = j["occurrence_normalization"].get<bool>();
    if (j.contains("include_background_in_dice"))
        c.include_background_in_dice = j["include_background_in_dice"].get<bool>();
    c.validate();
    return c;
}

inline LossConfig load_loss_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open loss config: " + path);
    nlohmann::json j;
    f >> j;
    return loss_config_from_json(j);
}

// Scalar loss value plus its gradient w.r.t. every prediction entry.
struct TermResult {
    double value = 0.0;
    Channels<double> grad;
};

// ---------------------------------------------------------------------------
// Radius map and radius weight map (precomputed from ground truth only).
// ---------------------------------------------------------------------------

// Per-voxel vessel radius in mm: EDT value of the nearest centerline voxel,
// propagated over the foreground by the same separable EDT machinery.
inline ScalarField compute_radius_map(const LabelVolume& gt, const VoxelSpacing& spacing) {
    BinaryVolume fg = gt.foreground_mask();
    if (count_nonzero(fg) == 0)
        throw std::runtime_error("compute_radius_map: empty foreground");
    ScalarField dist = edt(fg, spacing);
    BinaryVolume skel = hard_skeleton(fg);

    Grid3<std::int64_t> nearest;
    squared_distance_to_sites(skel, spacing, &nearest);
    ScalarField radius(gt.dims(), 0.0);
    for (std::int64_t v = 0; v < radius.size(); ++v) {
        if (!fg[v]) continue;
        std::int64_t s = nearest[v];
        radius[v] = s >= 0 ? dist[s] : dist[v];
    }
    return radius;
}

// Background 1; foreground exp((Rmax - R) / (Rmax - Rmin)), so the thinnest
// vessel voxels get weight e and the thickest weight 1. Foreground is the
// support of the radius map.
inline ScalarField radius_weight_map(const ScalarField& radius) {
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -std::numeric_limits<double>::infinity();
    for (std::int64_t v = 0; v < radius.size(); ++v) {
        if (radius[v] <= 0.0) continue;
        rmin = std::min(rmin, radius[v]);
        rmax = std::max(rmax, radius[v]);
    }
    ScalarField w(radius.dims(), 1.0);
    if (!(rmax > rmin)) return w;  // empty or uniform-radius foreground
    for (std::int64_t v = 0; v < radius.size(); ++v)
        if (radius[v] > 0.0) w[v] = std::exp((rmax - radius[v]) / (rmax - rmin));
    return w;
}

// ---------------------------------------------------------------------------
// Cross-entropy.
// ---------------------------------------------------------------------------

inline TermResult ce_loss(const ProbVolume& pred, const LabelVolume& gt, double eps = 1e-5) {
    if (!(pred.dims() == gt.dims()) || pred.channels() != gt.num_classes())
        throw std::invalid_argument("ce_loss: shape mismatch");
    const std::int64_t n = pred.voxels();
    TermResult r{0.0, Channels<double>(pred.channels(), pred.dims(), 0.0)};
    for (std::int64_t v = 0; v < n; ++v) {
        int c = gt[v];
        double p = pred.at(c, v);
        double pc = std::min(std::max(p, eps), 1.0);
        r.value -= std::log(pc);
        if (p >= eps && p <= 1.0) r.grad.at(c, v) = -1.0 / (double(n) * pc);
    }
    r.value /= double(n);
    return r;
}

// ---------------------------------------------------------------------------
// Radius-weighted Dice.
// ---------------------------------------------------------------------------

inline TermResult radius_dice_loss(const ProbVolume& gt_onehot, const ProbVolume& pred,
                                   const ScalarField& w, const LossConfig& cfg = {}) {
    if (!(pred.dims() == gt_onehot.dims()) || pred.channels() != gt_onehot.channels() ||
        !(w.dims() == pred.dims()))
        throw std::invalid_argument("radius_dice_loss: shape mismatch");
    const double eps = cfg.epsilon;
    const int c0 = cfg.include_background_in_dice ? 0 : 1;
    const int nc = pred.channels() - c0;
    if (nc < 1) throw std::invalid_argument("radius_dice_loss: no classes to average");

    TermResult r{0.0, Channels<double>(pred.channels(), pred.dims(), 0.0)};
    const std::int64_t n = pred.voxels();
    for (int c = c0; c < pred.channels(); ++c) {
        double inter = 0.0, sg = 0.0, sp = 0.0;
        for (std::int64_t v = 0; v < n; ++v) {
            double ww = w[v];
            inter += ww * gt_onehot.at(c, v) * pred.at(c, v);
            sg += ww * gt_onehot.at(c, v);
            sp += ww * pred.at(c, v);
        }
        double num = 2.0 * inter + eps;
        double den = sg + sp + eps;
        r.value -= num / den / double(nc);
        for (std::int64_t v = 0; v < n; ++v) {
            double ww = w[v];
            double d = (2.0 * ww * gt_onehot.at(c, v) * den - num * ww) / (den * den);
            r.grad.at(c, v) = -d / double(nc);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Breakage-aware centerline Dice: unified foreground soft skeletons weighted
// by the per-class neighborhood error map.
// ---------------------------------------------------------------------------

inline TermResult breakage_cldice_loss(const ProbVolume& pred, const ProbVolume& gt_onehot,
                                       const LossConfig& cfg = {}) {
    if (!(pred.dims() == gt_onehot.dims()) || pred.channels() != gt_onehot.channels())
        throw std::invalid_argument("breakage_cldice_loss: shape mismatch");
    const double eps = cfg.epsilon;
    const int k = cfg.skeleton_iterations;
    const int C = pred.channels();
    const std::int64_t n = pred.voxels();

    ScalarField fp(pred.dims()), fl(pred.dims());
    for (std::int64_t v = 0; v < n; ++v) {
        fp[v] = 1.0 - pred.at(0, v);
        fl[v] = 1.0 - gt_onehot.at(0, v);
    }
    SoftSkeletonTape tape = soft_skeleton_tape(fp, k);
    const ScalarField& sp = tape.result();
    ScalarField sl = soft_skeleton(fl, k);

    Channels<double> bp = box_sum_3(pred);
    Channels<double> bg = box_sum_3(gt_onehot);
    Channels<double> en(C, pred.dims());
    for (std::int64_t i = 0; i < en.size(); ++i) en[i] = std::abs(bp[i] - bg[i]);

    double num_p = 0, den_p = 0, num_s = 0, den_s = 0;
    for (int c = 0; c < C; ++c)
        for (std::int64_t v = 0; v < n; ++v) {
            double e = en.at(c, v);
            num_p += sp[v] * gt_onehot.at(c, v) * e;
            den_p += sp[v] * e;
            num_s += sl[v] * pred.at(c, v) * e;
            den_s += sl[v] * e;
        }

    TermResult r{0.0, Channels<double>(C, pred.dims(), 0.0)};
    if (den_p < eps && den_s < eps) {
        // vanishing neighborhood error: perfect-topology fixed point
        r.value = -1.0;
        return r;
    }
    double tp = num_p / (den_p + eps);
    double ts = num_s / (den_s + eps);
    double hden = tp + ts + eps;
    r.value = -2.0 * tp * ts / hden;

    // dL/dTp and dL/dTs
    double g_tp = -2.0 * (ts * hden - tp * ts) / (hden * hden);
    double g_ts = -2.0 * (tp * hden - tp * ts) / (hden * hden);
    double g_num_p = g_tp / (den_p + eps);
    double g_den_p = -g_tp * num_p / ((den_p + eps) * (den_p + eps));
    double g_num_s = g_ts / (den_s + eps);
    double g_den_s = -g_ts * num_s / ((den_s + eps) * (den_s + eps));

    ScalarField g_sp(pred.dims(), 0.0);
    Channels<double> g_en(C, pred.dims(), 0.0);
    for (int c = 0; c < C; ++c)
        for (std::int64_t v = 0; v < n; ++v) {
            double e = en.at(c, v);
            double g = gt_onehot.at(c, v);
            g_sp[v] += (g_num_p * g + g_den_p) * e;
            g_en.at(c, v) = g_num_p * sp[v] * g + g_den_p * sp[v] +
                            g_num_s * sl[v] * pred.at(c, v) + g_den_s * sl[v];
            r.grad.at(c, v) += g_num_s * sl[v] * e;  // direct V_P factor in Tsens
        }

    // |x| subgradient routed through the box-sum adjoint (box sum again)
    ScalarField tmp(pred.dims());
    for (int c = 0; c < C; ++c) {
        for (std::int64_t v = 0; v < n; ++v) {
            double d = bp.at(c, v) - bg.at(c, v);
            tmp[v] = d > 0 ? g_en.at(c, v) : d < 0 ? -g_en.at(c, v) : 0.0;
        }
        ScalarField adj = box_sum_3(tmp);
        for (std::int64_t v = 0; v < n; ++v) r.grad.at(c, v) += adj[v];
    }

    // skeleton path: d fp / d pred_bg = -1
    ScalarField g_fp = tape.backward(g_sp);
    for (std::int64_t v = 0; v < n; ++v) r.grad.at(0, v) -= g_fp[v];
    return r;
}

// ---------------------------------------------------------------------------
// Local occurrence probability: 3x3x3 box sum of the class probability,
// optionally normalized by the window size.
// ---------------------------------------------------------------------------

inline Channels<double> local_occurrence(const ProbVolume& pred, const LossConfig& cfg = {}) {
    Channels<double> p = box_sum_3(pred);
    if (cfg.occurrence_normalization)
        for (std::int64_t i = 0; i < p.size(); ++i) p[i] /= 27.0;
    return p;
}

// ---------------------------------------------------------------------------
// Co-occurrence false-positive penalty over non-adjacent class pairs.
// Channel c of pred corresponds to adjacency index c-1; background takes no
// part.
// ---------------------------------------------------------------------------

inline TermResult cooccurrence_fp_loss(const ProbVolume& pred, const AdjacencyMatrix& a,
                                       const LossConfig& cfg = {}) {
    if (pred.channels() - 1 != a.n())
        throw std::invalid_argument("cooccurrence_fp_loss: adjacency size mismatch");
    const int nf = a.n();
    const std::int64_t n = pred.voxels();
    const double norm = cfg.occurrence_normalization ? 27.0 : 1.0;

    TermResult r{0.0, Channels<double>(pred.channels(), pred.dims(), 0.0)};
    const std::int64_t abar = a.complement_count();
    if (abar == 0) return r;

    Channels<double> occ = box_sum_3(pred);
    for (std::int64_t i = 0; i < occ.size(); ++i) occ[i] /= norm;

    std::vector<ScalarField> g_occ(size_t(nf), ScalarField(pred.dims(), 0.0));
    for (int i = 0; i < nf; ++i)
        for (int j = i + 1; j < nf; ++j) {
            if (a.adjacent(i, j)) continue;
            const double* pi = occ.channel(i + 1);
            const double* pj = occ.channel(j + 1);
            double cij = 0.0;
            for (std::int64_t v = 0; v < n; ++v) cij += pi[v] * pj[v];
            r.value += 2.0 * cij / double(abar);  // both orders of the pair
            for (std::int64_t v = 0; v < n; ++v) {
                g_occ[size_t(i)][v] += 2.0 * pj[v] / double(abar);
                g_occ[size_t(j)][v] += 2.0 * pi[v] / double(abar);
            }
        }

    for (int i = 0; i < nf; ++i) {
        ScalarField adj = box_sum_3(g_occ[size_t(i)]);
        for (std::int64_t v = 0; v < n; ++v) r.grad.at(i + 1, v) = adj[v] / norm;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Co-occurrence false-negative penalty: inside the keypoint mask, match the
// edge-modulated joint occurrence of every adjacent ordered pair between
// prediction and ground truth.
// ---------------------------------------------------------------------------

inline TermResult cooccurrence_fn_loss(const ProbVolume& pred, const ProbVolume& gt_onehot,
                                       const AdjacencyMatrix& a, const BinaryVolume& mask,
                                       const LossConfig& cfg = {}) {
    if (pred.channels() - 1 != a.n())
        throw std::invalid_argument("cooccurrence_fn_loss: adjacency size mismatch");
    if (!(pred.dims() == gt_onehot.dims()) || pred.channels() != gt_onehot.channels() ||
        !(mask.dims() == pred.dims()))
        throw std::invalid_argument("cooccurrence_fn_loss: shape mismatch");
    const int nf = a.n();
    const std::int64_t n = pred.voxels();
    const double norm = cfg.occurrence_normalization ? 27.0 : 1.0;

    TermResult r{0.0, Channels<double>(pred.channels(), pred.dims(), 0.0)};
    const std::int64_t msize = count_nonzero(mask);
    if (msize == 0) return r;
    const double scale = 1.0 / double(std::max<std::int64_t>(1, msize));

    Channels<double> occ_p = box_sum_3(pred);
    Channels<double> occ_g = box_sum_3(gt_onehot);
    for (std::int64_t i = 0; i < occ_p.size(); ++i) {
        occ_p[i] /= norm;
        occ_g[i] /= norm;
    }

    // per-class Sobel responses; prediction ones keep directional fields for
    // the backward pass
    std::vector<SobelChannel> sob_p;
    std::vector<ScalarField> edge_g;
    sob_p.resize(size_t(nf));
    edge_g.resize(size_t(nf));
    ScalarField tmp(pred.dims());
    for (int i = 0; i < nf; ++i) {
        for (std::int64_t v = 0; v < n; ++v) tmp[v] = pred.at(i + 1, v);
        sob_p[size_t(i)] = sobel_channel(tmp);
        for (std::int64_t v = 0; v < n; ++v) tmp[v] = gt_onehot.at(i + 1, v);
        edge_g[size_t(i)] = sobel_channel(tmp).edge;
    }

    std::vector<ScalarField> g_occ(size_t(nf), ScalarField(pred.dims(), 0.0));
    std::vector<ScalarField> g_edge(size_t(nf), ScalarField(pred.dims(), 0.0));

    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) {
            if (i == j || !a.adjacent(i, j)) continue;
            const double* pi = occ_p.channel(i + 1);
            const double* pj = occ_p.channel(j + 1);
            const double* gi = occ_g.channel(i + 1);
            const double* gj = occ_g.channel(j + 1);
            const ScalarField& ep = sob_p[size_t(i)].edge;
            const ScalarField& eg = edge_g[size_t(i)];
            for (std::int64_t v = 0; v < n; ++v) {
                if (!mask[v]) continue;
                double qp = pi[v] * pj[v] * ep[v];
                double qg = gi[v] * gj[v] * eg[v];
                double diff = qp - qg;
                r.value += diff * diff * scale;
                double gq = 2.0 * diff * scale;
                g_occ[size_t(i)][v] += gq * pj[v] * ep[v];
                g_occ[size_t(j)][v] += gq * pi[v] * ep[v];
                g_edge[size_t(i)][v] += gq * pi[v] * pj[v];
            }
        }

    for (int i = 0; i < nf; ++i) {
        ScalarField adj = box_sum_3(g_occ[size_t(i)]);
        ScalarField sadj = sobel_channel_backward(sob_p[size_t(i)], g_edge[size_t(i)]);
        for (std::int64_t v = 0; v < n; ++v) r.grad.at(i + 1, v) = adj[v] / norm + sadj[v];
    }
    return r;
}

// ---------------------------------------------------------------------------
// Composite objective.
// ---------------------------------------------------------------------------

struct LossBreakdown {
    TermResult ce;
    TermResult dice_weighted;
    TermResult neighbors_cldice;
    TermResult cooccurrence_fp;
    TermResult cooccurrence_fn;
    double total = 0.0;
    Channels<double> total_grad;
};

// total = CE + weighted Dice + lambda1 * breakage clDice
//       + lambda2 * (co-occurrence FP + FN)
inline LossBreakdown composite_loss(const ProbVolume& pred, const LabelVolume& gt,
                                    const ClassScheme& scheme, const AdjacencyMatrix& a,
                                    const LossConfig& cfg = {}) {
    cfg.validate();
    if (gt.num_classes() != scheme.num_classes() || pred.channels() != scheme.num_classes())
        throw std::invalid_argument("composite_loss: scheme mismatch");

    ProbVolume gt1h = one_hot(gt);
    ScalarField radius = compute_radius_map(gt, gt.spacing());
    ScalarField weight = radius_weight_map(radius);
    BinaryVolume kp = keypoint_mask(gt, a, 1);

    LossBreakdown b;
    b.ce = ce_loss(pred, gt, cfg.epsilon);
    b.dice_weighted = radius_dice_loss(gt1h, pred, weight, cfg);
    b.neighbors_cldice = breakage_cldice_loss(pred, gt1h, cfg);
    b.cooccurrence_fp = cooccurrence_fp_loss(pred, a, cfg);
    b.cooccurrence_fn = cooccurrence_fn_loss(pred, gt1h, a, kp, cfg);

    b.total = b.ce.value + b.dice_weighted.value + cfg.lambda1 * b.neighbors_cldice.value +
              cfg.lambda2 * (b.cooccurrence_fp.value + b.cooccurrence_fn.value);
    b.total_grad = Channels<double>(pred.channels(), pred.dims(), 0.0);
    auto add = [&](const TermResult& t, double w) {
        if (t.grad.size() == 0) return;
        for (std::int64_t i = 0; i < b.total_grad.size(); ++i) b.total_grad[i] += w * t.grad[i];
    };
    add(b.ce, 1.0);
    add(b.dice_weighted, 1.0);
    add(b.neighbors_cldice, cfg.lambda1);
    add(b.cooccurrence_fp, cfg.lambda2);
    add(b.cooccurrence_fn, cfg.lambda2);
    return b;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check.
// ---------------------------------------------------------------------------

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::int64_t worst_index = -1;
    double analytic = 0.0, numeric = 0.0;
};

// Central differences at `samples` random coordinates against a provided
// analytic gradient. Relative error denominator max(|a|, |n|, 1e-8).
inline GradCheckResult finite_difference_check(
    const std::function<double(const ProbVolume&)>& loss, const ProbVolume& pred,
    const Channels<double>& analytic_grad, double h, int samples, std::uint64_t seed) {
    if (h < 1e-6 || h > 1e-2)
        throw std::invalid_argument("finite_difference_check: h must be in [1e-6, 1e-2]");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(0, pred.size() - 1);

    GradCheckResult r;
    ProbVolume work = pred;
    for (int s = 0; s < samples; ++s) {
        std::int64_t i = pick(rng);
        double orig = work[i];
        work[i] = orig + h;
        double lp = loss(work);
        work[i] = orig - h;
        double lm = loss(work);
        work[i] = orig;
        double numeric = (lp - lm) / (2.0 * h);
        double analytic = analytic_grad[i];
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        double rel = std::abs(analytic - numeric) / denom;
        if (rel > r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst_index = i;
            r.analytic = analytic;
            r.numeric = numeric;
        }
    }
    return r;
}

}  // namespace vt
