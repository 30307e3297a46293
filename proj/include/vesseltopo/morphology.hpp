#pragma once

// Local 3D operators: 3x3x3 box sums, min/max pooling, the iterative
// soft-skeleton recurrence (with a tape for exact backpropagation), exact
// separable Euclidean distance transforms, Sobel edge maps, binary dilation,
// and adjacency-gated keypoint masks.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vesseltopo/adjacency.hpp"
#include "vesseltopo/topology.hpp"
#include "vesseltopo/volume.hpp"

namespace vt {

// ---------------------------------------------------------------------------
// Box sum (all-ones 3x3x3 kernel, zero padding). Self-adjoint.
// ---------------------------------------------------------------------------

inline ScalarField box_sum_3(const ScalarField& in) {
    const Dims3 d = in.dims();
    ScalarField out(d, 0.0);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                double s = 0.0;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (in.in_bounds(xx, yy, zz)) s += in(xx, yy, zz);
                        }
                out(x, y, z) = s;
            }
    return out;
}

template <typename T>
inline Channels<double> box_sum_3(const Channels<T>& in) {
    Channels<double> out(in.channels(), in.dims(), 0.0);
    ScalarField tmp(in.dims());
    for (int c = 0; c < in.channels(); ++c) {
        for (std::int64_t v = 0; v < in.voxels(); ++v) tmp[v] = double(in.at(c, v));
        ScalarField s = box_sum_3(tmp);
        for (std::int64_t v = 0; v < in.voxels(); ++v) out.at(c, v) = s[v];
    }
    return out;
}

// E_N: per-channel L1 distance between box sums of prediction and ground truth.
inline Channels<double> neighborhood_error(const ProbVolume& pred, const ProbVolume& gt) {
    if (pred.channels() != gt.channels() || !(pred.dims() == gt.dims()))
        throw std::invalid_argument("neighborhood_error: shape mismatch");
    Channels<double> e = box_sum_3(pred);
    Channels<double> g = box_sum_3(gt);
    for (std::int64_t i = 0; i < e.size(); ++i) e[i] = std::abs(e[i] - g[i]);
    return e;
}

// ---------------------------------------------------------------------------
// Min/max pooling over the valid 3x3x3 window. The arg record stores, per
// output voxel, the linear index of the extremal input voxel; ties resolve to
// the lowest linear index (window scanned in ascending index order).
// ---------------------------------------------------------------------------

namespace detail {

template <bool kMax>
inline ScalarField pool3(const ScalarField& in, std::vector<std::int64_t>* arg) {
    const Dims3 d = in.dims();
    ScalarField out(d);
    if (arg) arg->assign(size_t(in.size()), -1);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                double best = kMax ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity();
                std::int64_t best_i = -1;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (!in.in_bounds(xx, yy, zz)) continue;
                            std::int64_t i = in.index(xx, yy, zz);
                            double v = in[i];
                            bool better = kMax ? v > best : v < best;
                            if (better || (v == best && best_i >= 0 && i < best_i)) {
                                best = v;
                                best_i = i;
                            }
                        }
                std::int64_t o = in.index(x, y, z);
                out[o] = best;
                if (arg) (*arg)[size_t(o)] = best_i;
            }
    return out;
}

}  // namespace detail

inline ScalarField max_pool3(const ScalarField& in, std::vector<std::int64_t>* arg = nullptr) {
    return detail::pool3<true>(in, arg);
}
inline ScalarField min_pool3(const ScalarField& in, std::vector<std::int64_t>* arg = nullptr) {
    return detail::pool3<false>(in, arg);
}

// ---------------------------------------------------------------------------
// Soft skeleton: skel_0 = relu(I - open(I)); then k rounds of
//   img <- erode(img);  delta = relu(img - open(img));
//   skel <- skel + relu(delta - skel * delta).
// Erosion is a 3x3x3 min-pool, dilation a max-pool, open = dilate(erode(.)).
// The tape keeps every intermediate so the exact subgradient (extremum-routed
// pooling) can be replayed in reverse.
// ---------------------------------------------------------------------------

struct SoftSkeletonTape {
    int iterations = 0;
    std::vector<ScalarField> eroded;          // e_0 = input .. e_{k+1}
    std::vector<std::vector<std::int64_t>> erode_arg;   // e_{j+1} from e_j
    std::vector<ScalarField> opened;          // op_j = dilate(e_{j+1})
    std::vector<std::vector<std::int64_t>> dilate_arg;  // op_j from e_{j+1}
    std::vector<ScalarField> delta;           // relu(e_j - op_j)
    std::vector<ScalarField> skel;            // skel_0 .. skel_k

    const ScalarField& result() const { return skel.back(); }

    // Gradient of a scalar loss w.r.t. the input field, given its gradient
    // w.r.t. the skeleton output.
    ScalarField backward(const ScalarField& grad_out) const {
        const std::int64_t n = eroded[0].size();
        const int k = iterations;
        std::vector<ScalarField> g_e(size_t(k) + 2, ScalarField(eroded[0].dims(), 0.0));
        ScalarField g_skel = grad_out;       // gradient w.r.t. skel_j, walking j down
        ScalarField g_delta(eroded[0].dims(), 0.0);
        ScalarField g_op(eroded[0].dims(), 0.0);

        for (int j = k; j >= 0; --j) {
            g_delta.fill(0.0);
            if (j > 0) {
                // skel_j = skel_{j-1} + relu(u), u = delta_j * (1 - skel_{j-1})
                const ScalarField& sprev = skel[size_t(j) - 1];
                ScalarField g_prev(eroded[0].dims(), 0.0);
                for (std::int64_t i = 0; i < n; ++i) {
                    double u = delta[size_t(j)][i] * (1.0 - sprev[i]);
                    double g = g_skel[i];
                    g_prev[i] = g;
                    if (u > 0.0) {
                        g_delta[i] = g * (1.0 - sprev[i]);
                        g_prev[i] -= g * delta[size_t(j)][i];
                    }
                }
                g_skel = std::move(g_prev);
            } else {
                g_delta = g_skel;  // skel_0 = delta_0
            }
            // delta_j = relu(e_j - op_j)
            g_op.fill(0.0);
            for (std::int64_t i = 0; i < n; ++i) {
                if (eroded[size_t(j)][i] - opened[size_t(j)][i] > 0.0) {
                    g_e[size_t(j)][i] += g_delta[i];
                    g_op[i] -= g_delta[i];
                }
            }
            // op_j = max_pool(e_{j+1})
            for (std::int64_t i = 0; i < n; ++i) {
                std::int64_t a = dilate_arg[size_t(j)][size_t(i)];
                if (a >= 0) g_e[size_t(j) + 1][a] += g_op[i];
            }
        }
        // e_{j+1} = min_pool(e_j), walked from the deepest erosion back up
        for (int j = k; j >= 0; --j) {
            for (std::int64_t i = 0; i < n; ++i) {
                std::int64_t a = erode_arg[size_t(j)][size_t(i)];
                if (a >= 0) g_e[size_t(j)][a] += g_e[size_t(j) + 1][i];
            }
        }
        return g_e[0];
    }
};

inline SoftSkeletonTape soft_skeleton_tape(const ScalarField& input, int iterations) {
    if (iterations < 1) throw std::invalid_argument("soft_skeleton: iterations must be >= 1");
    SoftSkeletonTape t;
    t.iterations = iterations;
    const std::int64_t n = input.size();
    t.eroded.push_back(input);
    for (int j = 0; j <= iterations; ++j) {
        std::vector<std::int64_t> earg, darg;
        t.eroded.push_back(min_pool3(t.eroded[size_t(j)], &earg));
        t.erode_arg.push_back(std::move(earg));
        t.opened.push_back(max_pool3(t.eroded[size_t(j) + 1], &darg));
        t.dilate_arg.push_back(std::move(darg));

        ScalarField delta(input.dims());
        for (std::int64_t i = 0; i < n; ++i)
            delta[i] = std::max(0.0, t.eroded[size_t(j)][i] - t.opened[size_t(j)][i]);
        t.delta.push_back(std::move(delta));

        if (j == 0) {
            t.skel.push_back(t.delta[0]);
        } else {
            ScalarField s = t.skel.back();
            for (std::int64_t i = 0; i < n; ++i)
                s[i] += std::max(0.0, t.delta[size_t(j)][i] * (1.0 - s[i]));
            t.skel.push_back(std::move(s));
        }
    }
    return t;
}

inline ScalarField soft_skeleton(const ScalarField& input, int iterations) {
    return soft_skeleton_tape(input, iterations).result();
}

// ---------------------------------------------------------------------------
// Exact separable EDT (lower-envelope passes), anisotropic, with optional
// feature transform (nearest site per voxel).
// ---------------------------------------------------------------------------

namespace detail {

// 1D squared-distance transform with per-step weight w. f holds squared
// distances (INF where no site yet), ids the originating site indices.
inline void dt1d(std::vector<double>& f, std::vector<std::int64_t>& ids, double w) {
    const int n = int(f.size());
    const double INF = std::numeric_limits<double>::infinity();
    static thread_local std::vector<int> v;
    static thread_local std::vector<double> z;
    static thread_local std::vector<double> fout;
    static thread_local std::vector<std::int64_t> iout;
    v.assign(size_t(n), 0);
    z.assign(size_t(n) + 1, 0.0);
    fout.assign(size_t(n), INF);
    iout.assign(size_t(n), -1);

    const double w2 = w * w;
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[size_t(q)] == INF) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -INF;
            z[1] = INF;
            continue;
        }
        double s;
        for (;;) {
            int p = v[size_t(k)];
            s = ((f[size_t(q)] + w2 * q * q) - (f[size_t(p)] + w2 * p * p)) /
                (2.0 * w2 * (q - p));
            if (s <= z[size_t(k)]) {
                --k;
                if (k < 0) break;
            } else {
                break;
            }
        }
        ++k;
        v[size_t(k)] = q;
        z[size_t(k)] = k == 0 ? -INF : s;
        z[size_t(k) + 1] = INF;
    }
    if (k < 0) return;  // no sites on this line

    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[size_t(j) + 1] < q) ++j;
        int p = v[size_t(j)];
        fout[size_t(q)] = w2 * (q - p) * (q - p) + f[size_t(p)];
        iout[size_t(q)] = ids[size_t(p)];
    }
    f = fout;
    ids = iout;
}

}  // namespace detail

// Squared distance (mm^2) from every voxel to the nearest site voxel, plus the
// linear index of that site when `nearest` is given. Voxels unreachable from
// any site (empty site set) get +inf / -1.
inline ScalarField squared_distance_to_sites(const BinaryVolume& sites, const VoxelSpacing& sp,
                                             Grid3<std::int64_t>* nearest = nullptr) {
    const Dims3 d = sites.dims();
    const double INF = std::numeric_limits<double>::infinity();
    ScalarField dist(d, INF);
    Grid3<std::int64_t> feat(d, -1);
    for (std::int64_t i = 0; i < sites.size(); ++i)
        if (sites[i]) {
            dist[i] = 0.0;
            feat[i] = i;
        }

    std::vector<double> line;
    std::vector<std::int64_t> lids;
    // pass along x
    line.resize(size_t(d.h));
    lids.resize(size_t(d.h));
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y) {
            for (int x = 0; x < d.h; ++x) {
                line[size_t(x)] = dist(x, y, z);
                lids[size_t(x)] = feat(x, y, z);
            }
            detail::dt1d(line, lids, sp.dx);
            for (int x = 0; x < d.h; ++x) {
                dist(x, y, z) = line[size_t(x)];
                feat(x, y, z) = lids[size_t(x)];
            }
        }
    // pass along y
    line.resize(size_t(d.w));
    lids.resize(size_t(d.w));
    for (int z = 0; z < d.d; ++z)
        for (int x = 0; x < d.h; ++x) {
            for (int y = 0; y < d.w; ++y) {
                line[size_t(y)] = dist(x, y, z);
                lids[size_t(y)] = feat(x, y, z);
            }
            detail::dt1d(line, lids, sp.dy);
            for (int y = 0; y < d.w; ++y) {
                dist(x, y, z) = line[size_t(y)];
                feat(x, y, z) = lids[size_t(y)];
            }
        }
    // pass along z
    line.resize(size_t(d.d));
    lids.resize(size_t(d.d));
    for (int y = 0; y < d.w; ++y)
        for (int x = 0; x < d.h; ++x) {
            for (int z = 0; z < d.d; ++z) {
                line[size_t(z)] = dist(x, y, z);
                lids[size_t(z)] = feat(x, y, z);
            }
            detail::dt1d(line, lids, sp.dz);
            for (int z = 0; z < d.d; ++z) {
                dist(x, y, z) = line[size_t(z)];
                feat(x, y, z) = lids[size_t(z)];
            }
        }
    if (nearest) *nearest = std::move(feat);
    return dist;
}

// Euclidean distance in mm from each foreground voxel to the nearest
// background voxel; 0 on background.
inline ScalarField edt(const BinaryVolume& mask, const VoxelSpacing& sp) {
    BinaryVolume background(mask.dims());
    for (std::int64_t i = 0; i < mask.size(); ++i) background[i] = mask[i] ? 0 : 1;
    ScalarField d2 = squared_distance_to_sites(background, sp);
    ScalarField out(mask.dims(), 0.0);
    for (std::int64_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out[i] = std::sqrt(d2[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Hard skeleton: thresholded soft skeleton with the iteration count chosen
// from the maximal inscribed radius of the mask.
// ---------------------------------------------------------------------------

inline BinaryVolume hard_skeleton(const BinaryVolume& mask) {
    BinaryVolume out(mask.dims(), 0);
    if (count_nonzero(mask) == 0) return out;
    ScalarField d = edt(mask, VoxelSpacing(1, 1, 1));
    double dmax = 0.0;
    for (std::int64_t i = 0; i < d.size(); ++i) dmax = std::max(dmax, d[i]);
    int k = int(std::ceil(dmax)) + 1;

    ScalarField field(mask.dims());
    for (std::int64_t i = 0; i < mask.size(); ++i) field[i] = mask[i] ? 1.0 : 0.0;
    ScalarField s = soft_skeleton(field, k);
    for (std::int64_t i = 0; i < s.size(); ++i) out[i] = (s[i] > 0.5 && mask[i]) ? 1 : 0;

    // The recurrence leaves ridge spurs on thick structures (e.g. the four
    // extreme fibers of a radius-2 tube) that detach from the centerline.
    // Keep, within each input component, only the most medial skeleton
    // component (highest mean EDT; ties resolved by scan-order label) so the
    // skeleton preserves the input's 26-connectivity component count.
    ComponentLabels in_cc = connected_components(mask, 26);
    ComponentLabels sk_cc = connected_components(out, 26);
    if (sk_cc.count > in_cc.count) {
        std::vector<double> sum(size_t(sk_cc.count) + 1, 0.0);
        std::vector<std::int64_t> cnt(size_t(sk_cc.count) + 1, 0);
        std::vector<int> owner(size_t(sk_cc.count) + 1, 0);
        for (std::int64_t i = 0; i < out.size(); ++i) {
            if (!out[i]) continue;
            int l = sk_cc.labels[i];
            sum[size_t(l)] += d[i];
            ++cnt[size_t(l)];
            owner[size_t(l)] = in_cc.labels[i];
        }
        std::vector<int> best(size_t(in_cc.count) + 1, 0);
        for (int l = 1; l <= sk_cc.count; ++l) {
            if (cnt[size_t(l)] == 0) continue;
            int o = owner[size_t(l)];
            int b = best[size_t(o)];
            if (b == 0 ||
                sum[size_t(l)] / double(cnt[size_t(l)]) > sum[size_t(b)] / double(cnt[size_t(b)]))
                best[size_t(o)] = l;
        }
        for (std::int64_t i = 0; i < out.size(); ++i)
            if (out[i] && sk_cc.labels[i] != best[size_t(in_cc.labels[i])]) out[i] = 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sobel edge maps. Correlation with the 3x3x3 Sobel stencil (derivative
// (-1,0,1) along one axis, smoothing (1,2,1) along the other two), raw
// integer weights. Borders are clamped (replicate padding) so a spatially
// constant channel produces an exactly zero edge map everywhere.
// ---------------------------------------------------------------------------

inline double sobel_weight(int axis, int dx, int dy, int dz) {
    static const double deriv[3] = {-1, 0, 1};
    static const double smooth[3] = {1, 2, 1};
    const int o[3] = {dx + 1, dy + 1, dz + 1};
    double w = 1.0;
    for (int a = 0; a < 3; ++a) w *= (a == axis) ? deriv[o[a]] : smooth[o[a]];
    return w;
}

inline int clamp_index(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

inline ScalarField sobel_axis(const ScalarField& in, int axis) {
    const Dims3 d = in.dims();
    const int n[3] = {d.h, d.w, d.d};
    static const double smooth[3] = {1, 2, 1};
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    ScalarField out(d, 0.0);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                const int p[3] = {x, y, z};
                double s = 0.0;
                // difference along the derivative axis first, so a constant
                // channel cancels to exactly zero
                for (int o1 = -1; o1 <= 1; ++o1)
                    for (int o2 = -1; o2 <= 1; ++o2) {
                        int hi[3] = {p[0], p[1], p[2]};
                        hi[a1] = clamp_index(p[a1] + o1, n[a1]);
                        hi[a2] = clamp_index(p[a2] + o2, n[a2]);
                        int lo[3] = {hi[0], hi[1], hi[2]};
                        hi[axis] = clamp_index(p[axis] + 1, n[axis]);
                        lo[axis] = clamp_index(p[axis] - 1, n[axis]);
                        s += smooth[o1 + 1] * smooth[o2 + 1] *
                             (in(hi[0], hi[1], hi[2]) - in(lo[0], lo[1], lo[2]));
                    }
                out(x, y, z) = s;
            }
    return out;
}

// Exact adjoint of sobel_axis: scatter each output's stencil contributions
// back onto the clamped input coordinates.
inline ScalarField sobel_axis_adjoint(const ScalarField& g, int axis) {
    const Dims3 d = g.dims();
    ScalarField out(d, 0.0);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                const double gv = g(x, y, z);
                if (gv == 0.0) continue;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            out(clamp_index(x + dx, d.h), clamp_index(y + dy, d.w),
                                clamp_index(z + dz, d.d)) +=
                                sobel_weight(axis, dx, dy, dz) * gv;
            }
    return out;
}

struct SobelChannel {
    ScalarField gx, gy, gz;  // directional responses
    ScalarField edge;        // sqrt(gx^2 + gy^2 + gz^2)
};

inline SobelChannel sobel_channel(const ScalarField& in) {
    SobelChannel r{sobel_axis(in, 0), sobel_axis(in, 1), sobel_axis(in, 2), ScalarField(in.dims())};
    for (std::int64_t i = 0; i < in.size(); ++i)
        r.edge[i] = std::sqrt(r.gx[i] * r.gx[i] + r.gy[i] * r.gy[i] + r.gz[i] * r.gz[i]);
    return r;
}

// Gradient w.r.t. the channel input given d(loss)/d(edge). Zero subgradient
// where the edge magnitude vanishes.
inline ScalarField sobel_channel_backward(const SobelChannel& r, const ScalarField& g_edge) {
    const std::int64_t n = r.edge.size();
    ScalarField gx(r.edge.dims()), gy(r.edge.dims()), gz(r.edge.dims());
    for (std::int64_t i = 0; i < n; ++i) {
        double e = r.edge[i];
        double s = e > 0.0 ? g_edge[i] / e : 0.0;
        gx[i] = s * r.gx[i];
        gy[i] = s * r.gy[i];
        gz[i] = s * r.gz[i];
    }
    ScalarField out = sobel_axis_adjoint(gx, 0);
    ScalarField oy = sobel_axis_adjoint(gy, 1);
    ScalarField oz = sobel_axis_adjoint(gz, 2);
    for (std::int64_t i = 0; i < n; ++i) out[i] += oy[i] + oz[i];
    return out;
}

template <typename T>
inline Channels<double> sobel_edges(const Channels<T>& in) {
    Channels<double> out(in.channels(), in.dims());
    ScalarField tmp(in.dims());
    for (int c = 0; c < in.channels(); ++c) {
        for (std::int64_t v = 0; v < in.voxels(); ++v) tmp[v] = double(in.at(c, v));
        SobelChannel r = sobel_channel(tmp);
        for (std::int64_t v = 0; v < in.voxels(); ++v) out.at(c, v) = r.edge[v];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary dilation and keypoint masks.
// ---------------------------------------------------------------------------

inline BinaryVolume dilate(const BinaryVolume& mask, int times = 1) {
    if (times < 0) throw std::invalid_argument("dilate: times must be >= 0");
    BinaryVolume cur = mask;
    const Dims3 d = mask.dims();
    for (int t = 0; t < times; ++t) {
        BinaryVolume next(d, 0);
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.w; ++y)
                for (int x = 0; x < d.h; ++x) {
                    if (!cur(x, y, z)) continue;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                int xx = x + dx, yy = y + dy, zz = z + dz;
                                if (cur.in_bounds(xx, yy, zz)) next(xx, yy, zz) = 1;
                            }
                }
        cur = std::move(next);
    }
    return cur;
}

// Foreground voxels whose 26-neighborhood contains a different class j with
// A(class(v), j) = 1, then dilated. Localizes legitimate inter-class junctions.
inline BinaryVolume keypoint_mask(const LabelVolume& gt, const AdjacencyMatrix& a,
                                  int dilation = 1) {
    if (gt.num_classes() - 1 != a.n())
        throw std::invalid_argument("keypoint_mask: adjacency size does not match scheme");
    const Dims3 d = gt.dims();
    BinaryVolume m(d, 0);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                int c = gt(x, y, z);
                if (c == 0) continue;
                bool hit = false;
                for (int dz = -1; dz <= 1 && !hit; ++dz)
                    for (int dy = -1; dy <= 1 && !hit; ++dy)
                        for (int dx = -1; dx <= 1 && !hit; ++dx) {
                            if (dx == 0 && dy == 0 && dz == 0) continue;
                            int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (!m.in_bounds(xx, yy, zz)) continue;
                            int j = gt(xx, yy, zz);
                            if (j != 0 && j != c && a.adjacent(c - 1, j - 1)) hit = true;
                        }
                if (hit) m(x, y, z) = 1;
            }
    return dilation > 0 ? dilate(m, dilation) : m;
}

}  // namespace vt
