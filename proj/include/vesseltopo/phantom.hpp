#pragma once

// Synthetic labeled phantoms with known geometry and topology: straight tubes,
// a square torus, a hollow shell, and a schematic toy Circle-of-Willis graph
// realizing the default adjacency matrix. Plus controlled perturbations
// (breaks, label swaps, boundary jitter) for loss and metric tests.

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "vesseltopo/scheme.hpp"
#include "vesseltopo/topology.hpp"
#include "vesseltopo/volume.hpp"

namespace vt {

enum class PhantomKind { tube, torus, shell, toy_cow };

struct PhantomSpec {
    PhantomKind kind = PhantomKind::tube;
    Dims3 dims{32, 32, 32};
    VoxelSpacing spacing{1, 1, 1};
    int radius_voxels = 2;
    std::uint64_t rng_seed = 0;
    int class_id = 1;                       // label for single-structure phantoms
    int num_classes = 2;                    // C_total for single-structure phantoms
    std::vector<std::string> absent = {};   // toy-CoW variant flags (class names)
};

// Solid cylinder along `axis`, spanning the full axis extent through the
// volume center. Betti numbers (1, 0, 0).
inline LabelVolume make_tube(const PhantomSpec& spec, int axis = 0) {
    const Dims3 d = spec.dims;
    const double r = spec.radius_voxels;
    if (r < 1) throw std::invalid_argument("make_tube: radius must be >= 1 voxel");
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    if (2 * r + 1 > d[a1] || 2 * r + 1 > d[a2])
        throw std::invalid_argument("make_tube: radius exceeds dims");
    LabelVolume out(d, spec.spacing, spec.num_classes);
    const double c1 = (d[a1] - 1) / 2.0, c2 = (d[a2] - 1) / 2.0;
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                int p[3] = {x, y, z};
                double u = p[a1] - c1, v = p[a2] - c2;
                if (u * u + v * v <= r * r) out(x, y, z) = std::uint16_t(spec.class_id);
            }
    return out;
}

// Square ring in the central z-slab. Betti numbers (1, 1, 0).
inline LabelVolume make_torus(const PhantomSpec& spec) {
    const Dims3 d = spec.dims;
    const int t = spec.radius_voxels;  // arm thickness
    const int outer = std::min(d.h, d.w) - 4;
    if (t < 1 || outer < 3 * t || d.d < t)
        throw std::invalid_argument("make_torus: radius exceeds dims");
    LabelVolume out(d, spec.spacing, spec.num_classes);
    const int x0 = (d.h - outer) / 2, y0 = (d.w - outer) / 2;
    const int z0 = (d.d - t) / 2;
    for (int z = z0; z < z0 + t; ++z)
        for (int y = y0; y < y0 + outer; ++y)
            for (int x = x0; x < x0 + outer; ++x) {
                bool inner = x >= x0 + t && x < x0 + outer - t && y >= y0 + t && y < y0 + outer - t;
                if (!inner) out(x, y, z) = std::uint16_t(spec.class_id);
            }
    return out;
}

// Hollow cube surface of the given thickness. Betti numbers (1, 0, 1).
inline LabelVolume make_shell(const PhantomSpec& spec) {
    const Dims3 d = spec.dims;
    const int t = spec.radius_voxels;
    const int outer = std::min(d.h, std::min(d.w, d.d)) - 4;
    if (t < 1 || outer < 2 * t + 1)
        throw std::invalid_argument("make_shell: radius exceeds dims");
    LabelVolume out(d, spec.spacing, spec.num_classes);
    const int x0 = (d.h - outer) / 2, y0 = (d.w - outer) / 2, z0 = (d.d - outer) / 2;
    for (int z = z0; z < z0 + outer; ++z)
        for (int y = y0; y < y0 + outer; ++y)
            for (int x = x0; x < x0 + outer; ++x) {
                bool interior = x >= x0 + t && x < x0 + outer - t && y >= y0 + t &&
                                y < y0 + outer - t && z >= z0 + t && z < z0 + outer - t;
                if (!interior) out(x, y, z) = std::uint16_t(spec.class_id);
            }
    return out;
}

namespace detail {

struct Segment {
    const char* name;
    std::vector<std::array<int, 2>> xy;  // voxels in the layout plane
};

inline void hline(std::vector<std::array<int, 2>>& v, int y, int x0, int x1) {
    for (int x = x0; x <= x1; ++x) v.push_back({x, y});
}
inline void vline(std::vector<std::array<int, 2>>& v, int x, int y0, int y1) {
    for (int y = y0; y <= y1; ++y) v.push_back({x, y});
}

// Schematic planar CoW graph. Every pair marked adjacent in
// default_cow_adjacency touches (Chebyshev distance 1 at a junction); every
// non-adjacent pair keeps Chebyshev distance >= 3, so even 3x3x3 occurrence
// windows of distinct non-adjacent classes never overlap.
inline std::vector<Segment> toy_cow_segments() {
    std::vector<Segment> segs;
    auto add = [&](const char* name) -> std::vector<std::array<int, 2>>& {
        segs.push_back({name, {}});
        return segs.back().xy;
    };
    {
        auto& v = add("L-ICA");
        vline(v, 10, 13, 23);
    }
    {
        auto& v = add("R-ICA");
        vline(v, 38, 13, 23);
    }
    {
        auto& v = add("L-ACA1");
        vline(v, 10, 24, 30);
        hline(v, 30, 11, 24);
    }
    {
        auto& v = add("R-ACA1");
        vline(v, 38, 24, 30);
        hline(v, 30, 25, 37);
    }
    {
        auto& v = add("L-ACA2");
        vline(v, 22, 31, 38);
    }
    {
        auto& v = add("R-ACA2");
        vline(v, 27, 31, 38);
    }
    {
        auto& v = add("Acom");
        vline(v, 24, 31, 34);
        v.push_back({23, 35});
        v.push_back({25, 35});
        v.push_back({26, 35});
    }
    {
        auto& v = add("L-MCA");
        hline(v, 21, 3, 9);
    }
    {
        auto& v = add("R-MCA");
        hline(v, 21, 39, 45);
    }
    {
        auto& v = add("L-Pcom");
        hline(v, 13, 11, 14);
        v.push_back({14, 12});
        v.push_back({14, 11});
    }
    {
        auto& v = add("R-Pcom");
        hline(v, 13, 34, 37);
        v.push_back({34, 12});
        v.push_back({34, 11});
    }
    {
        auto& v = add("L-PCA1");
        hline(v, 10, 14, 24);
    }
    {
        auto& v = add("R-PCA1");
        hline(v, 10, 25, 34);
    }
    {
        auto& v = add("L-PCA2");
        hline(v, 10, 5, 13);
    }
    {
        auto& v = add("R-PCA2");
        hline(v, 10, 35, 43);
    }
    {
        auto& v = add("BA");
        vline(v, 24, 2, 9);
    }
    {
        auto& v = add("L-SCA");
        hline(v, 6, 17, 23);
    }
    {
        auto& v = add("R-SCA");
        hline(v, 3, 25, 31);
    }
    {
        auto& v = add("L-AChA");
        hline(v, 17, 11, 16);
    }
    {
        auto& v = add("R-AChA");
        hline(v, 17, 32, 37);
    }
    return segs;
}

}  // namespace detail

constexpr Dims3 kToyCowMinDims{49, 42, 7};

// Maps CLI-style variant flags ("no-pcom-left") to class names; plain class
// names pass through.
inline std::string resolve_variant(const std::string& flag, const ClassScheme& scheme) {
    if (scheme.has(flag)) return flag;
    static const std::pair<const char*, const char*> kAlias[] = {
        {"no-pcom-left", "L-Pcom"},   {"no-pcom-right", "R-Pcom"},
        {"no-acha-left", "L-AChA"},   {"no-acha-right", "R-AChA"},
        {"no-acom", "Acom"},
    };
    for (const auto& [a, name] : kAlias)
        if (flag == a) return name;
    throw std::invalid_argument("unknown phantom variant: " + flag);
}

inline LabelVolume make_toy_cow(const PhantomSpec& spec) {
    const ClassScheme scheme = default_cow_scheme();
    Dims3 d = spec.dims;
    if (d.h < kToyCowMinDims.h || d.w < kToyCowMinDims.w || d.d < kToyCowMinDims.d)
        throw std::invalid_argument("make_toy_cow: dims must be at least 49x42x7");
    std::set<std::string> absent;
    for (const auto& flag : spec.absent) absent.insert(resolve_variant(flag, scheme));

    LabelVolume out(d, spec.spacing, scheme.num_classes());
    const int z = d.d / 2;
    for (const auto& seg : detail::toy_cow_segments()) {
        if (absent.count(seg.name)) continue;
        const std::uint16_t id = std::uint16_t(scheme.id_of(seg.name));
        for (const auto& [x, y] : seg.xy) {
            if (out(x, y, z) != 0)
                throw std::logic_error("make_toy_cow: overlapping segments");
            out(x, y, z) = id;
        }
    }
    return out;
}

inline LabelVolume make_phantom(const PhantomSpec& spec) {
    switch (spec.kind) {
        case PhantomKind::tube: return make_tube(spec);
        case PhantomKind::torus: return make_torus(spec);
        case PhantomKind::shell: return make_shell(spec);
        case PhantomKind::toy_cow: return make_toy_cow(spec);
    }
    throw std::invalid_argument("make_phantom: bad kind");
}

// ---------------------------------------------------------------------------
// Perturbations.
// ---------------------------------------------------------------------------

namespace detail {

inline int longest_axis_of_class(const LabelVolume& vol, int cls) {
    int lo[3] = {1 << 30, 1 << 30, 1 << 30}, hi[3] = {-1, -1, -1};
    const Dims3 d = vol.dims();
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (vol(x, y, z) != cls) continue;
                int p[3] = {x, y, z};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], p[a]);
                    hi[a] = std::max(hi[a], p[a]);
                }
            }
    if (hi[0] < 0) throw std::invalid_argument("class absent from volume");
    int best = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[a] - lo[a] > hi[best] - lo[best]) best = a;
    return best;
}

}  // namespace detail

// Removes the slab of `class_id` voxels whose coordinate along the class's
// longest axis lies in [position, position + width).
inline LabelVolume inject_break(const LabelVolume& vol, int class_id, int position,
                                int width = 1) {
    if (width < 1) throw std::invalid_argument("inject_break: width must be >= 1");
    int axis = detail::longest_axis_of_class(vol, class_id);
    LabelVolume out = vol;
    const Dims3 d = vol.dims();
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (vol(x, y, z) != class_id) continue;
                int p[3] = {x, y, z};
                if (p[axis] >= position && p[axis] < position + width) out(x, y, z) = 0;
            }
    return out;
}

// Relabels from_class voxels inside the inclusive box [lo, hi] as to_class.
inline LabelVolume swap_labels(const LabelVolume& vol, std::array<int, 3> lo,
                               std::array<int, 3> hi, int from_class, int to_class) {
    if (to_class < 0 || to_class >= vol.num_classes())
        throw std::invalid_argument("swap_labels: bad target class");
    LabelVolume out = vol;
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x)
                if (out.grid().in_bounds(x, y, z) && out(x, y, z) == from_class)
                    out(x, y, z) = std::uint16_t(to_class);
    return out;
}

enum class JitterMode { remove, add };

// Toggles exactly n boundary voxels of the class without changing its
// component count; candidates that would split (or merge) the class are
// rejected and redrawn.
inline LabelVolume jitter_boundary(const LabelVolume& vol, int class_id, int n_voxels,
                                   std::uint64_t seed, JitterMode mode = JitterMode::remove) {
    LabelVolume out = vol;
    std::mt19937_64 rng(seed);
    const Dims3 d = vol.dims();
    long b0 = betti_numbers(out.class_mask(class_id)).b0;

    for (int done = 0; done < n_voxels;) {
        std::vector<std::int64_t> candidates;
        BinaryVolume mask = out.class_mask(class_id);
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.w; ++y)
                for (int x = 0; x < d.h; ++x) {
                    static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                                  {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    if (mode == JitterMode::remove ? mask(x, y, z) == 0 : out(x, y, z) != 0)
                        continue;
                    for (const auto& o : off) {
                        int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                        bool nb = mask.in_bounds(xx, yy, zz) && mask(xx, yy, zz) != 0;
                        // remove: class voxel touching non-class; add: free voxel touching class
                        if (mode == JitterMode::remove ? !nb : nb) {
                            candidates.push_back(mask.index(x, y, z));
                            break;
                        }
                    }
                }
        if (candidates.empty())
            throw std::runtime_error("jitter_boundary: no candidates left");
        bool applied = false;
        // bounded redraw, then rebuild the candidate list
        for (int attempt = 0; attempt < 64 && !candidates.empty(); ++attempt) {
            size_t pick = size_t(rng() % candidates.size());
            std::int64_t i = candidates[pick];
            candidates.erase(candidates.begin() + long(pick));
            std::uint16_t before = out[i];
            out[i] = mode == JitterMode::remove ? 0 : std::uint16_t(class_id);
            if (betti_numbers(out.class_mask(class_id)).b0 == b0) {
                ++done;
                applied = true;
                break;
            }
            out[i] = before;
        }
        if (!applied)
            throw std::runtime_error("jitter_boundary: could not preserve component count");
    }
    return out;
}

}  // namespace vt
