#pragma once

// Connected components and Betti numbers of binary volumes. Foreground uses
// 26-connectivity, background 6-connectivity, and the Euler characteristic is
// counted over the complex of closed unit cubes, which keeps components,
// cavities, and chi mutually consistent.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vesseltopo/volume.hpp"

namespace vt {

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::int64_t n) : parent_(size_t(n)) {
        std::iota(parent_.begin(), parent_.end(), std::int64_t(0));
    }
    std::int64_t find(std::int64_t x) {
        while (parent_[size_t(x)] != x) {
            parent_[size_t(x)] = parent_[size_t(parent_[size_t(x)])];
            x = parent_[size_t(x)];
        }
        return x;
    }
    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[size_t(std::max(a, b))] = std::min(a, b);
    }

private:
    std::vector<std::int64_t> parent_;
};

}  // namespace detail

struct ComponentLabels {
    Grid3<std::int32_t> labels;  // 0 = background, components numbered from 1
    int count = 0;
};

// Union-find labeling. Labels are assigned in first-voxel scan order, so the
// output is deterministic.
inline ComponentLabels connected_components(const BinaryVolume& mask, int connectivity) {
    if (connectivity != 6 && connectivity != 26)
        throw std::invalid_argument("connected_components: connectivity must be 6 or 26");
    const Dims3 d = mask.dims();
    detail::UnionFind uf(mask.size());

    // merge with already-scanned neighbors (negative lexicographic offsets)
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (!mask(x, y, z)) continue;
                std::int64_t i = mask.index(x, y, z);
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)))) continue;
                            if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1)
                                continue;
                            int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (!mask.in_bounds(xx, yy, zz) || !mask(xx, yy, zz)) continue;
                            uf.unite(i, mask.index(xx, yy, zz));
                        }
            }

    ComponentLabels out{Grid3<std::int32_t>(d, 0), 0};
    std::vector<std::int32_t> remap(size_t(mask.size()), 0);
    for (std::int64_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        std::int64_t r = uf.find(i);
        if (remap[size_t(r)] == 0) remap[size_t(r)] = ++out.count;
        out.labels[i] = remap[size_t(r)];
    }
    return out;
}

// chi = V - E + F - C over closed unit cubes of foreground voxels.
inline long euler_characteristic(const BinaryVolume& mask) {
    const Dims3 d = mask.dims();
    // cell grids sized one past the voxel grid; edges/faces tagged by axis
    const int vh = d.h + 1, vw = d.w + 1, vd = d.d + 1;
    auto vidx = [&](int x, int y, int z) {
        return std::int64_t(x) + std::int64_t(vh) * (y + std::int64_t(vw) * z);
    };
    std::vector<std::uint8_t> verts(size_t(vh) * vw * vd, 0);
    std::vector<std::uint8_t> edges[3], faces[3];
    for (int a = 0; a < 3; ++a) {
        edges[a].assign(size_t(vh) * vw * vd, 0);
        faces[a].assign(size_t(vh) * vw * vd, 0);
    }
    long cubes = 0;

    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (!mask(x, y, z)) continue;
                ++cubes;
                for (int cz = 0; cz <= 1; ++cz)
                    for (int cy = 0; cy <= 1; ++cy)
                        for (int cx = 0; cx <= 1; ++cx)
                            verts[size_t(vidx(x + cx, y + cy, z + cz))] = 1;
                // edges along x at (x, y+cy, z+cz), etc.
                for (int c1 = 0; c1 <= 1; ++c1)
                    for (int c2 = 0; c2 <= 1; ++c2) {
                        edges[0][size_t(vidx(x, y + c1, z + c2))] = 1;
                        edges[1][size_t(vidx(x + c1, y, z + c2))] = 1;
                        edges[2][size_t(vidx(x + c1, y + c2, z))] = 1;
                    }
                // faces normal to each axis at offset 0/1 along that axis
                for (int c = 0; c <= 1; ++c) {
                    faces[0][size_t(vidx(x + c, y, z))] = 1;
                    faces[1][size_t(vidx(x, y + c, z))] = 1;
                    faces[2][size_t(vidx(x, y, z + c))] = 1;
                }
            }

    long nv = 0, ne = 0, nf = 0;
    for (auto b : verts) nv += b;
    for (int a = 0; a < 3; ++a) {
        for (auto b : edges[a]) ne += b;
        for (auto b : faces[a]) nf += b;
    }
    return nv - ne + nf - cubes;
}

struct BettiNumbers {
    long b0 = 0;  // connected components
    long b1 = 0;  // tunnels
    long b2 = 0;  // enclosed cavities
    bool operator==(const BettiNumbers&) const = default;
};

// b0: 26-connected foreground components. b2: 6-connected background
// components not touching the volume boundary. b1 recovered from chi.
inline BettiNumbers betti_numbers(const BinaryVolume& mask) {
    BettiNumbers b;
    b.b0 = connected_components(mask, 26).count;

    BinaryVolume bg(mask.dims());
    for (std::int64_t i = 0; i < mask.size(); ++i) bg[i] = mask[i] ? 0 : 1;
    ComponentLabels bgc = connected_components(bg, 6);
    std::vector<std::uint8_t> touches_border(size_t(bgc.count) + 1, 0);
    const Dims3 d = mask.dims();
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.w; ++y)
            for (int x = 0; x < d.h; ++x) {
                if (x != 0 && x != d.h - 1 && y != 0 && y != d.w - 1 && z != 0 && z != d.d - 1)
                    continue;
                std::int32_t l = bgc.labels(x, y, z);
                if (l > 0) touches_border[size_t(l)] = 1;
            }
    for (int l = 1; l <= bgc.count; ++l)
        if (!touches_border[size_t(l)]) ++b.b2;

    long chi = euler_characteristic(mask);
    b.b1 = b.b0 + b.b2 - chi;
    if (b.b1 < 0)
        throw std::logic_error("betti_numbers: negative b1, connectivity invariant violated");
    return b;
}

struct BettiErrors {
    long b0_error = 0;
    long b_error = 0;  // b0 error + b1 error
};

inline BettiErrors betti_errors(const BinaryVolume& pred, const BinaryVolume& gt) {
    if (!(pred.dims() == gt.dims()))
        throw std::invalid_argument("betti_errors: shape mismatch");
    BettiNumbers p = betti_numbers(pred);
    BettiNumbers g = betti_numbers(gt);
    BettiErrors e;
    e.b0_error = std::abs(p.b0 - g.b0);
    e.b_error = e.b0_error + std::abs(p.b1 - g.b1);
    return e;
}

}  // namespace vt
