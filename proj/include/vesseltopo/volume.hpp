#pragma once

// Dense 3D/4D volume containers shared by the whole library.
// Index convention: linear voxel index v = x + H*(y + W*z) for dims (H, W, D).
// Channel volumes store channel-major planes: element (c, v) at data[c*voxels + v].

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vt {

struct VoxelSpacing {
    double dx = 1.0, dy = 1.0, dz = 1.0;

    VoxelSpacing() = default;
    VoxelSpacing(double x, double y, double z) : dx(x), dy(y), dz(z) {
        if (!(dx > 0 && dy > 0 && dz > 0) ||
            !std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dz))
            throw std::invalid_argument("VoxelSpacing: components must be positive and finite");
    }
    double operator[](int axis) const {
        return axis == 0 ? dx : axis == 1 ? dy : dz;
    }
    double min() const { return std::min(dx, std::min(dy, dz)); }
    bool operator==(const VoxelSpacing&) const = default;
};

struct Dims3 {
    int h = 0, w = 0, d = 0;
    bool operator==(const Dims3&) const = default;
    std::int64_t voxels() const { return std::int64_t(h) * w * d; }
    int operator[](int axis) const { return axis == 0 ? h : axis == 1 ? w : d; }
};

// Dense scalar field over a 3D grid.
template <typename T>
class Grid3 {
public:
    Grid3() = default;
    Grid3(Dims3 dims, T fill = T{}) : dims_(dims), data_(check_size(dims), fill) {}
    Grid3(int h, int w, int d, T fill = T{}) : Grid3(Dims3{h, w, d}, fill) {}

    const Dims3& dims() const { return dims_; }
    std::int64_t size() const { return std::int64_t(data_.size()); }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims_.h && y >= 0 && y < dims_.w && z >= 0 && z < dims_.d;
    }
    std::int64_t index(int x, int y, int z) const {
        return x + std::int64_t(dims_.h) * (y + std::int64_t(dims_.w) * z);
    }
    std::array<int, 3> coords(std::int64_t i) const {
        int x = int(i % dims_.h);
        std::int64_t r = i / dims_.h;
        return {x, int(r % dims_.w), int(r / dims_.w)};
    }

    T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
    T& operator[](std::int64_t i) { return data_[size_t(i)]; }
    const T& operator[](std::int64_t i) const { return data_[size_t(i)]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Grid3&) const = default;

private:
    static size_t check_size(Dims3 d) {
        if (d.h < 1 || d.w < 1 || d.d < 1)
            throw std::invalid_argument("Grid3: all dims must be >= 1");
        return size_t(d.voxels());
    }
    Dims3 dims_{};
    std::vector<T> data_;
};

using BinaryVolume = Grid3<std::uint8_t>;
using ScalarField = Grid3<double>;

// Multichannel field over a 3D grid, channel-major.
template <typename T>
class Channels {
public:
    Channels() = default;
    Channels(int c, Dims3 dims, T fill = T{})
        : c_(c), dims_(dims), voxels_(dims.voxels()),
          data_(check_size(c, dims), fill) {}

    int channels() const { return c_; }
    const Dims3& dims() const { return dims_; }
    std::int64_t voxels() const { return voxels_; }
    std::int64_t size() const { return std::int64_t(data_.size()); }

    std::int64_t index(int c, int x, int y, int z) const {
        return std::int64_t(c) * voxels_ + x + std::int64_t(dims_.h) * (y + std::int64_t(dims_.w) * z);
    }
    T& operator()(int c, int x, int y, int z) { return data_[index(c, x, y, z)]; }
    const T& operator()(int c, int x, int y, int z) const { return data_[index(c, x, y, z)]; }
    T& at(int c, std::int64_t v) { return data_[std::int64_t(c) * voxels_ + v]; }
    const T& at(int c, std::int64_t v) const { return data_[std::int64_t(c) * voxels_ + v]; }
    T& operator[](std::int64_t i) { return data_[size_t(i)]; }
    const T& operator[](std::int64_t i) const { return data_[size_t(i)]; }

    T* channel(int c) { return data_.data() + std::int64_t(c) * voxels_; }
    const T* channel(int c) const { return data_.data() + std::int64_t(c) * voxels_; }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Channels&) const = default;

private:
    static size_t check_size(int c, Dims3 d) {
        if (c < 1) throw std::invalid_argument("Channels: channel count must be >= 1");
        if (d.h < 1 || d.w < 1 || d.d < 1)
            throw std::invalid_argument("Channels: all dims must be >= 1");
        return size_t(c) * size_t(d.voxels());
    }
    int c_ = 0;
    Dims3 dims_{};
    std::int64_t voxels_ = 0;
    std::vector<T> data_;
};

// Per-voxel class probabilities, C channels including background (channel 0).
class ProbVolume : public Channels<double> {
public:
    ProbVolume() = default;
    ProbVolume(int c, Dims3 dims, double fill = 0.0) : Channels<double>(c, dims, fill) {}

    // True when every voxel carries a probability simplex over the channels.
    bool is_simplex(double tol = 1e-5) const {
        for (std::int64_t v = 0; v < voxels(); ++v) {
            double s = 0.0;
            for (int c = 0; c < channels(); ++c) {
                double p = at(c, v);
                if (p < -tol || p > 1.0 + tol) return false;
                s += p;
            }
            if (std::abs(s - 1.0) > tol) return false;
        }
        return true;
    }
};

// Integer ground-truth labels with physical spacing.
class LabelVolume {
public:
    LabelVolume() = default;
    LabelVolume(Dims3 dims, VoxelSpacing spacing, int num_classes)
        : grid_(dims, 0), spacing_(spacing), num_classes_(num_classes) {
        if (num_classes < 2)
            throw std::invalid_argument("LabelVolume: need at least background + 1 class");
    }

    const Dims3& dims() const { return grid_.dims(); }
    const VoxelSpacing& spacing() const { return spacing_; }
    int num_classes() const { return num_classes_; }
    std::int64_t voxels() const { return grid_.size(); }

    std::uint16_t& operator()(int x, int y, int z) { return grid_(x, y, z); }
    std::uint16_t operator()(int x, int y, int z) const { return grid_(x, y, z); }
    std::uint16_t& operator[](std::int64_t i) { return grid_[i]; }
    std::uint16_t operator[](std::int64_t i) const { return grid_[i]; }
    const Grid3<std::uint16_t>& grid() const { return grid_; }

    void validate() const {
        for (std::int64_t i = 0; i < grid_.size(); ++i)
            if (grid_[i] >= num_classes_)
                throw std::runtime_error("LabelVolume: label " + std::to_string(grid_[i]) +
                                         " >= num_classes " + std::to_string(num_classes_));
    }

    BinaryVolume class_mask(int cls) const {
        BinaryVolume m(dims());
        for (std::int64_t i = 0; i < grid_.size(); ++i) m[i] = grid_[i] == cls ? 1 : 0;
        return m;
    }
    BinaryVolume foreground_mask() const {
        BinaryVolume m(dims());
        for (std::int64_t i = 0; i < grid_.size(); ++i) m[i] = grid_[i] != 0 ? 1 : 0;
        return m;
    }

    bool operator==(const LabelVolume&) const = default;

private:
    Grid3<std::uint16_t> grid_;
    VoxelSpacing spacing_;
    int num_classes_ = 0;
};

inline std::int64_t count_nonzero(const BinaryVolume& m) {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < m.size(); ++i) n += m[i] != 0;
    return n;
}

// One-hot expansion over all classes including background.
inline ProbVolume one_hot(const LabelVolume& labels) {
    labels.validate();
    ProbVolume p(labels.num_classes(), labels.dims(), 0.0);
    for (std::int64_t v = 0; v < labels.voxels(); ++v) p.at(labels[v], v) = 1.0;
    return p;
}

// Voxelwise argmax back to labels; ties resolve to the lowest channel.
inline LabelVolume argmax_labels(const ProbVolume& p, VoxelSpacing spacing) {
    LabelVolume out(p.dims(), spacing, p.channels());
    for (std::int64_t v = 0; v < p.voxels(); ++v) {
        int best = 0;
        double bv = p.at(0, v);
        for (int c = 1; c < p.channels(); ++c)
            if (p.at(c, v) > bv) { bv = p.at(c, v); best = c; }
        out[v] = std::uint16_t(best);
    }
    return out;
}

}  // namespace vt
