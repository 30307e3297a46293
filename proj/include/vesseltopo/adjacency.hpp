#pragma once

// Binary anatomical adjacency prior over foreground classes. Row/column i
// corresponds to foreground class id i+1 of the scheme; background is excluded.

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vesseltopo/scheme.hpp"

namespace vt {

class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(int n) : n_(n), a_(size_t(n) * size_t(n), 0) {
        if (n < 1) throw std::invalid_argument("AdjacencyMatrix: n must be >= 1");
    }

    int n() const { return n_; }

    // Indices are 0-based over foreground classes (class id - 1).
    std::uint8_t operator()(int i, int j) const { return a_[size_t(i) * n_ + j]; }
    bool adjacent(int i, int j) const { return (*this)(i, j) != 0; }

    void set_pair(int i, int j) {
        check(i); check(j);
        if (i == j) throw std::invalid_argument("AdjacencyMatrix: self-pair not allowed");
        a_[size_t(i) * n_ + j] = 1;
        a_[size_t(j) * n_ + i] = 1;
    }
    void clear_pair(int i, int j) {
        check(i); check(j);
        a_[size_t(i) * n_ + j] = 0;
        a_[size_t(j) * n_ + i] = 0;
    }

    bool is_symmetric_zero_diagonal() const {
        for (int i = 0; i < n_; ++i) {
            if ((*this)(i, i) != 0) return false;
            for (int j = 0; j < i; ++j)
                if ((*this)(i, j) != (*this)(j, i)) return false;
        }
        return true;
    }

    // Number of ones in the off-diagonal complement, both orders counted.
    std::int64_t complement_count() const {
        std::int64_t total = std::int64_t(n_) * (n_ - 1);
        std::int64_t ones = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (i != j && adjacent(i, j)) ++ones;
        return total - ones;
    }

    std::vector<std::pair<int, int>> pairs() const {  // unordered, i < j
        std::vector<std::pair<int, int>> out;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (adjacent(i, j)) out.emplace_back(i, j);
        return out;
    }

    bool operator==(const AdjacencyMatrix&) const = default;

private:
    void check(int i) const {
        if (i < 0 || i >= n_) throw std::out_of_range("AdjacencyMatrix: index out of range");
    }
    int n_ = 0;
    std::vector<std::uint8_t> a_;
};

// Built-in adjacency for the default 21-class CoW scheme. Junction pairs follow
// the segment definitions: ACA1 runs from the ICA bifurcation to the Acom, ACA2
// from the Acom onward, PCA1 from the BA to the Pcom, PCA2 beyond it. Bilateral
// ACA1 and PCA1 meet their contralateral twins at the midline junctions.
inline AdjacencyMatrix default_cow_adjacency(const ClassScheme& scheme) {
    if (!(scheme == default_cow_scheme()))
        throw std::runtime_error(
            "default_cow_adjacency: non-default scheme requires an explicit adjacency file");

    static const std::pair<const char*, const char*> kPairs[] = {
        {"L-ICA", "L-ACA1"},  {"R-ICA", "R-ACA1"},
        {"L-ICA", "L-MCA"},   {"R-ICA", "R-MCA"},
        {"L-ICA", "L-Pcom"},  {"R-ICA", "R-Pcom"},
        {"L-ICA", "L-AChA"},  {"R-ICA", "R-AChA"},
        {"L-ACA1", "Acom"},   {"R-ACA1", "Acom"},
        {"L-ACA2", "Acom"},   {"R-ACA2", "Acom"},
        {"L-ACA1", "L-ACA2"}, {"R-ACA1", "R-ACA2"},
        {"L-Pcom", "L-PCA1"}, {"R-Pcom", "R-PCA1"},
        {"L-Pcom", "L-PCA2"}, {"R-Pcom", "R-PCA2"},
        {"L-PCA1", "L-PCA2"}, {"R-PCA1", "R-PCA2"},
        {"BA", "L-PCA1"},     {"BA", "R-PCA1"},
        {"BA", "L-SCA"},      {"BA", "R-SCA"},
        {"L-ACA1", "R-ACA1"}, {"L-PCA1", "R-PCA1"},
    };

    AdjacencyMatrix a(scheme.num_foreground());
    for (const auto& [p, q] : kPairs) a.set_pair(scheme.id_of(p) - 1, scheme.id_of(q) - 1);
    return a;
}

inline nlohmann::json adjacency_to_json(const AdjacencyMatrix& a, const ClassScheme& scheme) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [i, j] : a.pairs())
        pairs.push_back({scheme.name(i + 1), scheme.name(j + 1)});
    return {{"pairs", pairs}};
}

inline AdjacencyMatrix adjacency_from_json(const nlohmann::json& j, const ClassScheme& scheme) {
    AdjacencyMatrix a(scheme.num_foreground());
    if (j.contains("pairs")) {
        for (const auto& p : j["pairs"]) {
            if (!p.is_array() || p.size() != 2)
                throw std::runtime_error("adjacency config: each pair must be a 2-element array");
            const auto na = p[0].get<std::string>();
            const auto nb = p[1].get<std::string>();
            if (!scheme.has(na)) throw std::runtime_error("adjacency config: unknown class " + na);
            if (!scheme.has(nb)) throw std::runtime_error("adjacency config: unknown class " + nb);
            if (na == nb) throw std::runtime_error("adjacency config: self-pair " + na);
            a.set_pair(scheme.id_of(na) - 1, scheme.id_of(nb) - 1);
        }
        return a;
    }
    if (j.contains("matrix")) {
        const auto& m = j["matrix"];
        const int n = scheme.num_foreground();
        if (int(m.size()) != n)
            throw std::runtime_error("adjacency config: matrix size does not match scheme");
        AdjacencyMatrix out(n);
        for (int i = 0; i < n; ++i) {
            if (int(m[i].size()) != n)
                throw std::runtime_error("adjacency config: matrix is not square");
            for (int jj = 0; jj < n; ++jj) {
                int v = m[i][jj].get<int>();
                if (v != 0 && v != 1)
                    throw std::runtime_error("adjacency config: entries must be 0 or 1");
                if (v != m[jj][i].get<int>())
                    throw std::runtime_error("adjacency config: explicit matrix must be symmetric");
                if (v == 1 && i == jj)
                    throw std::runtime_error("adjacency config: nonzero diagonal");
                if (v == 1 && i < jj) out.set_pair(i, jj);
            }
        }
        return out;
    }
    throw std::runtime_error("adjacency config: need \"pairs\" or \"matrix\"");
}

inline AdjacencyMatrix load_adjacency(const std::string& path, const ClassScheme& scheme) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open adjacency file: " + path);
    nlohmann::json j;
    f >> j;
    return adjacency_from_json(j, scheme);
}

inline void save_adjacency(const AdjacencyMatrix& a, const ClassScheme& scheme,
                           const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write adjacency file: " + path);
    f << adjacency_to_json(a, scheme).dump(2) << "\n";
}

}  // namespace vt
