#pragma once

// Class scheme for multiclass vascular labeling: background plus named artery
// segments, each carrying a size group and a laterality tag.

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace vt {

enum class SizeGroup { large, medium, small_ };
enum class Laterality { left, right, midline };

inline std::string to_string(SizeGroup g) {
    switch (g) {
        case SizeGroup::large: return "large";
        case SizeGroup::medium: return "medium";
        default: return "small";
    }
}
inline SizeGroup size_group_from_string(const std::string& s) {
    if (s == "large") return SizeGroup::large;
    if (s == "medium") return SizeGroup::medium;
    if (s == "small") return SizeGroup::small_;
    throw std::runtime_error("unknown size group: " + s);
}
inline std::string to_string(Laterality l) {
    switch (l) {
        case Laterality::left: return "left";
        case Laterality::right: return "right";
        default: return "midline";
    }
}
inline Laterality laterality_from_string(const std::string& s) {
    if (s == "left") return Laterality::left;
    if (s == "right") return Laterality::right;
    if (s == "midline") return Laterality::midline;
    throw std::runtime_error("unknown laterality: " + s);
}

class ClassScheme {
public:
    struct ForegroundClass {
        std::string name;
        SizeGroup size;
        Laterality side;
    };

    ClassScheme() = default;
    explicit ClassScheme(std::vector<ForegroundClass> classes) : classes_(std::move(classes)) {
        if (classes_.empty())
            throw std::invalid_argument("ClassScheme: need at least one foreground class");
        for (size_t i = 0; i < classes_.size(); ++i) {
            if (classes_[i].name.empty())
                throw std::invalid_argument("ClassScheme: empty class name");
            auto [it, fresh] = by_name_.emplace(classes_[i].name, int(i) + 1);
            if (!fresh)
                throw std::invalid_argument("ClassScheme: duplicate class name " + classes_[i].name);
        }
    }

    // Total class count including background (id 0).
    int num_classes() const { return int(classes_.size()) + 1; }
    int num_foreground() const { return int(classes_.size()); }

    // Class ids are 1-based; background has no entry here.
    const ForegroundClass& cls(int id) const {
        if (id < 1 || id >= num_classes())
            throw std::out_of_range("ClassScheme: bad foreground class id");
        return classes_[size_t(id) - 1];
    }
    const std::string& name(int id) const { return cls(id).name; }
    SizeGroup size_group(int id) const { return cls(id).size; }
    Laterality laterality(int id) const { return cls(id).side; }

    int id_of(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end())
            throw std::runtime_error("ClassScheme: unknown class name " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    std::vector<int> ids_in_group(SizeGroup g) const {
        std::vector<int> out;
        for (int id = 1; id < num_classes(); ++id)
            if (size_group(id) == g) out.push_back(id);
        return out;
    }

    bool operator==(const ClassScheme& o) const {
        if (classes_.size() != o.classes_.size()) return false;
        for (size_t i = 0; i < classes_.size(); ++i) {
            if (classes_[i].name != o.classes_[i].name ||
                classes_[i].size != o.classes_[i].size ||
                classes_[i].side != o.classes_[i].side)
                return false;
        }
        return true;
    }

private:
    std::vector<ForegroundClass> classes_;
    std::map<std::string, int> by_name_;
};

// Built-in 21-class Circle of Willis scheme: 20 artery segments + background.
// Size groups: large = ICA, BA; medium = ACA, MCA, PCA, SCA; small = Pcom, Acom, AChA.
inline ClassScheme default_cow_scheme() {
    using L = Laterality;
    using S = SizeGroup;
    return ClassScheme({
        {"L-ICA", S::large, L::left},    // 1
        {"R-ICA", S::large, L::right},   // 2
        {"L-ACA1", S::medium, L::left},  // 3
        {"R-ACA1", S::medium, L::right}, // 4
        {"L-ACA2", S::medium, L::left},  // 5
        {"R-ACA2", S::medium, L::right}, // 6
        {"Acom", S::small_, L::midline}, // 7
        {"L-MCA", S::medium, L::left},   // 8
        {"R-MCA", S::medium, L::right},  // 9
        {"L-Pcom", S::small_, L::left},  // 10
        {"R-Pcom", S::small_, L::right}, // 11
        {"L-PCA1", S::medium, L::left},  // 12
        {"R-PCA1", S::medium, L::right}, // 13
        {"L-PCA2", S::medium, L::left},  // 14
        {"R-PCA2", S::medium, L::right}, // 15
        {"BA", S::large, L::midline},    // 16
        {"L-SCA", S::medium, L::left},   // 17
        {"R-SCA", S::medium, L::right},  // 18
        {"L-AChA", S::small_, L::left},  // 19
        {"R-AChA", S::small_, L::right}, // 20
    });
}

inline nlohmann::json scheme_to_json(const ClassScheme& s) {
    nlohmann::json classes = nlohmann::json::array();
    for (int id = 1; id < s.num_classes(); ++id) {
        classes.push_back({{"id", id},
                           {"name", s.name(id)},
                           {"size", to_string(s.size_group(id))},
                           {"side", to_string(s.laterality(id))}});
    }
    return {{"classes", classes}};
}

inline ClassScheme scheme_from_json(const nlohmann::json& j) {
    if (!j.contains("classes") || !j["classes"].is_array())
        throw std::runtime_error("scheme config: missing \"classes\" array");
    std::vector<ClassScheme::ForegroundClass> classes;
    int expect = 1;
    for (const auto& c : j["classes"]) {
        int id = c.at("id").get<int>();
        if (id != expect)
            throw std::runtime_error("scheme config: class ids must be contiguous from 1, got " +
                                     std::to_string(id));
        classes.push_back({c.at("name").get<std::string>(),
                           size_group_from_string(c.at("size").get<std::string>()),
                           laterality_from_string(c.at("side").get<std::string>())});
        ++expect;
    }
    return ClassScheme(std::move(classes));
}

inline ClassScheme load_scheme(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open scheme file: " + path);
    nlohmann::json j;
    f >> j;
    return scheme_from_json(j);
}

inline void save_scheme(const ClassScheme& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write scheme file: " + path);
    f << scheme_to_json(s).dump(2) << "\n";
}

}  // namespace vt
