#pragma once

// Volume file I/O: single-file NIfTI-1 (.nii, .nii.gz) and a raw+JSON-sidecar
// format. Only pixdim is consumed from the header; the affine is stored and
// passed through untouched. Gzip handled by zlib; gzread is transparent, so
// plain and compressed files go through the same path.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "vesseltopo/volume.hpp"

namespace vt {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct UnsupportedDtypeError : IoError {
    using IoError::IoError;
};
struct TruncatedFileError : IoError {
    using IoError::IoError;
};

namespace detail {

#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr;     // 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope, scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration, toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];  // "n+1\0"
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

inline void bswap2(void* p) {
    auto* b = static_cast<std::uint8_t*>(p);
    std::swap(b[0], b[1]);
}
inline void bswap4(void* p) {
    auto* b = static_cast<std::uint8_t*>(p);
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
}

inline void swap_header(NiftiHeader& h) {
    bswap4(&h.sizeof_hdr);
    bswap4(&h.extents);
    bswap2(&h.session_error);
    for (auto& v : h.dim) bswap2(&v);
    bswap4(&h.intent_p1);
    bswap4(&h.intent_p2);
    bswap4(&h.intent_p3);
    bswap2(&h.intent_code);
    bswap2(&h.datatype);
    bswap2(&h.bitpix);
    bswap2(&h.slice_start);
    for (auto& v : h.pixdim) bswap4(&v);
    bswap4(&h.vox_offset);
    bswap4(&h.scl_slope);
    bswap4(&h.scl_inter);
    bswap2(&h.slice_end);
    bswap4(&h.cal_max);
    bswap4(&h.cal_min);
    bswap4(&h.slice_duration);
    bswap4(&h.toffset);
    bswap4(&h.glmax);
    bswap4(&h.glmin);
    bswap2(&h.qform_code);
    bswap2(&h.sform_code);
    bswap4(&h.quatern_b);
    bswap4(&h.quatern_c);
    bswap4(&h.quatern_d);
    bswap4(&h.qoffset_x);
    bswap4(&h.qoffset_y);
    bswap4(&h.qoffset_z);
    for (auto& v : h.srow_x) bswap4(&v);
    for (auto& v : h.srow_y) bswap4(&v);
    for (auto& v : h.srow_z) bswap4(&v);
}

inline std::vector<char> read_file_bytes(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<char> out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    bool err = n < 0;
    gzclose(f);
    if (err) throw IoError("read error on " + path);
    return out;
}

inline void write_file_bytes(const std::string& path, const char* data, size_t n) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw IoError("cannot open " + path + " for writing");
        size_t off = 0;
        while (off < n) {
            unsigned chunk = unsigned(std::min<size_t>(n - off, 1u << 24));
            if (gzwrite(f, data + off, chunk) != int(chunk)) {
                gzclose(f);
                throw IoError("write error on " + path);
            }
            off += chunk;
        }
        gzclose(f);
    } else {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + path + " for writing");
        f.write(data, std::streamsize(n));
        if (!f) throw IoError("write error on " + path);
    }
}

inline NiftiHeader make_header(Dims3 dims, int channels, VoxelSpacing sp,
                               std::int16_t datatype, std::int16_t bitpix) {
    NiftiHeader h;
    std::memset(&h, 0, sizeof h);
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = channels > 1 ? 4 : 3;
    h.dim[1] = std::int16_t(dims.h);
    h.dim[2] = std::int16_t(dims.w);
    h.dim[3] = std::int16_t(dims.d);
    h.dim[4] = std::int16_t(channels > 1 ? channels : 1);
    for (int i = 5; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = float(sp.dx);
    h.pixdim[2] = float(sp.dy);
    h.pixdim[3] = float(sp.dz);
    h.pixdim[4] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.xyzt_units = 2;  // NIFTI_UNITS_MM
    h.sform_code = 1;
    h.srow_x[0] = float(sp.dx);
    h.srow_y[1] = float(sp.dy);
    h.srow_z[2] = float(sp.dz);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

}  // namespace detail

// Decoded volume file: exactly one of labels / probs is populated.
struct VolumeData {
    bool is_labels = false;
    LabelVolume labels;
    ProbVolume probs;
    VoxelSpacing spacing;
};

namespace detail {

inline VolumeData decode_nifti(const std::vector<char>& bytes, const std::string& path,
                               int num_classes_hint) {
    if (bytes.size() < sizeof(NiftiHeader))
        throw TruncatedFileError(path + ": file shorter than NIfTI-1 header");
    NiftiHeader h;
    std::memcpy(&h, bytes.data(), sizeof h);
    bool swapped = false;
    if (h.sizeof_hdr != 348) {
        swap_header(h);
        swapped = true;
        if (h.sizeof_hdr != 348)
            throw BadMagicError(path + ": not a NIfTI-1 file (sizeof_hdr)");
    }
    if (std::memcmp(h.magic, "n+1", 3) != 0 || h.magic[3] != '\0')
        throw BadMagicError(path + ": bad magic, expected \"n+1\"");
    if (h.dim[0] < 3 || h.dim[0] > 4)
        throw IoError(path + ": only 3D/4D volumes supported, dim[0]=" +
                      std::to_string(h.dim[0]));

    Dims3 dims{h.dim[1], h.dim[2], h.dim[3]};
    int channels = h.dim[0] == 4 ? std::max<int>(1, h.dim[4]) : 1;
    if (dims.h < 1 || dims.w < 1 || dims.d < 1)
        throw IoError(path + ": non-positive dimension in header");
    VoxelSpacing sp;
    try {
        sp = VoxelSpacing(h.pixdim[1], h.pixdim[2], h.pixdim[3]);
    } catch (const std::invalid_argument&) {
        throw IoError(path + ": non-positive pixdim spacing");
    }

    size_t offset = size_t(std::max(352.0f, h.vox_offset));
    std::int64_t n = dims.voxels() * channels;
    size_t elem = 0;
    switch (h.datatype) {
        case kDtUint8: elem = 1; break;
        case kDtInt16: elem = 2; break;
        case kDtFloat32: elem = 4; break;
        default:
            throw UnsupportedDtypeError(path + ": unsupported datatype code " +
                                        std::to_string(h.datatype));
    }
    if (bytes.size() < offset + size_t(n) * elem)
        throw TruncatedFileError(path + ": payload shorter than declared dims");
    const char* payload = bytes.data() + offset;

    VolumeData out;
    out.spacing = sp;
    if (h.datatype == kDtFloat32) {
        out.probs = ProbVolume(channels, dims, 0.0);
        for (std::int64_t i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, payload + i * 4, 4);
            if (swapped) bswap4(&v);
            out.probs[i] = double(v);
        }
        return out;
    }
    if (channels != 1) throw IoError(path + ": label volumes must be 3D");
    out.is_labels = true;
    int max_label = 0;
    std::vector<std::uint16_t> vals(size_t(n), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        int v;
        if (h.datatype == kDtUint8) {
            v = std::uint8_t(payload[i]);
        } else {
            std::int16_t s;
            std::memcpy(&s, payload + i * 2, 2);
            if (swapped) bswap2(&s);
            if (s < 0) throw IoError(path + ": negative label value");
            v = s;
        }
        vals[size_t(i)] = std::uint16_t(v);
        max_label = std::max(max_label, v);
    }
    int num_classes = num_classes_hint > 0 ? num_classes_hint : std::max(2, max_label + 1);
    out.labels = LabelVolume(dims, sp, num_classes);
    for (std::int64_t i = 0; i < n; ++i) out.labels[i] = vals[size_t(i)];
    out.labels.validate();
    return out;
}

inline std::string sidecar_path(const std::string& raw_path) {
    return std::filesystem::path(raw_path).replace_extension(".json").string();
}

inline VolumeData read_raw(const std::string& path, int num_classes_hint) {
    nlohmann::json meta;
    {
        std::ifstream f(sidecar_path(path));
        if (!f) throw IoError("missing sidecar " + sidecar_path(path));
        try {
            f >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad sidecar " + sidecar_path(path) + ": " + e.what());
        }
    }
    std::string dtype = meta.at("dtype").get<std::string>();
    auto dv = meta.at("dims").get<std::vector<int>>();
    auto sv = meta.at("spacing").get<std::vector<double>>();
    if (dv.size() != 3 || sv.size() != 3)
        throw IoError(sidecar_path(path) + ": dims and spacing must have 3 entries");
    Dims3 dims{dv[0], dv[1], dv[2]};
    VoxelSpacing sp(sv[0], sv[1], sv[2]);
    int channels = meta.value("channels", 1);

    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());

    VolumeData out;
    out.spacing = sp;
    std::int64_t n = dims.voxels() * channels;
    if (dtype == "uint8") {
        if (channels != 1) throw IoError(path + ": label volumes must be single-channel");
        if (std::int64_t(bytes.size()) < n)
            throw TruncatedFileError(path + ": payload shorter than declared dims");
        int num_classes = meta.value("num_classes", 0);
        if (num_classes_hint > 0) num_classes = num_classes_hint;
        int max_label = 0;
        for (std::int64_t i = 0; i < n; ++i)
            max_label = std::max<int>(max_label, std::uint8_t(bytes[size_t(i)]));
        if (num_classes <= 0) num_classes = std::max(2, max_label + 1);
        out.is_labels = true;
        out.labels = LabelVolume(dims, sp, num_classes);
        for (std::int64_t i = 0; i < n; ++i) out.labels[i] = std::uint8_t(bytes[size_t(i)]);
        out.labels.validate();
    } else if (dtype == "float32") {
        if (std::int64_t(bytes.size()) < n * 4)
            throw TruncatedFileError(path + ": payload shorter than declared dims");
        out.probs = ProbVolume(channels, dims, 0.0);
        for (std::int64_t i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, bytes.data() + i * 4, 4);
            out.probs[i] = double(v);
        }
    } else {
        throw UnsupportedDtypeError(path + ": unsupported raw dtype " + dtype);
    }
    return out;
}

}  // namespace detail

inline bool is_raw_path(const std::string& path) {
    return std::filesystem::path(path).extension() == ".raw";
}

// num_classes_hint overrides label-range inference (pass the scheme size so a
// volume that happens to omit the highest class still validates against it).
inline VolumeData read_volume(const std::string& path, int num_classes_hint = 0) {
    if (is_raw_path(path)) return detail::read_raw(path, num_classes_hint);
    return detail::decode_nifti(detail::read_file_bytes(path), path, num_classes_hint);
}

inline void write_volume(const LabelVolume& vol, const std::string& path) {
    const Dims3 d = vol.dims();
    std::int64_t n = d.voxels();
    if (is_raw_path(path)) {
        std::vector<char> bytes(size_t(n), 0);
        for (std::int64_t i = 0; i < n; ++i) {
            if (vol[i] > 255) throw IoError("raw uint8 cannot hold label " + std::to_string(vol[i]));
            bytes[size_t(i)] = char(std::uint8_t(vol[i]));
        }
        detail::write_file_bytes(path, bytes.data(), bytes.size());
        nlohmann::json meta{{"format", "raw"},
                            {"dtype", "uint8"},
                            {"dims", {d.h, d.w, d.d}},
                            {"channels", 1},
                            {"spacing", {vol.spacing().dx, vol.spacing().dy, vol.spacing().dz}},
                            {"num_classes", vol.num_classes()}};
        std::ofstream f(detail::sidecar_path(path), std::ios::trunc);
        if (!f) throw IoError("cannot open " + detail::sidecar_path(path) + " for writing");
        f << meta.dump(2) << "\n";
        return;
    }
    bool wide = false;
    for (std::int64_t i = 0; i < n; ++i)
        if (vol[i] > 255) { wide = true; break; }
    detail::NiftiHeader h = detail::make_header(
        d, 1, vol.spacing(), wide ? detail::kDtInt16 : detail::kDtUint8, wide ? 16 : 8);
    std::vector<char> bytes(352 + size_t(n) * (wide ? 2 : 1), 0);
    std::memcpy(bytes.data(), &h, sizeof h);
    char* payload = bytes.data() + 352;
    if (wide) {
        for (std::int64_t i = 0; i < n; ++i) {
            std::int16_t v = std::int16_t(vol[i]);
            std::memcpy(payload + i * 2, &v, 2);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) payload[i] = char(std::uint8_t(vol[i]));
    }
    detail::write_file_bytes(path, bytes.data(), bytes.size());
}

inline void write_channels(const Channels<double>& vol, VoxelSpacing spacing,
                           const std::string& path) {
    const Dims3 d = vol.dims();
    std::int64_t n = vol.size();
    if (is_raw_path(path)) {
        std::vector<char> bytes(size_t(n) * 4);
        for (std::int64_t i = 0; i < n; ++i) {
            float v = float(vol[i]);
            std::memcpy(bytes.data() + i * 4, &v, 4);
        }
        detail::write_file_bytes(path, bytes.data(), bytes.size());
        nlohmann::json meta{{"format", "raw"},
                            {"dtype", "float32"},
                            {"dims", {d.h, d.w, d.d}},
                            {"channels", vol.channels()},
                            {"spacing", {spacing.dx, spacing.dy, spacing.dz}}};
        std::ofstream f(detail::sidecar_path(path), std::ios::trunc);
        if (!f) throw IoError("cannot open " + detail::sidecar_path(path) + " for writing");
        f << meta.dump(2) << "\n";
        return;
    }
    detail::NiftiHeader h =
        detail::make_header(d, vol.channels(), spacing, detail::kDtFloat32, 32);
    std::vector<char> bytes(352 + size_t(n) * 4, 0);
    std::memcpy(bytes.data(), &h, sizeof h);
    char* payload = bytes.data() + 352;
    for (std::int64_t i = 0; i < n; ++i) {
        float v = float(vol[i]);
        std::memcpy(payload + i * 4, &v, 4);
    }
    detail::write_file_bytes(path, bytes.data(), bytes.size());
}

inline void write_volume(const ProbVolume& vol, VoxelSpacing spacing, const std::string& path) {
    write_channels(vol, spacing, path);
}

}  // namespace vt
