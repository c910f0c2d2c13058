#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "recoc/errors.hpp"
#include "recoc/matrix.hpp"
#include "recoc/rng.hpp"

namespace recoc {

// Labeled multiclass points. Class labels are 0-based throughout the library.
// feature_range is the valid pixel/feature domain used for clipping.
struct Dataset {
    Matrix features;         // n x d
    std::vector<int> labels; // 0 .. n_classes-1
    int n_classes = 0;
    double feature_lo = 0.0;
    double feature_hi = 1.0;
    std::uint32_t image_rows = 0;  // set when loaded from IDX images
    std::uint32_t image_cols = 0;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        if (size() == 0) throw FormatError("Dataset: empty");
        if (labels.size() != size()) throw DimensionError("Dataset: label count != row count");
        if (n_classes < 1) throw DimensionError("Dataset: n_classes must be >= 1");
        if (!(feature_lo < feature_hi)) throw DomainError("Dataset: feature_lo must be < feature_hi");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] < 0 || labels[i] >= n_classes)
                throw DomainError("Dataset: label " + std::to_string(labels[i]) +
                                  " out of range at row " + std::to_string(i));
        for (double v : features.data()) {
            if (!std::isfinite(v)) throw DomainError("Dataset: non-finite feature");
            if (v < feature_lo || v > feature_hi)
                throw DomainError("Dataset: feature outside declared range");
        }
    }
};

// The class-to-sign map phi.
struct RelabelMap {
    std::vector<int> signs;  // one of +1/-1 per class

    void validate() const {
        for (int s : signs)
            if (s != 1 && s != -1) throw DomainError("RelabelMap: entries must be +1 or -1");
    }
};

// Binary labels phi(y_i), feature order preserved.
inline std::vector<int> relabel(const Dataset& data, const RelabelMap& map) {
    if (static_cast<int>(map.signs.size()) != data.n_classes)
        throw DimensionError("relabel: map length " + std::to_string(map.signs.size()) +
                             " != n_classes " + std::to_string(data.n_classes));
    map.validate();
    std::vector<int> out(data.labels.size());
    for (std::size_t i = 0; i < data.labels.size(); ++i) out[i] = map.signs[data.labels[i]];
    return out;
}

// ---- IDX (big-endian, unsigned-byte payload) ----------------------------

namespace idx {
inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("idx: truncated file while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}
}  // namespace idx

// Parses an IDX image/label pair. Pixels are scaled to [0,1] (the 0-255 byte
// domain divided by 255); labels become 0-based class indices.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("load_idx: cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("load_idx: cannot open " + labels_path);

    const std::uint32_t image_magic = idx::read_u32(imgs, "image magic");
    if (image_magic != idx::kImageMagic)
        throw FormatError("load_idx: bad image magic in " + images_path);
    const std::uint32_t n_images = idx::read_u32(imgs, "image count");
    const std::uint32_t rows = idx::read_u32(imgs, "row count");
    const std::uint32_t cols = idx::read_u32(imgs, "column count");

    const std::uint32_t label_magic = idx::read_u32(labs, "label magic");
    if (label_magic != idx::kLabelMagic)
        throw FormatError("load_idx: bad label magic in " + labels_path);
    const std::uint32_t n_labels = idx::read_u32(labs, "label count");

    if (n_images != n_labels)
        throw FormatError("load_idx: image count " + std::to_string(n_images) +
                          " != label count " + std::to_string(n_labels));
    if (n_images == 0) throw FormatError("load_idx: empty dataset");

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> pixel_buf(dim);
    Dataset d;
    d.features = Matrix(n_images, dim);
    d.labels.resize(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pixel_buf.data()),
                       static_cast<std::streamsize>(dim)))
            throw FormatError("load_idx: truncated pixel data at image " + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j)
            d.features(i, j) = static_cast<double>(pixel_buf[j]) / 255.0;
        unsigned char lab;
        if (!labs.read(reinterpret_cast<char*>(&lab), 1))
            throw FormatError("load_idx: truncated label data at index " + std::to_string(i));
        d.labels[i] = static_cast<int>(lab);
    }
    d.n_classes = 1 + *std::max_element(d.labels.begin(), d.labels.end());
    d.feature_lo = 0.0;
    d.feature_hi = 1.0;
    d.image_rows = rows;
    d.image_cols = cols;
    d.validate();
    return d;
}

// Inverse of load_idx; byte-identical round trip for valid files.
inline void write_idx(const Dataset& d, const std::string& images_path,
                      const std::string& labels_path) {
    if (d.image_rows == 0 || d.image_cols == 0)
        throw FormatError("write_idx: dataset carries no image geometry");
    if (static_cast<std::size_t>(d.image_rows) * d.image_cols != d.dim())
        throw DimensionError("write_idx: geometry does not match feature width");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("write_idx: cannot open " + images_path);
    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("write_idx: cannot open " + labels_path);

    idx::write_u32(imgs, idx::kImageMagic);
    idx::write_u32(imgs, static_cast<std::uint32_t>(d.size()));
    idx::write_u32(imgs, d.image_rows);
    idx::write_u32(imgs, d.image_cols);
    idx::write_u32(labs, idx::kLabelMagic);
    idx::write_u32(labs, static_cast<std::uint32_t>(d.size()));

    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.dim(); ++j) {
            const double v = std::clamp(d.features(i, j), 0.0, 1.0);
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            imgs.write(reinterpret_cast<const char*>(&byte), 1);
        }
        if (d.labels[i] < 0 || d.labels[i] > 255)
            throw FormatError("write_idx: label does not fit a byte");
        const auto lab = static_cast<unsigned char>(d.labels[i]);
        labs.write(reinterpret_cast<const char*>(&lab), 1);
    }
    if (!imgs || !labs) throw IoError("write_idx: write failed");
}

// ---- CSV (header y,x1,...,xd) --------------------------------------------

inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("load_csv: empty file " + path);
    if (line.rfind("y,", 0) != 0)
        throw FormatError("load_csv: header must start with 'y,' in " + path);
    const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));

    Dataset d;
    d.features = Matrix(0, dim);
    std::vector<double> row(dim);
    std::size_t lineno = 1;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw FormatError("load_csv: bad row at line " + std::to_string(lineno));
        try {
            d.labels.push_back(std::stoi(cell));
            for (std::size_t j = 0; j < dim; ++j) {
                if (!std::getline(ss, cell, ','))
                    throw FormatError("load_csv: short row at line " + std::to_string(lineno));
                row[j] = std::stod(cell);
            }
        } catch (const std::invalid_argument&) {
            throw FormatError("load_csv: unparsable number at line " + std::to_string(lineno));
        } catch (const std::out_of_range&) {
            throw FormatError("load_csv: number out of range at line " + std::to_string(lineno));
        }
        if (std::getline(ss, cell, ','))
            throw FormatError("load_csv: long row at line " + std::to_string(lineno));
        for (double v : row) {
            if (first || v < lo) lo = v;
            if (first || v > hi) hi = v;
            first = false;
        }
        d.features.append_row(row);
    }
    if (d.size() == 0) throw FormatError("load_csv: no data rows in " + path);
    d.n_classes = 1 + *std::max_element(d.labels.begin(), d.labels.end());
    if (d.n_classes < 1 || *std::min_element(d.labels.begin(), d.labels.end()) < 0)
        throw FormatError("load_csv: labels must be non-negative");
    // Widen the declared range to the observed one so validate() passes.
    d.feature_lo = std::min(0.0, lo);
    d.feature_hi = std::max(1.0, hi);
    d.validate();
    return d;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_csv: cannot open " + path);
    out << "y";
    for (std::size_t j = 1; j <= d.dim(); ++j) out << ",x" << j;
    out << "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << d.labels[i];
        for (std::size_t j = 0; j < d.dim(); ++j) out << ',' << format_double(d.features(i, j));
        out << "\n";
    }
    if (!out) throw IoError("write_csv: write failed");
}

// ---- Synthetic generators -------------------------------------------------

namespace detail {
// Point i of class k draws its noise from stream fold(fold(seed, k), i),
// independent of generation order.
inline void add_class_points(Dataset& d, int k, int per_class, const std::vector<double>& center,
                             std::uint64_t seed) {
    const std::uint64_t class_key = rng::fold(seed, static_cast<std::uint64_t>(k));
    std::vector<double> row(center.size());
    for (int i = 0; i < per_class; ++i) {
        rng::Stream s(rng::fold(class_key, static_cast<std::uint64_t>(i)));
        for (std::size_t m = 0; m < center.size(); ++m) {
            row[m] = std::clamp(center[m] + s.gaussian(), d.feature_lo, d.feature_hi);
        }
        d.features.append_row(row);
        d.labels.push_back(k);
    }
}
}  // namespace detail

// Deterministic lattice centers with pairwise distance >= separation, unit
// isotropic Gaussian noise, clipped to the declared range.
inline Dataset synth_gaussian(int n_classes, int dim, int per_class, double separation,
                              std::uint64_t seed) {
    if (n_classes < 2) throw DomainError("synth_gaussian: n_classes must be >= 2");
    if (dim < 1 || per_class < 1) throw DomainError("synth_gaussian: dim and per_class must be >= 1");
    if (!(separation > 0.0)) throw DomainError("synth_gaussian: separation must be > 0");

    // Smallest lattice side L with L^dim >= n_classes; centers are base-L
    // digit strings scaled by `separation`, so distinct classes differ by at
    // least `separation` in some coordinate.
    int side = 1;
    while (std::pow(side, dim) < static_cast<double>(n_classes)) ++side;

    Dataset d;
    d.features = Matrix(0, static_cast<std::size_t>(dim));
    d.n_classes = n_classes;
    d.feature_lo = -10.0;
    d.feature_hi = separation * (side - 1) + 10.0;

    std::vector<double> center(dim);
    for (int k = 0; k < n_classes; ++k) {
        int digits = k;
        for (int m = 0; m < dim; ++m) {
            center[m] = separation * (digits % side);
            digits /= side;
        }
        detail::add_class_points(d, k, per_class, center, seed);
    }
    d.validate();
    return d;
}

// Permutation-symmetric variant: dim = n_classes and class k sits at
// (separation/sqrt(2)) * e_k, so relabeling classes is exactly a coordinate
// permutation of the distribution.
inline Dataset synth_gaussian_symmetric(int n_classes, int per_class, double separation,
                                        std::uint64_t seed) {
    if (n_classes < 2) throw DomainError("synth_gaussian_symmetric: n_classes must be >= 2");
    if (per_class < 1) throw DomainError("synth_gaussian_symmetric: per_class must be >= 1");
    if (!(separation > 0.0)) throw DomainError("synth_gaussian_symmetric: separation must be > 0");

    const double peak = separation / std::sqrt(2.0);
    Dataset d;
    d.features = Matrix(0, static_cast<std::size_t>(n_classes));
    d.n_classes = n_classes;
    d.feature_lo = -10.0;
    d.feature_hi = peak + 10.0;

    std::vector<double> center(n_classes, 0.0);
    for (int k = 0; k < n_classes; ++k) {
        center[k] = peak;
        detail::add_class_points(d, k, per_class, center, seed);
        center[k] = 0.0;
    }
    d.validate();
    return d;
}

// First n rows and the rest, all metadata preserved.
inline std::pair<Dataset, Dataset> split_at(const Dataset& d, std::size_t n_first) {
    if (n_first == 0 || n_first >= d.size())
        throw DimensionError("split_at: split point must leave both halves non-empty");
    Dataset a = d, b = d;
    a.features = Matrix(0, d.dim());
    a.labels.clear();
    b.features = Matrix(0, d.dim());
    b.labels.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
        Dataset& dst = i < n_first ? a : b;
        dst.features.append_row(d.features.row(i));
        dst.labels.push_back(d.labels[i]);
    }
    return {std::move(a), std::move(b)};
}

// The benchmark pixel budget is quoted on the 0-255 byte scale; features here
// live in [0,1], so the budget divides by 255 exactly once, in this function.
inline constexpr double epsilon_from_pixel_scale(double eps_on_255_scale) {
    return eps_on_255_scale / 255.0;
}

}  // namespace recoc
