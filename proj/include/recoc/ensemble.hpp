#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <span>
#include <thread>
#include <vector>

#include "recoc/binary_learner.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/errors.hpp"

namespace recoc {

// The committee: M binary classifiers, one per code column, plus the hidden
// code matrix and the acceptance radius r. Immutable once built.
struct Ensemble {
    CodeMatrix code;
    std::vector<BinaryClassifier> classifiers;
    double r = 0.2;
    BinaryKind kind = BinaryKind::LogisticLinear;
    TrainConfig train_config;

    int n_classes() const { return code.n_classes; }
    int code_length() const { return code.code_length; }

    Codeword predict_codeword(std::span<const double> x) const {
        Codeword c(classifiers.size());
        for (std::size_t j = 0; j < classifiers.size(); ++j) c[j] = classifiers[j].predict(x);
        return c;
    }

    DecodeResult classify(std::span<const double> x) const {
        return decode(code, predict_codeword(x), r);
    }

    // Vote over the M-1 remaining columns, held to the same M*r cut as the
    // full committee. With M = 1 the empty vote abstains.
    DecodeResult classify_leave_one_out(std::span<const double> x, int column) const {
        if (column < 0 || column >= code.code_length)
            throw DimensionError("classify_leave_one_out: column out of range");
        Codeword c = predict_codeword(x);
        c.erase(c.begin() + column);
        return decode_with_threshold(code.without_column(column), c,
                                     static_cast<double>(code.code_length) * r);
    }

    // Always answers with a class label (nearest row, ties toward the lowest
    // index); the query-answering mode for substitute training.
    int classify_no_abstain(std::span<const double> x) const {
        return decode_no_abstain(code, predict_codeword(x)).label;
    }
};

struct BuildOptions {
    bool parallel = true;
};

namespace detail {

// Stream tags separating the code draw from column training.
inline constexpr std::uint64_t kCodeStream = 1;
inline constexpr std::uint64_t kColumnStream = 2;

inline std::vector<BinaryClassifier> train_columns(const Dataset& data, const CodeMatrix& code,
                                                   std::uint64_t seed, const TrainConfig& cfg,
                                                   BinaryKind kind, const BuildOptions& opts) {
    const int m = code.code_length;
    std::vector<BinaryClassifier> out(m);
    const std::uint64_t columns_key = rng::fold(seed, kColumnStream);

    const auto train_one = [&](int j) {
        RelabelMap map;
        map.signs.resize(code.n_classes);
        for (int i = 0; i < code.n_classes; ++i) map.signs[i] = code.at(i, j);
        TrainConfig col_cfg = cfg;
        col_cfg.seed = rng::fold(columns_key, static_cast<std::uint64_t>(j));
        return train_binary(data.features, relabel(data, map), col_cfg, kind);
    };

    if (!opts.parallel || m == 1) {
        for (int j = 0; j < m; ++j) out[j] = train_one(j);
        return out;
    }
    // Contiguous column chunks, one task each; out[j] is fixed by index, so
    // scheduling cannot affect the result.
    const int workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(m)));
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (int j = w; j < m; j += workers) out[j] = train_one(j);
        }));
    }
    for (auto& f : futures) f.get();
    return out;
}

}  // namespace detail

// Trains column j on the data relabeled by column j of a caller-supplied
// code; the training stream for column j is derived from (seed, j) so the
// result cannot depend on scheduling.
inline Ensemble build_ensemble_with_code(const Dataset& data, const CodeMatrix& code, double r,
                                         std::uint64_t seed, const TrainConfig& cfg,
                                         BinaryKind kind = BinaryKind::LogisticLinear,
                                         BuildOptions opts = {}) {
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("build_ensemble: r must lie in (0,1]");
    if (code.n_classes != data.n_classes)
        throw DimensionError("build_ensemble: code rows != dataset classes");
    Ensemble e;
    e.code = code;
    e.r = r;
    e.kind = kind;
    e.train_config = cfg;
    e.classifiers = detail::train_columns(data, code, seed, cfg, kind, opts);
    return e;
}

// Samples the hidden code from (seed) and trains the committee.
inline Ensemble build_ensemble(const Dataset& data, int n_classes, int code_length, double r,
                               std::uint64_t seed, const TrainConfig& cfg,
                               BinaryKind kind = BinaryKind::LogisticLinear,
                               BuildOptions opts = {}) {
    if (n_classes != data.n_classes)
        throw DimensionError("build_ensemble: n_classes != dataset classes");
    const CodeMatrix code =
        sample_code(n_classes, code_length, rng::fold(seed, detail::kCodeStream));
    return build_ensemble_with_code(data, code, r, seed, cfg, kind, opts);
}

}  // namespace recoc
