#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recoc/errors.hpp"
#include "recoc/rng.hpp"

namespace recoc {

// Distinguished abstain output. Class indices are 0-based, so -1 is free.
inline constexpr int kAbstain = -1;

using Codeword = std::vector<int>;  // entries +1 / -1

// The hidden N x M sign matrix. Each row is a class codeword; the matrix is
// the secret identity of the classifier, so reproducibility from (seed, N, M)
// is part of the contract.
struct CodeMatrix {
    int n_classes = 0;
    int code_length = 0;
    std::uint64_t seed = 0;
    std::vector<int> entries;  // row-major, n_classes * code_length

    int at(int i, int j) const {
        if (i < 0 || i >= n_classes || j < 0 || j >= code_length)
            throw DimensionError("CodeMatrix::at: index (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") out of " + std::to_string(n_classes) +
                                 "x" + std::to_string(code_length));
        return entries[static_cast<std::size_t>(i) * code_length + j];
    }

    Codeword row(int i) const {
        if (i < 0 || i >= n_classes) throw DimensionError("CodeMatrix::row: index out of range");
        const auto* base = entries.data() + static_cast<std::size_t>(i) * code_length;
        return Codeword(base, base + code_length);
    }

    // Pairs (i, k), i < k, of identical rows. Expected to be empty except at
    // tiny M; callers surface this as a warning rather than an error.
    std::vector<std::pair<int, int>> duplicate_row_pairs() const {
        std::vector<std::pair<int, int>> dups;
        for (int i = 0; i < n_classes; ++i)
            for (int k = i + 1; k < n_classes; ++k) {
                bool same = true;
                for (int j = 0; j < code_length && same; ++j) same = at(i, j) == at(k, j);
                if (same) dups.emplace_back(i, k);
            }
        return dups;
    }

    // Copy with column j removed; rows become length M-1.
    CodeMatrix without_column(int j) const {
        if (j < 0 || j >= code_length)
            throw DimensionError("CodeMatrix::without_column: column out of range");
        CodeMatrix out;
        out.n_classes = n_classes;
        out.code_length = code_length - 1;
        out.seed = seed;
        out.entries.reserve(static_cast<std::size_t>(n_classes) * out.code_length);
        for (int i = 0; i < n_classes; ++i)
            for (int c = 0; c < code_length; ++c)
                if (c != j) out.entries.push_back(at(i, c));
        return out;
    }

    bool operator==(const CodeMatrix&) const = default;
};

struct SampleOptions {
    bool resample_duplicates = false;  // opt-in; default keeps the sampled matrix
    int max_attempts = 64;
};

// Entry (i,j) is the top bit of fold(fold(seed, i), j): every entry has its
// own derived stream, so the matrix never depends on sampling order.
inline CodeMatrix sample_code(int n_classes, int code_length, std::uint64_t seed,
                              SampleOptions opts = {}) {
    if (n_classes < 2) throw DimensionError("sample_code: n_classes must be >= 2");
    if (code_length < 1) throw DimensionError("sample_code: code_length must be >= 1");

    const auto fill = [&](std::uint64_t key) {
        CodeMatrix code;
        code.n_classes = n_classes;
        code.code_length = code_length;
        code.seed = seed;
        code.entries.resize(static_cast<std::size_t>(n_classes) * code_length);
        for (int i = 0; i < n_classes; ++i) {
            const std::uint64_t row_key = rng::fold(key, static_cast<std::uint64_t>(i));
            for (int j = 0; j < code_length; ++j) {
                const std::uint64_t bit = rng::fold(row_key, static_cast<std::uint64_t>(j));
                code.entries[static_cast<std::size_t>(i) * code_length + j] =
                    (bit >> 63) ? -1 : +1;
            }
        }
        return code;
    };

    CodeMatrix code = fill(seed);
    if (opts.resample_duplicates) {
        for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
            if (code.duplicate_row_pairs().empty()) break;
            code = fill(rng::fold(seed, 0x7265'7361'6D70ull + attempt));
        }
    }
    return code;
}

inline int hamming(const Codeword& a, const Codeword& b) {
    if (a.size() != b.size())
        throw DimensionError("hamming: length mismatch, " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

struct DecodeResult {
    int label = kAbstain;  // class index, or kAbstain
    int distance = 0;      // d*, the minimum Hamming distance over rows
    bool abstained = true;

    bool operator==(const DecodeResult&) const = default;
};

// Nearest-row decoding against an explicit distance threshold: output the
// unique argmin row iff d* < hamming_threshold; a tie at the minimum abstains
// regardless of the threshold (a tied point sits on a decision boundary).
// The threshold is real-valued so a trimmed codeword can still be held to the
// full-length M*r cut.
inline DecodeResult decode_with_threshold(const CodeMatrix& code, const Codeword& predicted,
                                          double hamming_threshold) {
    if (static_cast<int>(predicted.size()) != code.code_length)
        throw DimensionError("decode: predicted length " + std::to_string(predicted.size()) +
                             " != code_length " + std::to_string(code.code_length));
    int best = -1;
    int best_d = code.code_length + 1;
    bool tie = false;
    for (int y = 0; y < code.n_classes; ++y) {
        int d = 0;
        for (int j = 0; j < code.code_length; ++j) d += code.at(y, j) != predicted[j];
        if (d < best_d) {
            best_d = d;
            best = y;
            tie = false;
        } else if (d == best_d) {
            tie = true;
        }
    }
    DecodeResult out;
    out.distance = best_d;
    if (!tie && static_cast<double>(best_d) < hamming_threshold) {
        out.label = best;
        out.abstained = false;
    }
    return out;
}

// Construction threshold d* < M*r.
inline DecodeResult decode(const CodeMatrix& code, const Codeword& predicted, double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("decode: r must lie in [0,1]");
    return decode_with_threshold(code, predicted, static_cast<double>(code.code_length) * r);
}

// Nearest row with ties broken toward the lowest class index; never abstains.
// This is the non-abstaining mode used when query answers must be labels.
inline DecodeResult decode_no_abstain(const CodeMatrix& code, const Codeword& predicted) {
    if (static_cast<int>(predicted.size()) != code.code_length)
        throw DimensionError("decode_no_abstain: predicted length mismatch");
    if (code.n_classes < 1) throw DimensionError("decode_no_abstain: empty code");
    int best = 0;
    int best_d = code.code_length + 1;
    for (int y = 0; y < code.n_classes; ++y) {
        int d = 0;
        for (int j = 0; j < code.code_length; ++j) d += code.at(y, j) != predicted[j];
        if (d < best_d) {
            best_d = d;
            best = y;
        }
    }
    DecodeResult out;
    out.label = best;
    out.distance = best_d;
    out.abstained = false;
    return out;
}

}  // namespace recoc
