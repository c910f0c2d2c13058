#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "recoc/errors.hpp"

namespace recoc::bounds {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Binary entropy in bits; the endpoints take the limit value 0.
inline double h2(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw DomainError("h2: lambda must lie in [0,1], got " + std::to_string(lambda));
    if (lambda == 0.0 || lambda == 1.0) return 0.0;
    return -lambda * std::log2(lambda) - (1.0 - lambda) * std::log2(1.0 - lambda);
}

// binom(n, lambda*n) <= 2^{n h2(lambda)} / sqrt(2 pi n lambda (1-lambda)),
// for lambda in (0,1) with lambda*n integral. Returns the right-hand side.
inline double binom_entropy_bound(int n, double lambda) {
    if (n < 1) throw DomainError("binom_entropy_bound: n must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0))
        throw DomainError("binom_entropy_bound: lambda must lie in (0,1)");
    const double k = lambda * static_cast<double>(n);
    if (std::abs(k - std::round(k)) > 1e-9)
        throw DomainError("binom_entropy_bound: lambda*n must be an integer");
    const double nn = static_cast<double>(n);
    return std::exp2(nn * h2(lambda)) / std::sqrt(2.0 * kPi * nn * lambda * (1.0 - lambda));
}

// P[X <= (p - alpha) n] <= exp(-2 alpha^2 n) for X ~ Bin(n, p).
// p locates the tail but drops out of the bound itself.
inline double hoeffding_tail(long n, double p, double alpha) {
    if (n < 1) throw DomainError("hoeffding_tail: n must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("hoeffding_tail: p must lie in (0,1)");
    if (!(alpha > 0.0)) throw DomainError("hoeffding_tail: alpha must be > 0");
    return std::exp(-2.0 * alpha * alpha * static_cast<double>(n));
}

// A probability-like quantity together with its raw (unclamped) formula
// value. raw >= 1 makes the certificate vacuous.
struct BoundValue {
    double raw = 0.0;
    double value = 0.0;  // raw clamped to [0,1]
    bool vacuous = false;
};

inline BoundValue make_bound(double raw) {
    BoundValue b;
    b.raw = raw;
    b.value = raw < 0.0 ? 0.0 : (raw > 1.0 ? 1.0 : raw);
    b.vacuous = !(raw < 1.0);
    return b;
}

namespace detail {
inline void check_code_params(int n_classes, int code_length, double r) {
    if (n_classes < 2) throw DomainError("bound: n_classes must be >= 2");
    if (code_length < 1) throw DomainError("bound: code_length must be >= 1");
    if (!(r > 0.0 && r < 1.0)) throw DomainError("bound: r must lie in (0,1)");
}
}  // namespace detail

// Probability that trimming one committee vote changes any decoding outcome,
// over Q queries: 4 N Q sqrt((1-r) / (2 pi M r)) * 2^{-M (1 - h2(r))}.
// Decays only for r < 1/2; raw values >= 1 are reported as vacuous.
inline BoundValue trim_bound(int n_classes, int code_length, double r, long queries = 1) {
    detail::check_code_params(n_classes, code_length, r);
    if (queries < 0) throw DomainError("trim_bound: queries must be >= 0");
    const double m = static_cast<double>(code_length);
    const double radical = std::sqrt((1.0 - r) / (2.0 * kPi * m * r));
    const double decay = std::exp2(-m * (1.0 - h2(r)));
    return make_bound(4.0 * static_cast<double>(n_classes) * static_cast<double>(queries) *
                      radical * decay);
}

// The same certificate as it appears at the end of the derivation, which
// carries an extra factor M inside the radical:
// 4 N Q sqrt(M (1-r) / (2 pi r)) * 2^{-M (1 - h2(r))}. Looser than
// trim_bound by exactly a factor of M; kept so the two published forms can
// be compared side by side.
inline BoundValue trim_bound_proof_form(int n_classes, int code_length, double r,
                                        long queries = 1) {
    detail::check_code_params(n_classes, code_length, r);
    if (queries < 0) throw DomainError("trim_bound_proof_form: queries must be >= 0");
    const double m = static_cast<double>(code_length);
    const double radical = std::sqrt(m * (1.0 - r) / (2.0 * kPi * r));
    const double decay = std::exp2(-m * (1.0 - h2(r)));
    return make_bound(4.0 * static_cast<double>(n_classes) * static_cast<double>(queries) *
                      radical * decay);
}

// If an adversary defeats the committee with probability > epsilon, the
// per-vote flip rate must exceed 2 (r + sqrt(log(1/epsilon) / (2 M))).
// The logarithm is natural because the derivation passes through exp();
// log2_base switches to base 2 for sensitivity comparisons.
inline double delta_bound(int code_length, double r, double epsilon, bool log2_base = false) {
    if (code_length < 1) throw DomainError("delta_bound: code_length must be >= 1");
    if (!(r > 0.0 && r < 1.0)) throw DomainError("delta_bound: r must lie in (0,1)");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw DomainError("delta_bound: epsilon must lie in (0,1]");
    const double lg = log2_base ? std::log2(1.0 / epsilon) : std::log(1.0 / epsilon);
    return 2.0 * (r + std::sqrt(lg / (2.0 * static_cast<double>(code_length))));
}

// Inverse view of delta_bound: a per-vote flip rate of delta caps the defeat
// probability at exp(-2 M (delta/2 - r)^2). Vacuous (returns 1) unless
// delta/2 > r.
inline BoundValue epsilon_bound(int code_length, double r, double delta) {
    if (code_length < 1) throw DomainError("epsilon_bound: code_length must be >= 1");
    if (!(r > 0.0 && r < 1.0)) throw DomainError("epsilon_bound: r must lie in (0,1)");
    if (!(delta >= 0.0 && delta <= 1.0))
        throw DomainError("epsilon_bound: delta must lie in [0,1]");
    const double gap = delta / 2.0 - r;
    if (gap <= 0.0) return make_bound(1.0);  // certificate says nothing here
    return make_bound(std::exp(-2.0 * static_cast<double>(code_length) * gap * gap));
}

// Union step over the N-1 wrong classes: min(1, (N-1) * tail).
inline BoundValue union_success_bound(int n_classes, double per_class_tail) {
    if (n_classes < 2) throw DomainError("union_success_bound: n_classes must be >= 2");
    if (!(per_class_tail >= 0.0 && per_class_tail <= 1.0))
        throw DomainError("union_success_bound: tail must lie in [0,1]");
    return make_bound(static_cast<double>(n_classes - 1) * per_class_tail);
}

// Committee success probability floor: 1 - trim_bound(...), clamped at 0.
inline double success_floor(int n_classes, int code_length, double r, long queries = 1) {
    const BoundValue b = trim_bound(n_classes, code_length, r, queries);
    return b.vacuous ? 0.0 : 1.0 - b.value;
}

}  // namespace recoc::bounds
