#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recoc/attack.hpp"
#include "recoc/binary_learner.hpp"
#include "recoc/bounds.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/ensemble.hpp"
#include "recoc/errors.hpp"
#include "recoc/rng.hpp"

namespace recoc::lab {

using json = nlohmann::json;

// ---- Estimation helpers ------------------------------------------------------

inline constexpr double kZ95 = 1.959963985;  // two-sided 95% normal quantile

struct Estimate {
    std::size_t successes = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;

    // Wilson half-width / z: a standard error that stays positive at 0 and 1
    // successes, which keeps 3-sigma comparisons meaningful at the extremes.
    double std_error() const { return (ci_hi - ci_lo) / (2.0 * kZ95); }
};

inline Estimate wilson(std::size_t successes, std::size_t n) {
    Estimate e;
    e.successes = successes;
    e.n = n;
    if (n == 0) return e;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    e.mean = p;
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = kZ95 * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    e.ci_lo = std::max(0.0, center - half);
    e.ci_hi = std::min(1.0, center + half);
    return e;
}

// P[X <= k] for X ~ Bin(n, p), by direct summation of the pmf recurrence.
// Exact up to double rounding; serves as the reference the closed-form tail
// bounds are compared against.
inline double binomial_cdf_leq(int n, double p, int k) {
    if (n < 1) throw DomainError("binomial_cdf_leq: n must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("binomial_cdf_leq: p must lie in (0,1)");
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    double term = std::pow(1.0 - p, n);  // P[X = 0]
    double cdf = term;
    const double odds = p / (1.0 - p);
    for (int i = 0; i < k; ++i) {
        term *= odds * static_cast<double>(n - i) / static_cast<double>(i + 1);
        cdf += term;
    }
    return std::min(1.0, cdf);
}

// P[X < t] for real t: the strict tail used by the decoding threshold.
inline double binomial_cdf_strictly_less(int n, double p, double t) {
    const double f = std::floor(t);
    const int k = (f == t) ? static_cast<int>(f) - 1 : static_cast<int>(f);
    return binomial_cdf_leq(n, p, k);
}

// ---- Definition-2 estimator ----------------------------------------------------

// The random-binary-classifier challenge: how often does a perturbation flip
// a classifier trained after a random class-to-sign relabeling conditioned on
// z_y = +1, z_t = -1.
struct ChallengeSpec {
    std::vector<double> x;
    int y = 0;
    int target = 1;
    PerturbationSpace space;
    int sample_size = 40;  // the benchmark grid's per-cell committee size
    std::uint64_t seed = 0;
    // Fast mode for smoke tests: every sampled classifier shares one hidden
    // initialization. Excluded from acceptance runs.
    std::optional<std::uint64_t> shared_init_seed;

    void validate(int n_classes, std::size_t dim) const {
        if (y == target) throw ConfigError("ChallengeSpec: target must differ from y");
        if (y < 0 || y >= n_classes || target < 0 || target >= n_classes)
            throw ConfigError("ChallengeSpec: class index out of range");
        if (sample_size < 1) throw ConfigError("ChallengeSpec: sample_size must be >= 1");
        if (x.size() != dim) throw DimensionError("ChallengeSpec: challenge dimension mismatch");
        space.validate();
    }
};

inline Estimate estimate_flip_rate(const ChallengeSpec& spec, std::span<const double> rho,
                                   const Dataset& data, const TrainConfig& cfg,
                                   BinaryKind kind = BinaryKind::LogisticLinear) {
    spec.validate(data.n_classes, data.dim());
    if (rho.size() != spec.x.size()) throw DimensionError("estimate_flip_rate: rho dimension");
    if (!spec.space.contains(rho))
        throw DomainError("estimate_flip_rate: rho outside the perturbation ball");
    std::vector<double> probe(spec.x.size());
    for (std::size_t i = 0; i < probe.size(); ++i) {
        probe[i] = spec.x[i] + rho[i];
        if (probe[i] < spec.space.clip_lo || probe[i] > spec.space.clip_hi)
            throw DomainError("estimate_flip_rate: perturbed point escapes clip range");
    }

    std::size_t flips = 0;
    for (int k = 0; k < spec.sample_size; ++k) {
        const std::uint64_t key = rng::fold(spec.seed, static_cast<std::uint64_t>(k));
        rng::Stream signs(rng::fold(key, 1));
        RelabelMap map;
        map.signs.resize(data.n_classes);
        for (int c = 0; c < data.n_classes; ++c) map.signs[c] = signs.sign();
        map.signs[spec.y] = +1;
        map.signs[spec.target] = -1;

        TrainConfig ck = cfg;
        ck.seed = spec.shared_init_seed ? *spec.shared_init_seed : rng::fold(key, 2);
        const BinaryClassifier f = train_binary(data.features, relabel(data, map), ck, kind);
        flips += f.predict(probe) != f.predict(spec.x);
    }
    return wilson(flips, static_cast<std::size_t>(spec.sample_size));
}

// ---- Pairwise (y, t) grid ---------------------------------------------------------

struct GridCell {
    int y = 0;
    int t = 0;
    std::size_t flips = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
};

struct GridReport {
    int n_classes = 0;
    bool targeted = true;
    std::vector<GridCell> cells;  // (y,t), y != t, ordered by y then t
    int max_y = -1;
    int max_t = -1;
    std::vector<double> max_cell_point_rates;  // per evaluation point of class max_y

    const GridCell& cell(int y, int t) const {
        for (const auto& c : cells)
            if (c.y == y && c.t == t) return c;
        throw DimensionError("GridReport::cell: no such off-diagonal cell");
    }

    std::string to_csv() const {
        std::string out = "y,t,mean_flip_rate,n_samples,ci_lo,ci_hi\n";
        char buf[160];
        for (const auto& c : cells) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%zu,%.9g,%.9g\n", c.y, c.t, c.mean, c.n,
                          c.ci_lo, c.ci_hi);
            out += buf;
        }
        return out;
    }

    std::string to_table() const {
        std::string out = "flip-rate grid (rows y, columns t):\n";
        char buf[64];
        for (int y = 0; y < n_classes; ++y) {
            for (int t = 0; t < n_classes; ++t) {
                if (y == t) {
                    out += "   .    ";
                } else {
                    std::snprintf(buf, sizeof buf, " %6.4f ", cell(y, t).mean);
                    out += buf;
                }
            }
            out += "\n";
        }
        std::snprintf(buf, sizeof buf, "max cell: y=%d t=%d\n", max_y, max_t);
        out += buf;
        return out;
    }

    json to_json() const {
        json cells_json = json::array();
        for (const auto& c : cells)
            cells_json.push_back(json{{"y", c.y},
                                      {"t", c.t},
                                      {"mean_flip_rate", c.mean},
                                      {"n_samples", c.n},
                                      {"ci_lo", c.ci_lo},
                                      {"ci_hi", c.ci_hi}});
        return json{{"n_classes", n_classes},
                    {"targeted", targeted},
                    {"cells", std::move(cells_json)},
                    {"max_y", max_y},
                    {"max_t", max_t},
                    {"max_cell_point_rates", max_cell_point_rates}};
    }
};

struct GridConfig {
    int sample_size = 40;  // pool of random binary classifiers
    BinaryKind binary_kind = BinaryKind::LogisticLinear;
    TrainConfig binary_train;
    SubstituteArch substitute_arch = SubstituteArch::LinearSoftmax;
    TrainConfig substitute_train;
    AttackConfig attack;
    PerturbationSpace space;
    bool targeted = true;  // per-cell target objective vs one untargeted rho per point
    std::uint64_t seed = 0;
};

// The benchmark grid: train a pool of K randomly-relabeled binary
// classifiers, attack each evaluation point with a substitute trained on the
// training split, and for each ordered pair (y, t) report how often the
// perturbation flips a classifier whose relabeling separates y from t
// (z_y != z_t). Cell counts vary because the conditioning is per pair.
inline GridReport pairwise_grid(const Dataset& train_data, const Dataset& eval_data,
                                const GridConfig& cfg) {
    if (train_data.n_classes != eval_data.n_classes)
        throw DimensionError("pairwise_grid: class count mismatch");
    if (train_data.dim() != eval_data.dim())
        throw DimensionError("pairwise_grid: dimension mismatch");
    if (cfg.sample_size < 1) throw ConfigError("pairwise_grid: sample_size must be >= 1");
    cfg.space.validate();
    const int nc = train_data.n_classes;
    const int K = cfg.sample_size;

    const SubstituteModel sub =
        train_substitute(train_data, cfg.substitute_arch, cfg.substitute_train);

    // Pool of random relabelings and their classifiers.
    std::vector<RelabelMap> zs(K);
    std::vector<BinaryClassifier> fs(K);
    for (int k = 0; k < K; ++k) {
        const std::uint64_t key = rng::fold(cfg.seed, static_cast<std::uint64_t>(k));
        rng::Stream signs(rng::fold(key, 1));
        zs[k].signs.resize(nc);
        for (int c = 0; c < nc; ++c) zs[k].signs[c] = signs.sign();
        TrainConfig ck = cfg.binary_train;
        ck.seed = rng::fold(key, 2);
        fs[k] = train_binary(train_data.features, relabel(train_data, zs[k]), ck,
                             cfg.binary_kind);
    }

    const std::size_t P = eval_data.size();
    // point_flips[e][t], point_n[e][t]
    std::vector<std::vector<std::size_t>> point_flips(P, std::vector<std::size_t>(nc, 0));
    std::vector<std::vector<std::size_t>> point_n(P, std::vector<std::size_t>(nc, 0));

    std::vector<int> base(K);
    for (std::size_t e = 0; e < P; ++e) {
        const auto x = eval_data.features.row(e);
        const int y = eval_data.labels[e];
        for (int k = 0; k < K; ++k) base[k] = fs[k].predict(x);

        std::vector<double> untargeted_hat;
        if (!cfg.targeted) {
            AttackConfig a = cfg.attack;
            a.targeted.reset();
            untargeted_hat = run_attack(sub, x, y, cfg.space, a);
        }
        for (int t = 0; t < nc; ++t) {
            if (t == y) continue;
            std::vector<double> hat;
            if (cfg.targeted) {
                AttackConfig a = cfg.attack;
                a.targeted = t;
                hat = run_attack(sub, x, y, cfg.space, a);
            } else {
                hat = untargeted_hat;
            }
            for (int k = 0; k < K; ++k) {
                if (zs[k].signs[y] == zs[k].signs[t]) continue;  // condition z_y != z_t
                ++point_n[e][t];
                point_flips[e][t] += fs[k].predict(hat) != base[k];
            }
        }
    }

    GridReport rep;
    rep.n_classes = nc;
    rep.targeted = cfg.targeted;
    for (int y = 0; y < nc; ++y) {
        for (int t = 0; t < nc; ++t) {
            if (t == y) continue;
            GridCell c;
            c.y = y;
            c.t = t;
            for (std::size_t e = 0; e < P; ++e) {
                if (eval_data.labels[e] != y) continue;
                c.flips += point_flips[e][t];
                c.n += point_n[e][t];
            }
            const Estimate est = wilson(c.flips, c.n);
            c.mean = est.mean;
            c.ci_lo = est.ci_lo;
            c.ci_hi = est.ci_hi;
            rep.cells.push_back(c);
        }
    }
    for (const auto& c : rep.cells) {
        if (c.n == 0) continue;
        if (rep.max_y < 0 || c.mean > rep.cell(rep.max_y, rep.max_t).mean) {
            rep.max_y = c.y;
            rep.max_t = c.t;
        }
    }
    if (rep.max_y >= 0) {
        for (std::size_t e = 0; e < P; ++e) {
            if (eval_data.labels[e] != rep.max_y) continue;
            const std::size_t n = point_n[e][rep.max_t];
            rep.max_cell_point_rates.push_back(
                n == 0 ? 0.0
                       : static_cast<double>(point_flips[e][rep.max_t]) / static_cast<double>(n));
        }
    }
    return rep;
}

// Assumption-1 trend: the maximum grid cell across a ladder of class counts.
// Reported for inspection, never asserted.
struct TrendPoint {
    int n_classes = 0;
    int max_y = -1;
    int max_t = -1;
    double max_cell_rate = 0.0;
};

inline std::vector<TrendPoint> assumption_trend(const std::vector<int>& class_counts,
                                                int train_per_class, int eval_per_class,
                                                double separation, const GridConfig& base_cfg,
                                                std::uint64_t seed) {
    std::vector<TrendPoint> out;
    for (int nc : class_counts) {
        const Dataset train_data = synth_gaussian_symmetric(
            nc, train_per_class, separation, rng::fold(seed, static_cast<std::uint64_t>(nc)));
        const Dataset eval_data = synth_gaussian_symmetric(
            nc, eval_per_class, separation, rng::fold(seed, 1000 + static_cast<std::uint64_t>(nc)));
        GridConfig cfg = base_cfg;
        cfg.seed = rng::fold(seed, 2000 + static_cast<std::uint64_t>(nc));
        const GridReport rep = pairwise_grid(train_data, eval_data, cfg);
        TrendPoint p;
        p.n_classes = nc;
        p.max_y = rep.max_y;
        p.max_t = rep.max_t;
        if (rep.max_y >= 0) p.max_cell_rate = rep.cell(rep.max_y, rep.max_t).mean;
        out.push_back(p);
    }
    return out;
}

// ---- Two-round ensemble challenge ---------------------------------------------

// Round 1 collects every query before any answer is released; a submit after
// the round closes is a protocol violation. This enforces nonadaptivity
// structurally rather than by trusting the attacker.
class QueryCollector {
public:
    void submit(std::vector<double> q) {
        if (closed_) throw ProtocolError("two-round protocol: query submitted after round 1");
        queries_.push_back(std::move(q));
    }
    void close() { closed_ = true; }
    bool closed() const { return closed_; }
    const std::vector<std::vector<double>>& queries() const { return queries_; }

private:
    bool closed_ = false;
    std::vector<std::vector<double>> queries_;
};

struct TwoRoundAttacker {
    virtual ~TwoRoundAttacker() = default;
    // Round 1: submit any number of queries; must not depend on answers.
    virtual void collect_queries(QueryCollector& collector, std::span<const double> x, int y) = 0;
    // Round 2: all answers arrive at once; return the adversarial point.
    virtual std::vector<double> perturb(std::span<const double> x, int y,
                                        std::span<const int> answers) = 0;
};

struct EnsembleChallengeConfig {
    int code_length = 16;
    double r = 0.2;
    TrainConfig train;
    BinaryKind kind = BinaryKind::LogisticLinear;
    PerturbationSpace space;
    bool answer_no_abstain = true;  // answer queries with labels only (benchmark protocol)
    int trials = 20;
    std::uint64_t seed = 0;
};

struct ChallengeOutcome {
    Estimate success;           // output neither y nor abstain
    std::size_t queries_per_trial = 0;
};

// Definition-3 game: fresh hidden code each trial, two-round attacker,
// success when the committee is steered to a wrong non-abstain label.
inline ChallengeOutcome ensemble_challenge(const Dataset& data, std::span<const double> x, int y,
                                           TwoRoundAttacker& attacker,
                                           const EnsembleChallengeConfig& cfg) {
    cfg.space.validate();
    if (y < 0 || y >= data.n_classes) throw ConfigError("ensemble_challenge: bad label");
    std::size_t successes = 0;
    std::size_t queries = 0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        const Ensemble ens =
            build_ensemble(data, data.n_classes, cfg.code_length, cfg.r,
                           rng::fold(cfg.seed, static_cast<std::uint64_t>(trial)), cfg.train,
                           cfg.kind);
        QueryCollector collector;
        attacker.collect_queries(collector, x, y);
        collector.close();
        std::vector<int> answers;
        answers.reserve(collector.queries().size());
        for (const auto& q : collector.queries())
            answers.push_back(cfg.answer_no_abstain ? ens.classify_no_abstain(q)
                                                    : ens.classify(q).label);
        queries = answers.size();

        const std::vector<double> hat = attacker.perturb(x, y, answers);
        if (hat.size() != x.size())
            throw ProtocolError("ensemble_challenge: attacker returned wrong dimension");
        for (std::size_t i = 0; i < hat.size(); ++i) {
            if (!(std::abs(hat[i] - x[i]) <= cfg.space.epsilon) || hat[i] < cfg.space.clip_lo ||
                hat[i] > cfg.space.clip_hi)
                throw ProtocolError("ensemble_challenge: perturbation outside the space");
        }
        const DecodeResult out = ens.classify(hat);
        successes += (!out.abstained && out.label != y);
    }
    ChallengeOutcome outcome;
    outcome.success = wilson(successes, static_cast<std::size_t>(cfg.trials));
    outcome.queries_per_trial = queries;
    return outcome;
}

// Baseline attacker: a random in-ball perturbation, no queries.
class RandomPerturbationAttacker : public TwoRoundAttacker {
public:
    RandomPerturbationAttacker(const PerturbationSpace& space, std::uint64_t seed)
        : space_(space), seed_(seed) {}

    void collect_queries(QueryCollector&, std::span<const double>, int) override {}

    std::vector<double> perturb(std::span<const double> x, int, std::span<const int>) override {
        rng::Stream s(rng::fold(seed_, ++calls_));
        std::vector<double> hat(x.begin(), x.end());
        for (auto& v : hat) {
            v += space_.epsilon * (2.0 * s.unit() - 1.0);
            v = std::clamp(v, space_.clip_lo, space_.clip_hi);
        }
        return hat;
    }

private:
    PerturbationSpace space_;
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
};

// Substitute-training attacker restricted to the two-round protocol: with
// zero augmentation epochs it queries nothing (pure transfer); with one, its
// queries come from the public-data substitute alone, so they are legal
// round-1 output.
class SubstituteTwoRoundAttacker : public TwoRoundAttacker {
public:
    SubstituteTwoRoundAttacker(Dataset public_data, SubstituteAttackConfig cfg,
                               AttackConfig attack, PerturbationSpace space)
        : public_data_(std::move(public_data)), cfg_(std::move(cfg)), attack_(attack),
          space_(space) {
        if (cfg_.augmentation_epochs > 1)
            throw ConfigError(
                "SubstituteTwoRoundAttacker: more than one augmentation epoch cannot be "
                "nonadaptive");
    }

    void collect_queries(QueryCollector& collector, std::span<const double>, int) override {
        initial_ = train_substitute(public_data_, cfg_.arch, cfg_.train);
        pending_.clear();
        if (cfg_.augmentation_epochs == 0) return;
        const std::size_t budget = cfg_.queries_per_epoch == 0
                                       ? public_data_.size()
                                       : std::min(public_data_.size(), cfg_.queries_per_epoch);
        for (std::size_t i = 0; i < budget; ++i) {
            const auto xi = public_data_.features.row(i);
            const auto g = logit_gradient(*initial_, xi, public_data_.labels[i]);
            std::vector<double> q(xi.begin(), xi.end());
            for (std::size_t j = 0; j < q.size(); ++j) {
                q[j] += cfg_.lambda * static_cast<double>((g[j] > 0.0) - (g[j] < 0.0));
                q[j] = std::clamp(q[j], space_.clip_lo, space_.clip_hi);
            }
            pending_.push_back(q);
            collector.submit(std::move(q));
        }
    }

    std::vector<double> perturb(std::span<const double> x, int y,
                                std::span<const int> answers) override {
        if (answers.size() != pending_.size())
            throw ProtocolError("SubstituteTwoRoundAttacker: answer count mismatch");
        SubstituteModel sub = *initial_;
        if (!pending_.empty()) {
            Dataset pool = public_data_;
            pool.feature_lo = std::min(pool.feature_lo, space_.clip_lo);
            pool.feature_hi = std::max(pool.feature_hi, space_.clip_hi);
            for (std::size_t i = 0; i < pending_.size(); ++i) {
                if (answers[i] == kAbstain)
                    throw ProtocolError("SubstituteTwoRoundAttacker: abstaining oracle answer");
                pool.features.append_row(pending_[i]);
                pool.labels.push_back(answers[i]);
                pool.n_classes = std::max(pool.n_classes, answers[i] + 1);
            }
            TrainConfig t = cfg_.train;
            t.seed = rng::fold(cfg_.train.seed, 1);
            sub = train_substitute(pool, cfg_.arch, t);
        }
        return run_attack(sub, x, y, space_, attack_);
    }

private:
    Dataset public_data_;
    SubstituteAttackConfig cfg_;
    AttackConfig attack_;
    PerturbationSpace space_;
    std::optional<SubstituteModel> initial_;
    std::vector<std::vector<double>> pending_;
};

// ---- Trim lemma verification -----------------------------------------------------

namespace detail {

// Decision from a vector of per-class Hamming distances: unique argmin below
// the threshold, ties abstain. Must agree with decode_with_threshold; a
// property test pins that equivalence.
inline int decide_from_distances(const std::vector<int>& d, double threshold) {
    int best = 0;
    bool tie = false;
    for (std::size_t y = 1; y < d.size(); ++y) {
        if (d[y] < d[best]) {
            best = static_cast<int>(y);
            tie = false;
        } else if (d[y] == d[best]) {
            tie = true;
        }
    }
    if (tie || !(static_cast<double>(d[best]) < threshold)) return kAbstain;
    return best;
}

inline void check_enum_size(int n_classes, int code_length, const char* who) {
    if (n_classes * code_length > 20 || n_classes * code_length + code_length > 24)
        throw DomainError(std::string(who) + ": instance too large for exact enumeration");
}

inline CodeMatrix code_from_bits(int n_classes, int code_length, std::uint64_t bits) {
    CodeMatrix code;
    code.n_classes = n_classes;
    code.code_length = code_length;
    code.entries.resize(static_cast<std::size_t>(n_classes) * code_length);
    for (std::size_t i = 0; i < code.entries.size(); ++i)
        code.entries[i] = (bits >> i) & 1 ? -1 : +1;
    return code;
}

}  // namespace detail

struct TrimLemmaReport {
    int n_classes = 0;
    int code_length = 0;
    double r = 0.0;
    bool exact = false;
    std::size_t trials = 0;        // Monte Carlo trials (0 for exact mode)
    std::size_t disagreements = 0; // over all compared (Z, codeword, column) triples
    std::size_t comparisons = 0;
    double disagreement = 0.0;     // probability estimate (exact in exact mode)
    double std_error = 0.0;        // 0 in exact mode
    bounds::BoundValue bound;             // the stated certificate
    bounds::BoundValue bound_proof_form;  // with the extra factor M in the radical
    bool pass = false;

    json to_json() const {
        return json{{"n_classes", n_classes},
                    {"code_length", code_length},
                    {"r", r},
                    {"mode", exact ? "exact" : "monte-carlo"},
                    {"trials", trials},
                    {"disagreements", disagreements},
                    {"comparisons", comparisons},
                    {"disagreement", disagreement},
                    {"std_error", std_error},
                    {"bound", bound.value},
                    {"bound_raw", bound.raw},
                    {"bound_vacuous", bound.vacuous},
                    {"bound_proof_form", bound_proof_form.value},
                    {"pass", pass}};
    }

    std::string to_table() const {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "trim lemma  N=%d M=%d r=%g  [%s]\n"
                      "  disagreement %.6g  (se %.3g)\n"
                      "  bound %.6g%s  proof-form %.6g\n"
                      "  %s\n",
                      n_classes, code_length, r, exact ? "exact" : "monte-carlo", disagreement,
                      std_error, bound.value, bound.vacuous ? " (vacuous)" : "",
                      bound_proof_form.value, pass ? "PASS" : "FAIL");
        return buf;
    }
};

// Exhaustive check over every code matrix, predicted codeword, and trimmed
// column, through the real decode path. Feasible only for tiny instances.
inline TrimLemmaReport verify_trim_lemma_exact(int n_classes, int code_length, double r) {
    detail::check_enum_size(n_classes, code_length, "verify_trim_lemma_exact");
    TrimLemmaReport rep;
    rep.n_classes = n_classes;
    rep.code_length = code_length;
    rep.r = r;
    rep.exact = true;
    rep.bound = bounds::trim_bound(n_classes, code_length, r, 1);
    rep.bound_proof_form = bounds::trim_bound_proof_form(n_classes, code_length, r, 1);

    const double threshold = static_cast<double>(code_length) * r;
    const std::uint64_t z_total = 1ull << (n_classes * code_length);
    const std::uint64_t c_total = 1ull << code_length;
    for (std::uint64_t zbits = 0; zbits < z_total; ++zbits) {
        const CodeMatrix code = detail::code_from_bits(n_classes, code_length, zbits);
        std::vector<CodeMatrix> trimmed(code_length);
        for (int j = 0; j < code_length; ++j) trimmed[j] = code.without_column(j);
        for (std::uint64_t cbits = 0; cbits < c_total; ++cbits) {
            Codeword c(code_length);
            for (int j = 0; j < code_length; ++j) c[j] = (cbits >> j) & 1 ? -1 : +1;
            const DecodeResult full = decode(code, c, r);
            for (int j = 0; j < code_length; ++j) {
                Codeword ct = c;
                ct.erase(ct.begin() + j);
                const DecodeResult loo = decode_with_threshold(trimmed[j], ct, threshold);
                rep.disagreements += loo.label != full.label;
                ++rep.comparisons;
            }
        }
    }
    rep.disagreement =
        static_cast<double>(rep.disagreements) / static_cast<double>(rep.comparisons);
    rep.pass = rep.bound.vacuous || rep.disagreement <= rep.bound.value;
    return rep;
}

// Monte Carlo over random (Z, codeword) pairs; all M leave-one-out columns
// are checked per draw with incrementally maintained distances. The standard
// error is computed at the draw level, where samples are independent.
inline TrimLemmaReport verify_trim_lemma_mc(int n_classes, int code_length, double r,
                                            std::size_t trials, std::uint64_t seed) {
    if (trials < 2) throw DomainError("verify_trim_lemma_mc: need at least 2 trials");
    TrimLemmaReport rep;
    rep.n_classes = n_classes;
    rep.code_length = code_length;
    rep.r = r;
    rep.exact = false;
    rep.trials = trials;
    rep.bound = bounds::trim_bound(n_classes, code_length, r, 1);
    rep.bound_proof_form = bounds::trim_bound_proof_form(n_classes, code_length, r, 1);

    const double threshold = static_cast<double>(code_length) * r;
    double sum = 0.0, sum_sq = 0.0;
    std::vector<int> d(n_classes), dloo(n_classes);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::uint64_t key = rng::fold(seed, trial);
        const CodeMatrix code = sample_code(n_classes, code_length, rng::fold(key, 1));
        rng::Stream cs(rng::fold(key, 2));
        Codeword c(code_length);
        for (int j = 0; j < code_length; ++j) c[j] = cs.sign();

        for (int y = 0; y < n_classes; ++y) {
            int dist = 0;
            for (int j = 0; j < code_length; ++j) dist += code.at(y, j) != c[j];
            d[y] = dist;
        }
        const int full = detail::decide_from_distances(d, threshold);
        int changed = 0;
        for (int j = 0; j < code_length; ++j) {
            for (int y = 0; y < n_classes; ++y) dloo[y] = d[y] - (code.at(y, j) != c[j]);
            changed += detail::decide_from_distances(dloo, threshold) != full;
        }
        rep.disagreements += static_cast<std::size_t>(changed);
        rep.comparisons += static_cast<std::size_t>(code_length);
        const double frac = static_cast<double>(changed) / static_cast<double>(code_length);
        sum += frac;
        sum_sq += frac * frac;
    }
    const double t = static_cast<double>(trials);
    rep.disagreement = sum / t;
    const double var = std::max(0.0, (sum_sq - t * rep.disagreement * rep.disagreement) /
                                         ((t - 1.0) * t));
    rep.std_error = std::sqrt(var);
    rep.pass =
        rep.bound.vacuous || rep.disagreement <= rep.bound.value + 3.0 * rep.std_error;
    return rep;
}

// Exact enumeration when the instance is tiny, Monte Carlo otherwise.
inline TrimLemmaReport verify_trim_lemma(int n_classes, int code_length, double r,
                                         std::size_t trials, std::uint64_t seed = 0) {
    if (n_classes * code_length <= 20 && n_classes * code_length + code_length <= 24)
        return verify_trim_lemma_exact(n_classes, code_length, r);
    return verify_trim_lemma_mc(n_classes, code_length, r, trials, seed);
}

// ---- Binomial lemma verification (oracle-simulated) --------------------------------

// Stochastic stub classifier committee: bit j on x is the code row entry
// Z_{yj}; on x+rho it flips independently with probability q_flip. This makes
// the lemma's independence hypothesis true by construction, so its
// conclusion is a hard assertion rather than a heuristic.
struct OracleClassifierParams {
    double q_flip = 0.5;

    void validate() const {
        if (!(q_flip >= 0.0 && q_flip <= 1.0))
            throw DomainError("OracleClassifierParams: q_flip must lie in [0,1]");
    }
};

struct ExactEnumeration {
    std::uint64_t successes = 0;
    std::uint64_t total = 0;
    double probability = 0.0;
};

// q_flip = 1 closed case: the perturbed codeword is exactly the negated true
// row; enumerate all code matrices and count decodes landing on a wrong
// non-abstain label.
inline ExactEnumeration exact_full_flip_success(int n_classes, int code_length, double r) {
    detail::check_enum_size(n_classes, code_length, "exact_full_flip_success");
    ExactEnumeration out;
    out.total = 1ull << (n_classes * code_length);
    for (std::uint64_t zbits = 0; zbits < out.total; ++zbits) {
        const CodeMatrix code = detail::code_from_bits(n_classes, code_length, zbits);
        Codeword c = code.row(0);
        for (auto& b : c) b = -b;
        const DecodeResult res = decode(code, c, r);
        out.successes += (!res.abstained && res.label != 0);
    }
    out.probability = static_cast<double>(out.successes) / static_cast<double>(out.total);
    return out;
}

struct BinomialLemmaReport {
    int n_classes = 0;
    int code_length = 0;
    double r = 0.0;
    double q_flip = 0.0;
    std::size_t trials = 0;
    double delta_true = 0.0;  // 1 - q_flip: the stub's actual per-classifier failure rate

    Estimate pr_etj;       // (a) per-column agreement-with-target probability
    double pr_etj_cap = 0.0;  // 1 - delta_true/2
    bool pass_conditioning = false;

    Estimate success;              // (b) measured ensemble success eps-hat
    double empirical_flip_rate = 0.0;  // sanity: fraction of flipped bits observed
    double delta_bound_at_eps = 0.0;
    double delta_bound_spread = 0.0;  // half-range of the bound across the eps CI
    bool pass_delta_bound = false;

    double union_exact = 0.0;  // (c) (N-1) * P[Bin(M, 1/2) < Mr], exact CDF
    bool below_union = false;
    bool pass_union_match = false;

    bool pass = false;

    json to_json() const {
        return json{{"n_classes", n_classes},
                    {"code_length", code_length},
                    {"r", r},
                    {"q_flip", q_flip},
                    {"trials", trials},
                    {"delta_true", delta_true},
                    {"pr_etj", pr_etj.mean},
                    {"pr_etj_cap", pr_etj_cap},
                    {"pass_conditioning", pass_conditioning},
                    {"success", success.mean},
                    {"success_ci", json::array({success.ci_lo, success.ci_hi})},
                    {"empirical_flip_rate", empirical_flip_rate},
                    {"delta_bound_at_eps", delta_bound_at_eps},
                    {"pass_delta_bound", pass_delta_bound},
                    {"union_exact", union_exact},
                    {"below_union", below_union},
                    {"pass_union_match", pass_union_match},
                    {"pass", pass}};
    }

    std::string to_table() const {
        char buf[420];
        std::snprintf(buf, sizeof buf,
                      "binomial lemma  N=%d M=%d r=%g q_flip=%g  (delta_true=%g)\n"
                      "  (a) Pr[E_tj] %.5f <= cap %.5f : %s\n"
                      "  (b) success eps-hat %.5f in [%.5f, %.5f]; delta bound %.5f : %s\n"
                      "  (c) exact union %.6f, below=%s, within 3 sigma : %s\n"
                      "  %s\n",
                      n_classes, code_length, r, q_flip, delta_true, pr_etj.mean, pr_etj_cap,
                      pass_conditioning ? "ok" : "FAIL", success.mean, success.ci_lo,
                      success.ci_hi, delta_bound_at_eps, pass_delta_bound ? "ok" : "FAIL",
                      union_exact, below_union ? "yes" : "no",
                      pass_union_match ? "ok" : "FAIL", pass ? "PASS" : "FAIL");
        return buf;
    }
};

inline BinomialLemmaReport verify_binomial_lemma(const OracleClassifierParams& params,
                                                 int n_classes, int code_length, double r,
                                                 std::size_t trials, std::uint64_t seed = 0) {
    params.validate();
    if (n_classes < 2) throw DomainError("verify_binomial_lemma: n_classes must be >= 2");
    if (code_length < 1) throw DomainError("verify_binomial_lemma: code_length must be >= 1");
    if (!(r > 0.0 && r < 1.0)) throw DomainError("verify_binomial_lemma: r must lie in (0,1)");
    if (trials < 2) throw DomainError("verify_binomial_lemma: need at least 2 trials");

    BinomialLemmaReport rep;
    rep.n_classes = n_classes;
    rep.code_length = code_length;
    rep.r = r;
    rep.q_flip = params.q_flip;
    rep.trials = trials;
    rep.delta_true = 1.0 - params.q_flip;
    rep.pr_etj_cap = 1.0 - rep.delta_true / 2.0;

    // (a) conditioning identity Pr[E_tj] <= 1 - delta/2, Monte Carlo over
    // one code column and one flip.
    {
        const std::uint64_t key = rng::fold(seed, 0xA);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < trials; ++i) {
            rng::Stream s(rng::fold(key, i));
            const int zy = s.sign();
            const int zt = s.sign();
            const int f = s.bernoulli(params.q_flip) ? -zy : zy;
            hits += f == zt;
        }
        rep.pr_etj = wilson(hits, trials);
        rep.pass_conditioning =
            rep.pr_etj.mean <= rep.pr_etj_cap + 3.0 * rep.pr_etj.std_error();
    }

    // (b) full committee success eps-hat over fresh codes; the challenge row
    // is class 0 (rows are exchangeable under the sampling scheme).
    {
        const std::uint64_t key = rng::fold(seed, 0xB);
        std::size_t successes = 0;
        std::size_t flipped_bits = 0;
        Codeword c(code_length);
        for (std::size_t i = 0; i < trials; ++i) {
            const std::uint64_t tkey = rng::fold(key, i);
            const CodeMatrix code = sample_code(n_classes, code_length, rng::fold(tkey, 1));
            rng::Stream flips(rng::fold(tkey, 2));
            for (int j = 0; j < code_length; ++j) {
                const int bit = code.at(0, j);
                const bool flip = flips.bernoulli(params.q_flip);
                flipped_bits += flip;
                c[j] = flip ? -bit : bit;
            }
            const DecodeResult out = decode(code, c, r);
            successes += (!out.abstained && out.label != 0);
        }
        rep.success = wilson(successes, trials);
        rep.empirical_flip_rate = static_cast<double>(flipped_bits) /
                                  (static_cast<double>(trials) * code_length);

        // delta_bound is decreasing in eps; propagate the eps standard error
        // through it for the tolerance.
        const double se = rep.success.std_error();
        const auto bound_at = [&](double eps) {
            eps = std::clamp(eps, 1e-300, 1.0);
            return bounds::delta_bound(code_length, r, eps);
        };
        if (rep.success.mean <= 0.0) {
            // eps-hat of zero certifies nothing to bound; vacuously consistent.
            rep.delta_bound_at_eps = bound_at(rep.success.ci_hi);
            rep.pass_delta_bound = true;
        } else {
            rep.delta_bound_at_eps = bound_at(rep.success.mean);
            rep.delta_bound_spread =
                (bound_at(rep.success.mean - se) - bound_at(rep.success.mean + se)) / 2.0;
            rep.pass_delta_bound =
                rep.delta_true <= rep.delta_bound_at_eps + 3.0 * rep.delta_bound_spread;
        }
    }

    // (c) the proof's per-class binomial tail times the union factor,
    // computed with the exact CDF at the stub's exact Pr[E_tj] = 1/2.
    {
        const double tail =
            binomial_cdf_strictly_less(code_length, 0.5, static_cast<double>(code_length) * r);
        rep.union_exact = static_cast<double>(n_classes - 1) * tail;
        rep.below_union = rep.success.mean <= rep.union_exact;
        rep.pass_union_match =
            std::abs(rep.success.mean - rep.union_exact) <= 3.0 * rep.success.std_error();
    }

    rep.pass = rep.pass_conditioning && rep.pass_delta_bound && rep.pass_union_match;
    return rep;
}

// ---- Accuracy sweep over r ------------------------------------------------------------

struct AccuracyPoint {
    double r = 0.0;
    double true_accuracy = 0.0;         // natural points: correct non-abstaining prediction
    double adversarial_accuracy = 0.0;  // attacked points: prediction in {y, abstain}
    double abstain_rate = 0.0;          // natural points
};

// Decoding is recomputed from cached codewords, so sweeping r costs no
// retraining and every point of the curve sees identical classifier outputs.
inline std::vector<AccuracyPoint> accuracy_sweep(const Ensemble& ens, const Dataset& natural,
                                                 const Matrix& adversarial,
                                                 std::span<const int> adversarial_labels,
                                                 std::span<const double> r_grid) {
    if (adversarial.rows() != adversarial_labels.size())
        throw DimensionError("accuracy_sweep: adversarial label count mismatch");
    std::vector<Codeword> nat(natural.size()), adv(adversarial.rows());
    for (std::size_t i = 0; i < natural.size(); ++i)
        nat[i] = ens.predict_codeword(natural.features.row(i));
    for (std::size_t i = 0; i < adversarial.rows(); ++i)
        adv[i] = ens.predict_codeword(adversarial.row(i));

    std::vector<AccuracyPoint> out;
    out.reserve(r_grid.size());
    for (const double r : r_grid) {
        if (!(r >= 0.0 && r <= 1.0)) throw DomainError("accuracy_sweep: r must lie in [0,1]");
        AccuracyPoint p;
        p.r = r;
        std::size_t correct = 0, abstain = 0, adv_ok = 0;
        for (std::size_t i = 0; i < nat.size(); ++i) {
            const DecodeResult d = decode(ens.code, nat[i], r);
            correct += (!d.abstained && d.label == natural.labels[i]);
            abstain += d.abstained;
        }
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const DecodeResult d = decode(ens.code, adv[i], r);
            adv_ok += (d.abstained || d.label == adversarial_labels[i]);
        }
        p.true_accuracy = nat.empty() ? 0.0 : static_cast<double>(correct) / nat.size();
        p.abstain_rate = nat.empty() ? 0.0 : static_cast<double>(abstain) / nat.size();
        p.adversarial_accuracy = adv.empty() ? 1.0 : static_cast<double>(adv_ok) / adv.size();
        out.push_back(p);
    }
    return out;
}

// ---- Composite reduction simulation ------------------------------------------------------

struct ReductionReport {
    TrimLemmaReport trim;
    BinomialLemmaReport binomial;
    bounds::BoundValue trim_bound_q;   // at the configured query count
    bounds::BoundValue trim_bound_q_proof_form;
    bounds::BoundValue epsilon_at_delta_true;
    double success_floor = 0.0;
    long queries = 1;
    bool pass = false;

    json to_json() const {
        return json{{"trim", trim.to_json()},
                    {"binomial", binomial.to_json()},
                    {"queries", queries},
                    {"trim_bound_at_q", trim_bound_q.value},
                    {"trim_bound_at_q_proof_form", trim_bound_q_proof_form.value},
                    {"epsilon_bound_at_delta_true", epsilon_at_delta_true.value},
                    {"epsilon_bound_vacuous", epsilon_at_delta_true.vacuous},
                    {"success_floor", success_floor},
                    {"pass", pass}};
    }

    std::string to_table() const {
        std::string out = trim.to_table() + binomial.to_table();
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "reduction  Q=%ld  trim bound %.4g (proof form %.4g)  "
                      "eps bound at delta_true %.4g%s  success floor %.4g\n"
                      "  overall %s\n",
                      queries, trim_bound_q.value, trim_bound_q_proof_form.value,
                      epsilon_at_delta_true.value, epsilon_at_delta_true.vacuous ? " (vacuous)" : "",
                      success_floor, pass ? "PASS" : "FAIL");
        out += buf;
        return out;
    }
};

// End-to-end check of the reduction's two pillars against the oracle-
// simulated world, plus the closed-form certificates at these parameters.
inline ReductionReport simulate_reduction(int n_classes, int code_length, double r,
                                          double q_flip, long queries, std::size_t trials,
                                          std::uint64_t seed) {
    ReductionReport rep;
    rep.queries = queries;
    rep.trim = verify_trim_lemma(n_classes, code_length, r, trials, rng::fold(seed, 1));
    OracleClassifierParams params;
    params.q_flip = q_flip;
    rep.binomial =
        verify_binomial_lemma(params, n_classes, code_length, r, trials, rng::fold(seed, 2));
    rep.trim_bound_q = bounds::trim_bound(n_classes, code_length, r, queries);
    rep.trim_bound_q_proof_form =
        bounds::trim_bound_proof_form(n_classes, code_length, r, queries);
    rep.epsilon_at_delta_true = bounds::epsilon_bound(code_length, r, rep.binomial.delta_true);
    rep.success_floor = bounds::success_floor(n_classes, code_length, r, queries);
    rep.pass = rep.trim.pass && rep.binomial.pass;
    return rep;
}

}  // namespace recoc::lab
