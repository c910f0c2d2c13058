#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recoc/binary_learner.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/errors.hpp"
#include "recoc/rng.hpp"

namespace recoc {

// The l-inf ball around a challenge point, intersected with the valid
// feature range. epsilon is in normalized feature units and has no default:
// budgets quoted on a byte scale must be converted by the caller (see
// epsilon_from_pixel_scale).
struct PerturbationSpace {
    double epsilon = 0.0;
    double clip_lo = 0.0;
    double clip_hi = 1.0;

    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("PerturbationSpace: epsilon must be > 0");
        if (!(clip_lo < clip_hi)) throw ConfigError("PerturbationSpace: clip_lo must be < clip_hi");
    }

    bool contains(std::span<const double> rho) const {
        for (double v : rho)
            if (!(std::abs(v) <= epsilon)) return false;
        return true;
    }
};

enum class AttackKind { Fgsm, Pgd, Migm };

inline const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        default: return "migm";
    }
}
inline AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "fgsm") return AttackKind::Fgsm;
    if (s == "pgd") return AttackKind::Pgd;
    if (s == "migm") return AttackKind::Migm;
    throw ConfigError("unknown attack kind: " + s);
}

struct AttackConfig {
    AttackKind kind = AttackKind::Fgsm;
    int steps = 1;
    double step_size = 0.0;  // per-step l-inf increment for pgd/migm; fgsm always uses epsilon
    double momentum = 0.0;   // migm only
    std::optional<int> targeted;

    void validate() const {
        if (steps < 1) throw ConfigError("AttackConfig: steps must be >= 1");
        if (kind != AttackKind::Fgsm && !(step_size > 0.0))
            throw ConfigError("AttackConfig: step_size must be > 0");
        if (!(momentum >= 0.0)) throw ConfigError("AttackConfig: momentum must be >= 0");
    }
};

namespace detail {

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Per-coordinate feasible interval: the widest [lo_i, hi_i] such that any
// value inside it satisfies both fl(v - x_i) within [-eps, eps] under double
// subtraction and the clip range. The nextafter walk makes the ball bound
// exact rather than off by an ulp, so containment is a hard guarantee.
struct FeasibleBox {
    std::vector<double> lo, hi;
};

inline FeasibleBox feasible_box(std::span<const double> x, const PerturbationSpace& space) {
    space.validate();
    FeasibleBox box;
    box.lo.resize(x.size());
    box.hi.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < space.clip_lo || x[i] > space.clip_hi)
            throw DomainError("attack: challenge point outside clip range");
        double hi = x[i] + space.epsilon;
        while (hi - x[i] > space.epsilon) hi = std::nextafter(hi, x[i]);
        double lo = x[i] - space.epsilon;
        while (x[i] - lo > space.epsilon) lo = std::nextafter(lo, x[i]);
        box.hi[i] = std::min(space.clip_hi, hi);
        box.lo[i] = std::max(space.clip_lo, lo);
    }
    return box;
}

inline void clamp_into(std::vector<double>& v, const FeasibleBox& box) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], box.lo[i], box.hi[i]);
}

// Shared iteration for all three attacks. `alpha` is the per-step increment;
// `momentum < 0` selects the plain-gradient path (fgsm/pgd), otherwise the
// L1-normalized accumulated-gradient path (migm).
inline std::vector<double> iterate_ascent(const SubstituteModel& m, std::span<const double> x,
                                          int y, const PerturbationSpace& space, int steps,
                                          double alpha, double momentum,
                                          std::optional<int> targeted) {
    if (x.size() != m.input_dim) throw DimensionError("attack: dimension mismatch");
    const FeasibleBox box = feasible_box(x, space);
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> acc(x.size(), 0.0);

    for (int k = 0; k < steps; ++k) {
        std::vector<double> g = input_gradient(m, cur, y, targeted);
        const double* dir = g.data();
        if (momentum >= 0.0) {
            double l1 = 0.0;
            for (double v : g) l1 += std::abs(v);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                // zero gradient: momentum carries the previous direction
                acc[i] = momentum * acc[i] + (l1 > 0.0 ? g[i] / l1 : 0.0);
            }
            dir = acc.data();
        }
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] += alpha * static_cast<double>(sign_of(dir[i]));
        clamp_into(cur, box);
        for (std::size_t i = 0; i < cur.size(); ++i)
            assert(cur[i] - x[i] <= space.epsilon && x[i] - cur[i] <= space.epsilon);
    }

    // The containment contract is asserted, not assumed.
    for (std::size_t i = 0; i < cur.size(); ++i) {
        if (!(cur[i] - x[i] <= space.epsilon) || !(x[i] - cur[i] <= space.epsilon) ||
            cur[i] < space.clip_lo || cur[i] > space.clip_hi)
            throw Error("attack: emitted point escaped the perturbation space");
    }
    return cur;
}

}  // namespace detail

// Single signed-gradient step of size epsilon.
inline std::vector<double> fgsm(const SubstituteModel& m, std::span<const double> x, int y,
                                const PerturbationSpace& space,
                                std::optional<int> targeted = std::nullopt) {
    return detail::iterate_ascent(m, x, y, space, 1, space.epsilon, -1.0, targeted);
}

inline std::vector<double> pgd(const SubstituteModel& m, std::span<const double> x, int y,
                               const PerturbationSpace& space, const AttackConfig& cfg) {
    cfg.validate();
    return detail::iterate_ascent(m, x, y, space, cfg.steps, cfg.step_size, -1.0, cfg.targeted);
}

inline std::vector<double> migm(const SubstituteModel& m, std::span<const double> x, int y,
                                const PerturbationSpace& space, const AttackConfig& cfg) {
    cfg.validate();
    return detail::iterate_ascent(m, x, y, space, cfg.steps, cfg.step_size, cfg.momentum,
                                  cfg.targeted);
}

inline std::vector<double> run_attack(const SubstituteModel& m, std::span<const double> x, int y,
                                      const PerturbationSpace& space, const AttackConfig& cfg) {
    switch (cfg.kind) {
        case AttackKind::Fgsm: return fgsm(m, x, y, space, cfg.targeted);
        case AttackKind::Pgd: return pgd(m, x, y, space, cfg);
        default: return migm(m, x, y, space, cfg);
    }
}

// ---- Black-box substitute attack -------------------------------------------

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_vector(std::span<const double> v) {
    return fnv1a64(reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double));
}

struct QueryRecord {
    int epoch = 0;
    std::uint64_t query_hash = 0;
    int answer = 0;
    std::size_t query_seq = 0;   // global sequence number when the query was formed
    std::size_t answer_seq = 0;  // global sequence number when the answer arrived
};

// Append-only record of every oracle interaction. The sequence numbers exist
// so tests can check nonadaptivity structurally: within an epoch, every
// query_seq precedes every answer_seq.
struct QueryLog {
    std::vector<QueryRecord> records;

    std::string to_jsonl() const {
        std::string out;
        char buf[96];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof buf,
                          "{\"answer\":%d,\"epoch\":%d,\"query_vector_hash\":\"0x%016llx\"}\n",
                          r.answer, r.epoch,
                          static_cast<unsigned long long>(r.query_hash));
            out += buf;
        }
        return out;
    }
};

struct SubstituteAttackConfig {
    int augmentation_epochs = 0;     // 0 = pure transfer from the public-data substitute
    double lambda = 0.1;             // augmentation step, normalized feature units
    SubstituteArch arch = SubstituteArch::Mlp;
    TrainConfig train;
    std::size_t queries_per_epoch = 0;  // 0 = query every current point

    void validate() const {
        if (augmentation_epochs < 0)
            throw ConfigError("SubstituteAttackConfig: augmentation_epochs must be >= 0");
        if (!(lambda > 0.0)) throw ConfigError("SubstituteAttackConfig: lambda must be > 0");
        train.validate();
    }
};

struct SubstituteAttackResult {
    std::vector<double> adversarial;
    SubstituteModel substitute;
    QueryLog log;
};

// Black-box pipeline: train a substitute on public data; each epoch, form
// synthetic points x + lambda * sign(grad of the currently-assigned label's
// logit), send them all, then read all answers, append, retrain; finally run
// the configured white-box attack on the final substitute. Queries of epoch e
// are a pure function of the substitute trained before epoch e, which is what
// makes the protocol nonadaptive within an epoch.
inline SubstituteAttackResult substitute_attack(
    const std::function<int(std::span<const double>)>& oracle, const Dataset& initial_data,
    const SubstituteAttackConfig& cfg, const AttackConfig& attack,
    std::span<const double> challenge_x, int challenge_y, const PerturbationSpace& space) {
    cfg.validate();
    attack.validate();
    space.validate();
    initial_data.validate();

    Dataset pool = initial_data;
    pool.feature_lo = std::min(pool.feature_lo, space.clip_lo);
    pool.feature_hi = std::max(pool.feature_hi, space.clip_hi);

    SubstituteModel sub = train_substitute(pool, cfg.arch, cfg.train);
    QueryLog log;
    std::size_t seq = 0;

    for (int epoch = 1; epoch <= cfg.augmentation_epochs; ++epoch) {
        const SubstituteModel snapshot = sub;  // queries depend only on this
        const std::size_t budget =
            cfg.queries_per_epoch == 0 ? pool.size() : std::min(pool.size(), cfg.queries_per_epoch);

        std::vector<std::vector<double>> queries;
        queries.reserve(budget);
        std::vector<std::size_t> query_seqs;
        for (std::size_t i = 0; i < budget; ++i) {
            const auto xi = pool.features.row(i);
            const auto g = logit_gradient(snapshot, xi, pool.labels[i]);
            std::vector<double> q(xi.begin(), xi.end());
            for (std::size_t j = 0; j < q.size(); ++j) {
                q[j] += cfg.lambda * static_cast<double>(detail::sign_of(g[j]));
                q[j] = std::clamp(q[j], space.clip_lo, space.clip_hi);
            }
            query_seqs.push_back(seq++);
            queries.push_back(std::move(q));
        }

        for (std::size_t i = 0; i < queries.size(); ++i) {
            const int answer = oracle(queries[i]);
            if (answer == kAbstain)
                throw ProtocolError("substitute_attack: oracle abstained in no-abstain mode");
            if (answer < 0) throw ProtocolError("substitute_attack: oracle returned invalid label");
            log.records.push_back({epoch, hash_vector(queries[i]), answer, query_seqs[i], seq++});
            pool.features.append_row(queries[i]);
            pool.labels.push_back(answer);
            pool.n_classes = std::max(pool.n_classes, answer + 1);
        }

        TrainConfig epoch_cfg = cfg.train;
        epoch_cfg.seed = rng::fold(cfg.train.seed, static_cast<std::uint64_t>(epoch));
        sub = train_substitute(pool, cfg.arch, epoch_cfg);
    }

    SubstituteAttackResult result;
    result.adversarial = run_attack(sub, challenge_x, challenge_y, space, attack);
    result.substitute = std::move(sub);
    result.log = std::move(log);
    return result;
}

}  // namespace recoc
