// End-to-end acceptance gauntlet. Each criterion prints one line; the binary
// exits nonzero if any fails. argv[1] is the path to the command-line tool,
// used by the artifact-determinism criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recoc/attack.hpp"
#include "recoc/bounds.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/ensemble.hpp"
#include "recoc/rng.hpp"
#include "recoc/security_lab.hpp"
#include "recoc/serialize.hpp"

namespace fs = std::filesystem;
using namespace recoc;
using nlohmann::json;

namespace {

struct Checker {
    bool ok = true;
    std::string why;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            why = what;
        }
    }
};

bool rel_close(double got, double want, double tol) {
    return std::abs(got - want) <= tol * std::abs(want);
}

TrainConfig quick_config(int epochs = 30) {
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.epochs = epochs;
    return cfg;
}

// ---- criterion 1: closed-form certificate values --------------------------

void formula_suite(Checker& c) {
    c.expect(rel_close(bounds::h2(0.25), 0.81127812445913286, 1e-10), "h2(0.25)");
    c.expect(rel_close(bounds::h2(0.1), 0.46899559358928122, 1e-10), "h2(0.1)");
    c.expect(bounds::h2(0.5) == 1.0, "h2(0.5) exact");
    c.expect(bounds::h2(0.0) == 0.0 && bounds::h2(1.0) == 0.0, "h2 endpoints");

    c.expect(rel_close(bounds::trim_bound(10, 100, 0.1, 1).raw, 4.9575362207503782e-16, 1e-10),
             "trim_bound(10,100,0.1,1)");
    c.expect(rel_close(bounds::delta_bound(200, 0.05, 0.1), 0.25174271293851464, 1e-10),
             "delta_bound(200,0.05,0.1)");
    c.expect(rel_close(bounds::epsilon_bound(200, 0.05, 0.3).value, 0.01831563888873418, 1e-10),
             "epsilon_bound(200,0.05,0.3)");
    c.expect(rel_close(bounds::binom_entropy_bound(10, 0.5), 258.36877025486439, 1e-10),
             "binom_entropy_bound(10,0.5)");
    c.expect(rel_close(bounds::hoeffding_tail(100, 0.5, 0.1), 0.13533528323661269, 1e-10),
             "hoeffding_tail(100,0.5,0.1)");

    for (const int m : {1, 5, 20, 200}) {
        for (const double r : {0.05, 0.2, 0.25, 0.4}) {
            c.expect(bounds::delta_bound(m, r, 1.0) == 2.0 * r, "delta_bound at eps=1 is 2r");
            const bounds::BoundValue e = bounds::epsilon_bound(m, r, 2.0 * r);
            c.expect(e.value == 1.0 && e.vacuous, "epsilon_bound at delta=2r is vacuous 1");
        }
    }

    c.expect(rel_close(bounds::union_success_bound(11, 0.05).value, 0.5, 1e-12), "union N=11");
    c.expect(bounds::union_success_bound(2, 0.125).value == 0.125, "union N=2 passthrough");
    c.expect(bounds::union_success_bound(9, 0.0).value == 0.0, "union zero tail");

    const double doubled = bounds::trim_bound(10, 50, 0.1, 2).raw;
    c.expect(doubled == 2.0 * bounds::trim_bound(10, 50, 0.1, 1).raw, "trim linear in Q");
}

// ---- criterion 2: entropy bound dominates the exact binomial --------------

void entropy_domination(Checker& c) {
    for (int n = 2; n <= 30; ++n) {
        std::vector<unsigned long long> row(n + 1, 1);
        for (int i = 1; i <= n; ++i)
            for (int k = i - 1; k >= 1; --k) row[k] += row[k - 1];
        for (int k = 1; k < n; ++k) {
            const double lambda = static_cast<double>(k) / n;
            const double bound = bounds::binom_entropy_bound(n, lambda);
            c.expect(bound >= static_cast<double>(row[k]),
                     "entropy bound below binom(" + std::to_string(n) + "," + std::to_string(k) +
                         ")");
        }
    }
}

// ---- criterion 3: lower-tail bound dominates the exact CDF ----------------

void hoeffding_domination(Checker& c) {
    for (int n = 10; n <= 200; n += 10) {
        for (int pi = 1; pi <= 9; ++pi) {
            const double p = pi / 10.0;
            for (int ai = 1; ai <= 10 * pi; ai += 2) {
                const double alpha = ai / 100.0;
                const long long num = static_cast<long long>(n) * (10LL * pi - ai);
                const int k = static_cast<int>(num / 100);  // floor((p-alpha)n), exact
                const double cdf = lab::binomial_cdf_leq(n, p, k);
                const double bound = bounds::hoeffding_tail(n, p, alpha);
                c.expect(cdf <= bound * (1.0 + 1e-9),
                         "tail bound violated at n=" + std::to_string(n) +
                             " p=" + std::to_string(p) + " alpha=" + std::to_string(alpha));
            }
        }
    }
}

// ---- criterion 4: trimming stability, exhaustive and sampled --------------

void trim_verification(Checker& c) {
    const auto exact = lab::verify_trim_lemma_exact(2, 3, 0.4);
    c.expect(exact.comparisons == 1536 && exact.disagreements == 528,
             "exhaustive count off: " + std::to_string(exact.disagreements));
    c.expect(exact.disagreement <= exact.bound.value, "exact disagreement above certificate");
    c.expect(exact.pass, "exhaustive trim check failed");

    const auto mc = lab::verify_trim_lemma_mc(10, 50, 0.1, 100000, 42);
    c.expect(mc.pass, "sampled trim check exceeded bound + 3 sigma");
    c.expect(!mc.bound.vacuous, "certificate unexpectedly vacuous at N=10 M=50");
}

// ---- criterion 5: stub-committee success vs the closed forms --------------

void oracle_committee(Checker& c) {
    for (const double q : {0.7, 0.9}) {
        lab::OracleClassifierParams params;
        params.q_flip = q;
        const auto rep = lab::verify_binomial_lemma(params, 10, 20, 0.25, 20000, 31337);
        const std::string tag = " (q_flip " + std::to_string(q) + ")";
        c.expect(rep.pass_conditioning, "per-column conditioning cap violated" + tag);
        c.expect(rep.pass_delta_bound, "delta certificate missed" + tag);
        c.expect(rep.pass_union_match, "union value missed" + tag);
        c.expect(rep.union_exact == 0.053180694580078125, "union closed form drifted" + tag);
    }
}

// ---- criterion 6: sign equivariance, weights and whole committee ----------

void sign_equivariance(Checker& c) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        rng::Stream g(rng::fold(0xE9, s));
        Matrix x(0, 3);
        std::vector<int> z;
        for (int i = 0; i < 24; ++i) {
            x.append_row(std::vector<double>{g.gaussian(), g.gaussian(), g.gaussian()});
            z.push_back(g.bernoulli(0.5) ? +1 : -1);
        }
        bool both = false, flip = false;
        for (int v : z) {
            both |= v == +1;
            flip |= v == -1;
        }
        if (!both || !flip) z[0] = -z[0];

        std::vector<int> neg(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) neg[i] = -z[i];
        const TrainConfig cfg = quick_config(25);
        const BinaryClassifier a = train_binary(x, z, cfg, BinaryKind::LogisticLinear);
        const BinaryClassifier b = train_binary(x, neg, cfg, BinaryKind::LogisticLinear);
        for (std::size_t j = 0; j < a.w.size(); ++j)
            c.expect(b.w[j] == -a.w[j], "weight negation broke at set " + std::to_string(s));
        c.expect(b.b == -a.b, "bias negation broke at set " + std::to_string(s));
        if (!c.ok) return;
    }

    const Dataset d = synth_gaussian(4, 3, 30, 7.0, 60);
    const CodeMatrix code = sample_code(4, 8, 61);
    const Ensemble a = build_ensemble_with_code(d, code, 0.4, 8, quick_config());
    CodeMatrix flipped = code;
    for (int i = 0; i < code.n_classes; ++i)
        flipped.entries[static_cast<std::size_t>(i) * code.code_length + 2] *= -1;
    const Ensemble b = build_ensemble_with_code(d, flipped, 0.4, 8, quick_config());

    rng::Stream probes(62);
    int violations = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> p(3);
        for (auto& v : p) v = d.feature_lo + (d.feature_hi - d.feature_lo) * probes.unit();
        const DecodeResult ra = a.classify(p);
        const DecodeResult rb = b.classify(p);
        violations += !(ra.label == rb.label && ra.abstained == rb.abstained &&
                        ra.distance == rb.distance);
    }
    c.expect(violations == 0,
             "column-flip invariance violated on " + std::to_string(violations) + " probes");
}

// ---- criterion 7: accuracy / abstention monotonicity in r -----------------

void radius_monotonicity(Checker& c) {
    const Dataset all = synth_gaussian(10, 20, 40, 9.0, 70);
    const auto [train_data, eval_data] = split_at(all, 250);
    const Ensemble ens = build_ensemble(train_data, 10, 64, 0.2, 71, quick_config());

    TrainConfig sub_cfg = quick_config(40);
    const SubstituteModel sub =
        train_substitute(train_data, SubstituteArch::LinearSoftmax, sub_cfg);
    PerturbationSpace space;
    space.epsilon = 0.25;
    space.clip_lo = all.feature_lo;
    space.clip_hi = all.feature_hi;

    Matrix adv(0, all.dim());
    std::vector<int> adv_labels;
    for (std::size_t i = 0; i < eval_data.size(); ++i) {
        const auto x = eval_data.features.row(i);
        adv.append_row(fgsm(sub, x, eval_data.labels[i], space));
        adv_labels.push_back(eval_data.labels[i]);
    }

    const std::vector<double> grid{0.0,  0.05, 0.1,  0.15, 0.2,
                                   0.25, 0.3,  0.35, 0.4,  0.45};
    const auto sweep = lab::accuracy_sweep(ens, eval_data, adv, adv_labels, grid);
    c.expect(sweep.size() == 10, "sweep size");
    c.expect(sweep.front().true_accuracy == 0.0 && sweep.front().adversarial_accuracy == 1.0,
             "r=0 must give exactly (0, 1)");
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        c.expect(sweep[i].true_accuracy >= sweep[i - 1].true_accuracy,
                 "true accuracy dipped at r=" + std::to_string(sweep[i].r));
        c.expect(sweep[i].adversarial_accuracy <= sweep[i - 1].adversarial_accuracy,
                 "adversarial accuracy rose at r=" + std::to_string(sweep[i].r));
    }
}

// ---- criterion 8: attack emission contracts --------------------------------

void attack_contracts(Checker& c) {
    std::vector<SubstituteModel> models;
    for (int dim = 1; dim <= 8; ++dim) {
        const Dataset d = synth_gaussian(3, dim, 20, 5.0, 200 + dim);
        models.push_back(train_substitute(d, SubstituteArch::Mlp, quick_config(20)));
    }

    rng::Stream s(808);
    for (int trial = 0; trial < 10000; ++trial) {
        const int dim = 1 + static_cast<int>(s.unit() * 8);
        const SubstituteModel& m = models[dim - 1];
        PerturbationSpace space;
        space.clip_lo = -1.0;
        space.clip_hi = 2.0;
        space.epsilon = 0.001 + 0.4 * s.unit();

        std::vector<double> x(dim);
        for (auto& v : x) {
            const double u = s.unit();
            v = u < 0.05 ? space.clip_lo
                         : (u > 0.95 ? space.clip_hi
                                     : space.clip_lo + 3.0 * s.unit());
        }
        AttackConfig cfg;
        const double kind = s.unit();
        cfg.kind = kind < 0.34 ? AttackKind::Fgsm
                               : (kind < 0.67 ? AttackKind::Pgd : AttackKind::Migm);
        cfg.steps = 1 + static_cast<int>(s.unit() * 4);
        cfg.step_size = space.epsilon * (0.2 + s.unit());
        cfg.momentum = s.bernoulli(0.5) ? s.unit() : 0.0;
        const int y = static_cast<int>(s.unit() * 3);
        if (s.bernoulli(0.3)) cfg.targeted = (y + 1) % 3;

        const auto adv = run_attack(m, x, y, space, cfg);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const bool inside = adv[i] - x[i] <= space.epsilon &&
                                x[i] - adv[i] <= space.epsilon &&
                                adv[i] >= space.clip_lo && adv[i] <= space.clip_hi;
            if (!inside) {
                c.expect(false, "escape at trial " + std::to_string(trial));
                return;
            }
        }
    }

    const SubstituteModel& m4 = models[3];
    PerturbationSpace space;
    space.epsilon = 0.15;
    space.clip_lo = -1.0;
    space.clip_hi = 2.0;
    rng::Stream t(809);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x) v = space.clip_lo + 3.0 * t.unit();
        const int y = static_cast<int>(t.unit() * 3);
        const std::optional<int> tgt =
            t.bernoulli(0.5) ? std::optional<int>((y + 1) % 3) : std::nullopt;
        const auto a = fgsm(m4, x, y, space, tgt);
        AttackConfig pg;
        pg.kind = AttackKind::Pgd;
        pg.steps = 1;
        pg.step_size = space.epsilon;
        pg.targeted = tgt;
        AttackConfig mi = pg;
        mi.kind = AttackKind::Migm;
        mi.momentum = 0.0;
        c.expect(a == pgd(m4, x, y, space, pg), "pgd(1, eps) != fgsm");
        c.expect(a == migm(m4, x, y, space, mi), "migm(0, 1, eps) != fgsm");
        if (!c.ok) return;
    }

    const Dataset d = synth_gaussian(3, 4, 40, 6.0, 210);
    const SubstituteModel g = train_substitute(d, SubstituteArch::Mlp, quick_config(40));
    rng::Stream u(810);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x) v = d.feature_lo + (d.feature_hi - d.feature_lo) * u.unit();
        const int y = static_cast<int>(u.unit() * 3);
        const auto grad = input_gradient(g, x, y);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
            std::vector<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (g.loss(xp, y) - g.loss(xm, y)) / (2.0 * h);
            const double scale = std::max({1e-6, std::abs(fd), std::abs(grad[j])});
            c.expect(std::abs(grad[j] - fd) / scale < 1e-4,
                     "gradient mismatch at trial " + std::to_string(trial));
        }
        if (!c.ok) return;
    }
}

// ---- criterion 9: protocol shape ------------------------------------------

Dataset permute_classes(const Dataset& a, const std::vector<int>& pi) {
    Dataset b = a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.dim(); ++j)
            b.features(i, static_cast<std::size_t>(pi[j])) = a.features(i, j);
        b.labels[i] = pi[a.labels[i]];
    }
    return b;
}

void protocol_shape(Checker& c) {
    const Dataset train_a = synth_gaussian_symmetric(3, 40, 8.0, 900);
    const Dataset eval_a = synth_gaussian_symmetric(3, 10, 8.0, 901);
    const std::vector<int> pi{1, 2, 0};
    const Dataset train_b = permute_classes(train_a, pi);
    const Dataset eval_b = permute_classes(eval_a, pi);

    lab::GridConfig cfg;
    cfg.sample_size = 40;
    cfg.binary_train = quick_config(25);
    cfg.substitute_train = quick_config(25);
    cfg.attack.kind = AttackKind::Fgsm;
    cfg.space.epsilon = 0.4;
    cfg.space.clip_lo = train_a.feature_lo;
    cfg.space.clip_hi = train_a.feature_hi;
    cfg.seed = 1001;
    const lab::GridReport rep_a = lab::pairwise_grid(train_a, eval_a, cfg);
    cfg.seed = 2002;
    const lab::GridReport rep_b = lab::pairwise_grid(train_b, eval_b, cfg);

    for (int y = 0; y < 3; ++y) {
        for (int t = 0; t < 3; ++t) {
            if (y == t) continue;
            const auto& ca = rep_a.cell(y, t);
            const auto& cb = rep_b.cell(pi[y], pi[t]);
            const double se_a = (ca.ci_hi - ca.ci_lo) / (2.0 * lab::kZ95);
            const double se_b = (cb.ci_hi - cb.ci_lo) / (2.0 * lab::kZ95);
            const double tol = 3.0 * std::sqrt(se_a * se_a + se_b * se_b);
            c.expect(std::abs(ca.mean - cb.mean) <= tol,
                     "grid asymmetry at (" + std::to_string(y) + "," + std::to_string(t) +
                         "): " + std::to_string(ca.mean) + " vs " + std::to_string(cb.mean));
        }
    }

    const Dataset d = synth_gaussian(3, 2, 20, 6.0, 902);
    const Ensemble target = build_ensemble(d, 3, 10, 0.4, 903, quick_config(25));
    const auto oracle = [&](std::span<const double> q) { return target.classify_no_abstain(q); };
    SubstituteAttackConfig sub_cfg;
    sub_cfg.augmentation_epochs = 1;
    sub_cfg.train = quick_config(20);
    AttackConfig attack;
    PerturbationSpace space;
    space.epsilon = 0.2;
    space.clip_lo = d.feature_lo;
    space.clip_hi = d.feature_hi;
    const auto res =
        substitute_attack(oracle, d, sub_cfg, attack, d.features.row(0), d.labels[0], space);
    c.expect(!res.log.records.empty(), "query log empty at one augmentation epoch");
    std::size_t max_q = 0, min_a = SIZE_MAX;
    for (const auto& recd : res.log.records) {
        max_q = std::max(max_q, recd.query_seq);
        min_a = std::min(min_a, recd.answer_seq);
    }
    c.expect(max_q < min_a, "some answer preceded the last query");
}

// ---- criterion 10: byte-identical artifacts ---------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

bool dirs_identical(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<std::string> names_a, names_b;
    for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file()) names_a.push_back(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b))
        if (e.is_regular_file()) names_b.push_back(e.path().filename().string());
    std::sort(names_a.begin(), names_a.end());
    std::sort(names_b.begin(), names_b.end());
    if (names_a != names_b) {
        why = "artifact sets differ under " + a.string();
        return false;
    }
    if (names_a.empty()) {
        why = "no artifacts under " + a.string();
        return false;
    }
    for (const auto& name : names_a) {
        if (slurp(a / name) != slurp(b / name)) {
            why = "artifact " + name + " differs between reruns";
            return false;
        }
    }
    return true;
}

void artifact_determinism(Checker& c, const std::string& cli) {
    if (cli.empty()) {
        c.expect(false, "no command-line tool path supplied");
        return;
    }
    const fs::path root = fs::current_path() / "acceptance-out";
    fs::remove_all(root);
    fs::create_directories(root);

    const std::string data = " --synth-classes 3 --synth-dim 2 --synth-per-class 16";
    const std::string model = (root / "t1" / "ensemble.json").string();
    const std::vector<std::pair<std::string, std::string>> runs{
        {"train", data + " --M 8 --r 0.3 --epochs 15 --lr 0.2 --seed 11"},
        {"classify", data + " --model " + model + " --seed 11"},
        {"attack", data + " --model " + model +
                       " --index 0 --attack pgd --epsilon 0.2 --steps 3 --aug-epochs 1"
                       " --queries-per-epoch 8 --sub-epochs 15 --seed 12"},
        {"challenge-grid", " --synth-classes 3 --synth-symmetric --synth-per-class 16"
                           " --train-count 24 --K 6 --epochs 15 --sub-epochs 15"
                           " --epsilon 0.3 --seed 13"},
        {"bounds", " --N 10 --M 100 --r 0.1 --Q 1 --epsilon 0.1 --delta 0.3"},
        {"sweep-r", data + " --train-count 24 --M 8 --epochs 15 --sub-epochs 15"
                           " --attack fgsm --epsilon 0.2 --r-grid 0,0.1,0.2,0.3 --seed 14"},
        {"verify-lemmas", " --exact --N 2 --M 3 --r 0.4 --seed 15"},
        {"simulate-reduction", " --N 10 --M 20 --r 0.25 --q-flip 0.9 --trials 20000 --seed 2025"},
    };

    std::size_t idx = 0;
    for (const auto& [sub, args] : runs) {
        const fs::path d1 = root / (sub == "train" ? std::string("t1")
                                                   : ("d" + std::to_string(idx) + "a"));
        const fs::path d2 = root / (sub == "train" ? std::string("t2")
                                                   : ("d" + std::to_string(idx) + "b"));
        const std::string base = cli + " " + sub + args + " --out ";
        const int rc1 = run_cli(base + d1.string());
        const int rc2 = run_cli(base + d2.string());
        if (rc1 != 0 || rc2 != 0) {
            c.expect(false, sub + " exited " + std::to_string(rc1) + "/" + std::to_string(rc2));
            return;
        }
        std::string why;
        if (!dirs_identical(d1, d2, why)) {
            c.expect(false, sub + ": " + why);
            return;
        }
        ++idx;
    }

    // spot-check one artifact's content through the CLI path
    const auto bounds_json = json::parse(slurp(root / "d4a" / "bounds.json"));
    c.expect(rel_close(bounds_json.at("trim_bound").get<double>(), 4.9575362207503782e-16,
                       1e-10),
             "CLI-reported trim bound drifted");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    int passed = 0, total = 0;

    const auto criterion = [&](int num, const std::string& name,
                               const std::function<void(Checker&)>& body) {
        Checker c;
        const auto start = std::chrono::steady_clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2d: %s  %s (%.1f s)%s%s\n", num, c.ok ? "PASS" : "FAIL",
                    name.c_str(), secs, c.ok ? "" : "  -- ", c.why.c_str());
        std::fflush(stdout);
        ++total;
        passed += c.ok;
    };

    criterion(1, "closed-form certificate values", formula_suite);
    criterion(2, "entropy bound dominates exact binomials (n <= 30)", entropy_domination);
    criterion(3, "lower-tail bound dominates the exact CDF", hoeffding_domination);
    criterion(4, "trimming stability, exhaustive and sampled", trim_verification);
    criterion(5, "stub committee matches the closed forms", oracle_committee);
    criterion(6, "sign equivariance of training and decoding", sign_equivariance);
    criterion(7, "accuracy/abstention monotone in the radius", radius_monotonicity);
    criterion(8, "attack emission contracts", attack_contracts);
    criterion(9, "protocol symmetry and query ordering", protocol_shape);
    criterion(10, "byte-identical artifacts on rerun",
              [&](Checker& c) { artifact_determinism(c, cli); });

    std::printf("%d/%d criteria passed\n", passed, total);
    return passed == total ? 0 : 1;
}
