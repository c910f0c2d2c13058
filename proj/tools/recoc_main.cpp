// Command-line driver: every experiment runs through here, writes its
// artifacts plus a manifest into a per-run output directory, and is
// reproducible byte-for-byte from (config, seed).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recoc/attack.hpp"
#include "recoc/binary_learner.hpp"
#include "recoc/bounds.hpp"
#include "recoc/codebook.hpp"
#include "recoc/data.hpp"
#include "recoc/ensemble.hpp"
#include "recoc/errors.hpp"
#include "recoc/security_lab.hpp"
#include "recoc/serialize.hpp"
#include "recoc/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int g_exit = 0;  // callbacks report verification failures here

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw recoc::IoError("cannot open " + path.string());
    out << content;
    if (!out) throw recoc::IoError("write failed for " + path.string());
}

fs::path ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw recoc::IoError("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

std::string hash_hex(const json& cfg) {
    const std::string s = cfg.dump();
    const std::uint64_t h =
        recoc::fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const json& cfg,
                    std::uint64_t seed) {
    const json manifest{{"subcommand", subcommand},
                        {"version", recoc::kVersion},
                        {"seed", seed},
                        {"config", cfg},
                        {"config_hash", hash_hex(cfg)}};
    recoc::ser::save_json(manifest, (dir / "manifest.json").string());
}

// ---- Shared option blocks -------------------------------------------------

struct DataOpts {
    std::string csv;
    std::string idx_images, idx_labels;
    int synth_classes = 0;
    int synth_dim = 2;
    int synth_per_class = 50;
    double synth_sep = 6.0;
    bool synth_symmetric = false;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--data-csv", d.csv, "dataset CSV (header y,x0,...)");
    cmd->add_option("--idx-images", d.idx_images, "IDX image file");
    cmd->add_option("--idx-labels", d.idx_labels, "IDX label file");
    cmd->add_option("--synth-classes", d.synth_classes, "generate a synthetic Gaussian dataset");
    cmd->add_option("--synth-dim", d.synth_dim, "synthetic feature dimension");
    cmd->add_option("--synth-per-class", d.synth_per_class, "synthetic points per class");
    cmd->add_option("--synth-sep", d.synth_sep, "synthetic class-center separation");
    cmd->add_flag("--synth-symmetric", d.synth_symmetric,
                  "permutation-symmetric synthetic layout (dim = classes)");
}

recoc::Dataset load_data(const DataOpts& d, std::uint64_t seed) {
    const int sources =
        !d.csv.empty() + !d.idx_images.empty() + (d.synth_classes > 0 ? 1 : 0);
    if (sources != 1)
        throw recoc::ConfigError(
            "exactly one data source required: --data-csv, --idx-images/--idx-labels, or "
            "--synth-classes");
    if (!d.idx_images.empty() != !d.idx_labels.empty())
        throw recoc::ConfigError("--idx-images and --idx-labels must be given together");
    if (!d.csv.empty()) return recoc::load_csv(d.csv);
    if (!d.idx_images.empty()) return recoc::load_idx(d.idx_images, d.idx_labels);
    if (d.synth_symmetric)
        return recoc::synth_gaussian_symmetric(d.synth_classes, d.synth_per_class, d.synth_sep,
                                               recoc::rng::fold(seed, 0xDA7A));
    return recoc::synth_gaussian(d.synth_classes, d.synth_dim, d.synth_per_class, d.synth_sep,
                                 recoc::rng::fold(seed, 0xDA7A));
}

json data_opts_json(const DataOpts& d) {
    return json{{"csv", d.csv},
                {"idx_images", d.idx_images},
                {"idx_labels", d.idx_labels},
                {"synth_classes", d.synth_classes},
                {"synth_dim", d.synth_dim},
                {"synth_per_class", d.synth_per_class},
                {"synth_sep", d.synth_sep},
                {"synth_symmetric", d.synth_symmetric}};
}

struct TrainOpts {
    double lr = 0.1;
    int epochs = 100;
    int batch = 4096;
    int hidden = 16;
};

void add_train_opts(CLI::App* cmd, TrainOpts& t, const std::string& prefix) {
    cmd->add_option("--" + prefix + "lr", t.lr, "learning rate");
    cmd->add_option("--" + prefix + "epochs", t.epochs, "training epochs");
    cmd->add_option("--" + prefix + "batch", t.batch, "batch size");
    cmd->add_option("--" + prefix + "hidden", t.hidden, "hidden width (mlp)");
}

recoc::TrainConfig to_train_config(const TrainOpts& t, std::uint64_t seed) {
    recoc::TrainConfig c;
    c.learning_rate = t.lr;
    c.epochs = t.epochs;
    c.batch_size = t.batch;
    c.hidden_width = t.hidden;
    c.seed = seed;
    return c;
}

json train_opts_json(const TrainOpts& t) {
    return json{{"lr", t.lr}, {"epochs", t.epochs}, {"batch", t.batch}, {"hidden", t.hidden}};
}

struct AttackOpts {
    std::string kind = "fgsm";
    double epsilon = 0.1;
    int steps = 1;
    double alpha = 0.0;
    double momentum = 0.0;
    std::optional<double> clip_lo, clip_hi;
};

void add_attack_opts(CLI::App* cmd, AttackOpts& a) {
    cmd->add_option("--attack", a.kind, "fgsm|pgd|migm")->default_str("fgsm");
    cmd->add_option("--epsilon", a.epsilon, "l-inf budget, normalized feature units");
    cmd->add_option("--steps", a.steps, "attack iterations (pgd/migm)");
    cmd->add_option("--alpha", a.alpha, "per-step size (pgd/migm); 0 = epsilon/steps");
    cmd->add_option("--momentum", a.momentum, "momentum decay (migm)");
    cmd->add_option("--clip-lo", a.clip_lo, "clip floor (default: dataset range)");
    cmd->add_option("--clip-hi", a.clip_hi, "clip ceiling (default: dataset range)");
}

recoc::AttackConfig to_attack_config(const AttackOpts& a, std::optional<int> target) {
    recoc::AttackConfig c;
    c.kind = recoc::attack_kind_from_string(a.kind);
    c.steps = a.steps;
    c.step_size = a.alpha > 0.0 ? a.alpha : a.epsilon / std::max(1, a.steps);
    c.momentum = a.momentum;
    c.targeted = target;
    return c;
}

recoc::PerturbationSpace to_space(const AttackOpts& a, const recoc::Dataset& data) {
    recoc::PerturbationSpace s;
    s.epsilon = a.epsilon;
    s.clip_lo = a.clip_lo.value_or(data.feature_lo);
    s.clip_hi = a.clip_hi.value_or(data.feature_hi);
    return s;
}

json attack_opts_json(const AttackOpts& a) {
    return json{{"kind", a.kind},
                {"epsilon", a.epsilon},
                {"steps", a.steps},
                {"alpha", a.alpha},
                {"momentum", a.momentum},
                {"clip_lo", a.clip_lo ? json(*a.clip_lo) : json()},
                {"clip_hi", a.clip_hi ? json(*a.clip_hi) : json()}};
}

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// ---- train -----------------------------------------------------------------

struct TrainCmd {
    DataOpts data;
    TrainOpts train;
    std::string kind = "logistic-linear";
    int code_length = 16;
    double r = 0.2;
    std::uint64_t seed = 0;
    std::string out = "run-train";
};

void run_train(const TrainCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::Dataset data = load_data(c.data, c.seed);
    const recoc::BinaryKind kind = recoc::binary_kind_from_string(c.kind);
    const recoc::TrainConfig tc = to_train_config(c.train, c.seed);
    const recoc::Ensemble ens =
        recoc::build_ensemble(data, data.n_classes, c.code_length, c.r, c.seed, tc, kind);

    std::size_t correct = 0, abstain = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const recoc::DecodeResult res = ens.classify(data.features.row(i));
        correct += (!res.abstained && res.label == data.labels[i]);
        abstain += res.abstained;
    }

    const json cfg{{"data", data_opts_json(c.data)},
                   {"train", train_opts_json(c.train)},
                   {"kind", c.kind},
                   {"code_length", c.code_length},
                   {"r", c.r}};
    write_manifest(dir, "train", cfg, c.seed);
    recoc::ser::save_json(recoc::ser::ensemble_to_json(ens), (dir / "ensemble.json").string());
    const json summary{
        {"n_classes", data.n_classes},
        {"n_points", data.size()},
        {"train_accuracy", static_cast<double>(correct) / static_cast<double>(data.size())},
        {"abstain_rate", static_cast<double>(abstain) / static_cast<double>(data.size())}};
    recoc::ser::save_json(summary, (dir / "summary.json").string());
    std::printf("%s\n", summary.dump(2).c_str());
}

// ---- classify --------------------------------------------------------------

struct ClassifyCmd {
    DataOpts data;
    std::string model;
    std::uint64_t seed = 0;
    std::string out = "run-classify";
};

void run_classify(const ClassifyCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::Ensemble ens =
        recoc::ser::ensemble_from_json(recoc::ser::load_json(c.model));
    const recoc::Dataset data = load_data(c.data, c.seed);

    std::string csv = "index,true_label,label,distance,abstained\n";
    char line[96];
    std::size_t correct = 0, abstain = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const recoc::DecodeResult res = ens.classify(data.features.row(i));
        std::snprintf(line, sizeof line, "%zu,%d,%d,%d,%d\n", i, data.labels[i], res.label,
                      res.distance, res.abstained ? 1 : 0);
        csv += line;
        correct += (!res.abstained && res.label == data.labels[i]);
        abstain += res.abstained;
    }

    const json cfg{{"data", data_opts_json(c.data)}, {"model", c.model}};
    write_manifest(dir, "classify", cfg, c.seed);
    write_text(dir / "predictions.csv", csv);
    const json summary{
        {"n_points", data.size()},
        {"accuracy", static_cast<double>(correct) / static_cast<double>(data.size())},
        {"abstain_rate", static_cast<double>(abstain) / static_cast<double>(data.size())}};
    recoc::ser::save_json(summary, (dir / "summary.json").string());
    std::printf("%s\n", summary.dump(2).c_str());
}

// ---- attack ----------------------------------------------------------------

struct AttackCmd {
    DataOpts data;
    AttackOpts attack;
    TrainOpts sub_train;
    std::string model;
    std::string arch = "mlp";
    std::size_t index = 0;
    std::optional<int> target;
    int aug_epochs = 1;
    double lambda = 0.1;
    std::size_t queries_per_epoch = 0;
    std::uint64_t seed = 0;
    std::string out = "run-attack";
};

void run_attack_cmd(const AttackCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::Ensemble ens =
        recoc::ser::ensemble_from_json(recoc::ser::load_json(c.model));
    const recoc::Dataset data = load_data(c.data, c.seed);
    if (c.index >= data.size()) throw recoc::ConfigError("--index out of range");

    const auto x_row = data.features.row(c.index);
    const std::vector<double> x(x_row.begin(), x_row.end());
    const int y = data.labels[c.index];
    const recoc::PerturbationSpace space = to_space(c.attack, data);
    const recoc::AttackConfig atk = to_attack_config(c.attack, c.target);

    recoc::SubstituteAttackConfig sub;
    sub.augmentation_epochs = c.aug_epochs;
    sub.lambda = c.lambda;
    sub.arch = recoc::substitute_arch_from_string(c.arch);
    sub.train = to_train_config(c.sub_train, c.seed);
    sub.queries_per_epoch = c.queries_per_epoch;

    const auto oracle = [&ens](std::span<const double> q) {
        return ens.classify_no_abstain(q);
    };
    const recoc::SubstituteAttackResult result =
        recoc::substitute_attack(oracle, data, sub, atk, x, y, space);

    const recoc::DecodeResult before = ens.classify(x);
    const recoc::DecodeResult after = ens.classify(result.adversarial);

    const json cfg{{"data", data_opts_json(c.data)},
                   {"model", c.model},
                   {"attack", attack_opts_json(c.attack)},
                   {"substitute_train", train_opts_json(c.sub_train)},
                   {"arch", c.arch},
                   {"index", c.index},
                   {"target", c.target ? json(*c.target) : json()},
                   {"aug_epochs", c.aug_epochs},
                   {"lambda", c.lambda},
                   {"queries_per_epoch", c.queries_per_epoch}};
    write_manifest(dir, "attack", cfg, c.seed);

    std::string csv = "y";
    for (std::size_t j = 0; j < x.size(); ++j) csv += ",x" + std::to_string(j);
    csv += "\n" + std::to_string(y);
    for (const double v : result.adversarial) csv += "," + recoc::format_double(v);
    csv += "\n";
    write_text(dir / "adversarial.csv", csv);
    write_text(dir / "query_log.jsonl", result.log.to_jsonl());

    const json report{{"y", y},
                      {"before", {{"label", before.label}, {"abstained", before.abstained}}},
                      {"after", {{"label", after.label}, {"abstained", after.abstained}}},
                      {"success", !after.abstained && after.label != y},
                      {"n_queries", result.log.records.size()}};
    recoc::ser::save_json(report, (dir / "report.json").string());
    std::printf("%s\n", report.dump(2).c_str());
}

// ---- challenge-grid ----------------------------------------------------------

struct GridCmd {
    DataOpts data;
    AttackOpts attack;
    TrainOpts binary_train;
    TrainOpts sub_train;
    std::string binary_kind = "logistic-linear";
    std::string arch = "linear-softmax";
    std::size_t train_count = 0;  // 0 = half
    int sample_size = 40;
    bool untargeted = false;
    std::uint64_t seed = 0;
    std::string out = "run-grid";
};

void run_grid(const GridCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::Dataset all = load_data(c.data, c.seed);
    const std::size_t cut = c.train_count > 0 ? c.train_count : all.size() / 2;
    const auto [train_data, eval_data] = recoc::split_at(all, cut);

    recoc::lab::GridConfig gc;
    gc.sample_size = c.sample_size;
    gc.binary_kind = recoc::binary_kind_from_string(c.binary_kind);
    gc.binary_train = to_train_config(c.binary_train, c.seed);
    gc.substitute_arch = recoc::substitute_arch_from_string(c.arch);
    gc.substitute_train = to_train_config(c.sub_train, recoc::rng::fold(c.seed, 0x5B));
    gc.attack = to_attack_config(c.attack, std::nullopt);
    gc.space = to_space(c.attack, all);
    gc.targeted = !c.untargeted;
    gc.seed = recoc::rng::fold(c.seed, 0x6D);

    const recoc::lab::GridReport rep = recoc::lab::pairwise_grid(train_data, eval_data, gc);

    const json cfg{{"data", data_opts_json(c.data)},
                   {"attack", attack_opts_json(c.attack)},
                   {"binary_train", train_opts_json(c.binary_train)},
                   {"substitute_train", train_opts_json(c.sub_train)},
                   {"binary_kind", c.binary_kind},
                   {"arch", c.arch},
                   {"train_count", cut},
                   {"sample_size", c.sample_size},
                   {"targeted", !c.untargeted}};
    write_manifest(dir, "challenge-grid", cfg, c.seed);
    write_text(dir / "grid.csv", rep.to_csv());
    write_text(dir / "grid.txt", rep.to_table());
    recoc::ser::save_json(rep.to_json(), (dir / "grid.json").string());
    std::printf("%s", rep.to_table().c_str());
}

// ---- bounds ------------------------------------------------------------------

struct BoundsCmd {
    int n_classes = 0;
    int code_length = 0;
    double r = 0.0;
    long queries = 1;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::string out = "run-bounds";
};

void run_bounds(const BoundsCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::bounds::BoundValue trim =
        recoc::bounds::trim_bound(c.n_classes, c.code_length, c.r, c.queries);
    const recoc::bounds::BoundValue trim_pf =
        recoc::bounds::trim_bound_proof_form(c.n_classes, c.code_length, c.r, c.queries);

    json out{{"n_classes", c.n_classes},
             {"code_length", c.code_length},
             {"r", c.r},
             {"queries", c.queries},
             {"h2_r", recoc::bounds::h2(c.r)},
             {"trim_bound", trim.raw},
             {"trim_bound_clamped", trim.value},
             {"trim_bound_vacuous", trim.vacuous},
             {"trim_bound_proof_form", trim_pf.raw},
             {"success_floor",
              recoc::bounds::success_floor(c.n_classes, c.code_length, c.r, c.queries)}};
    if (c.epsilon)
        out["delta_bound_at_epsilon"] = recoc::bounds::delta_bound(c.code_length, c.r, *c.epsilon);
    if (c.delta) {
        const recoc::bounds::BoundValue eb =
            recoc::bounds::epsilon_bound(c.code_length, c.r, *c.delta);
        out["epsilon_bound_at_delta"] = eb.value;
        out["epsilon_bound_vacuous"] = eb.vacuous;
    }

    const json cfg{{"n_classes", c.n_classes},
                   {"code_length", c.code_length},
                   {"r", c.r},
                   {"queries", c.queries},
                   {"epsilon", c.epsilon ? json(*c.epsilon) : json()},
                   {"delta", c.delta ? json(*c.delta) : json()}};
    write_manifest(dir, "bounds", cfg, 0);
    recoc::ser::save_json(out, (dir / "bounds.json").string());
    std::printf("%s\n", out.dump(2).c_str());
}

// ---- sweep-r -----------------------------------------------------------------

struct SweepCmd {
    DataOpts data;
    AttackOpts attack;
    TrainOpts train;
    TrainOpts sub_train;
    std::string kind = "logistic-linear";
    std::string arch = "linear-softmax";
    std::size_t train_count = 0;
    int code_length = 16;
    std::vector<double> r_grid;
    std::uint64_t seed = 0;
    std::string out = "run-sweep";
};

void run_sweep(const SweepCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::Dataset all = load_data(c.data, c.seed);
    const std::size_t cut = c.train_count > 0 ? c.train_count : all.size() / 2;
    const auto [train_data, eval_data] = recoc::split_at(all, cut);

    std::vector<double> grid = c.r_grid;
    if (grid.empty())
        for (int i = 0; i < 10; ++i) grid.push_back(0.05 * i);

    const recoc::BinaryKind kind = recoc::binary_kind_from_string(c.kind);
    const recoc::Ensemble ens =
        recoc::build_ensemble(train_data, train_data.n_classes, c.code_length, 0.2, c.seed,
                              to_train_config(c.train, c.seed), kind);
    const recoc::SubstituteModel sub =
        recoc::train_substitute(train_data, recoc::substitute_arch_from_string(c.arch),
                                to_train_config(c.sub_train, recoc::rng::fold(c.seed, 0x5B)));

    const recoc::PerturbationSpace space = to_space(c.attack, all);
    const recoc::AttackConfig atk = to_attack_config(c.attack, std::nullopt);
    recoc::Matrix adv(0, eval_data.dim());
    for (std::size_t i = 0; i < eval_data.size(); ++i)
        adv.append_row(
            recoc::run_attack(sub, eval_data.features.row(i), eval_data.labels[i], space, atk));

    const std::vector<recoc::lab::AccuracyPoint> points =
        recoc::lab::accuracy_sweep(ens, eval_data, adv, eval_data.labels, grid);

    std::string csv = "r,true_accuracy,adversarial_accuracy,abstain_rate\n";
    json jpoints = json::array();
    for (const auto& p : points) {
        csv += format_g9(p.r) + "," + format_g9(p.true_accuracy) + "," +
               format_g9(p.adversarial_accuracy) + "," + format_g9(p.abstain_rate) + "\n";
        jpoints.push_back(json{{"r", p.r},
                               {"true_accuracy", p.true_accuracy},
                               {"adversarial_accuracy", p.adversarial_accuracy},
                               {"abstain_rate", p.abstain_rate}});
    }

    const json cfg{{"data", data_opts_json(c.data)},
                   {"attack", attack_opts_json(c.attack)},
                   {"train", train_opts_json(c.train)},
                   {"substitute_train", train_opts_json(c.sub_train)},
                   {"kind", c.kind},
                   {"arch", c.arch},
                   {"train_count", cut},
                   {"code_length", c.code_length},
                   {"r_grid", grid}};
    write_manifest(dir, "sweep-r", cfg, c.seed);
    write_text(dir / "sweep.csv", csv);
    recoc::ser::save_json(jpoints, (dir / "sweep.json").string());
    std::printf("%s", csv.c_str());
}

// ---- verify-lemmas -------------------------------------------------------------

struct VerifyCmd {
    int n_classes = 0;
    int code_length = 0;
    double r = 0.0;
    bool exact = false;
    std::size_t trials = 20000;
    std::optional<double> q_flip;
    std::uint64_t seed = 0;
    std::string out = "run-verify";
};

void run_verify(const VerifyCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::lab::TrimLemmaReport trim =
        c.exact ? recoc::lab::verify_trim_lemma_exact(c.n_classes, c.code_length, c.r)
                : recoc::lab::verify_trim_lemma_mc(c.n_classes, c.code_length, c.r, c.trials,
                                                   recoc::rng::fold(c.seed, 1));
    json out{{"trim", trim.to_json()}};
    std::string table = trim.to_table();
    bool pass = trim.pass;
    if (c.q_flip) {
        recoc::lab::OracleClassifierParams params;
        params.q_flip = *c.q_flip;
        const recoc::lab::BinomialLemmaReport binom = recoc::lab::verify_binomial_lemma(
            params, c.n_classes, c.code_length, c.r, c.trials, recoc::rng::fold(c.seed, 2));
        out["binomial"] = binom.to_json();
        table += binom.to_table();
        pass = pass && binom.pass;
    }
    out["pass"] = pass;

    const json cfg{{"n_classes", c.n_classes},
                   {"code_length", c.code_length},
                   {"r", c.r},
                   {"exact", c.exact},
                   {"trials", c.trials},
                   {"q_flip", c.q_flip ? json(*c.q_flip) : json()}};
    write_manifest(dir, "verify-lemmas", cfg, c.seed);
    recoc::ser::save_json(out, (dir / "verify.json").string());
    write_text(dir / "verify.txt", table);
    std::printf("%s", table.c_str());
    if (!pass) {
        std::fprintf(stderr, "{\"error\":\"lemma verification failed\",\"type\":\"assertion\"}\n");
        g_exit = 3;
    }
}

// ---- simulate-reduction ----------------------------------------------------------

struct ReductionCmd {
    int n_classes = 0;
    int code_length = 0;
    double r = 0.0;
    double q_flip = 0.9;
    long queries = 1;
    std::size_t trials = 20000;
    std::uint64_t seed = 0;
    std::string out = "run-reduction";
};

void run_reduction(const ReductionCmd& c) {
    const fs::path dir = ensure_out_dir(c.out);
    const recoc::lab::ReductionReport rep = recoc::lab::simulate_reduction(
        c.n_classes, c.code_length, c.r, c.q_flip, c.queries, c.trials, c.seed);

    const json cfg{{"n_classes", c.n_classes},
                   {"code_length", c.code_length},
                   {"r", c.r},
                   {"q_flip", c.q_flip},
                   {"queries", c.queries},
                   {"trials", c.trials}};
    write_manifest(dir, "simulate-reduction", cfg, c.seed);
    recoc::ser::save_json(rep.to_json(), (dir / "reduction.json").string());
    write_text(dir / "reduction.txt", rep.to_table());
    std::printf("%s", rep.to_table().c_str());
    if (!rep.pass) {
        std::fprintf(stderr, "{\"error\":\"reduction check failed\",\"type\":\"assertion\"}\n");
        g_exit = 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"randomized error-correcting-code ensemble lab"};
    app.require_subcommand(1);
    app.set_config("--config", "", "config file (TOML, [subcommand] sections)");
    app.allow_config_extras(false);

    auto train_cmd = std::make_shared<TrainCmd>();
    {
        CLI::App* cmd = app.add_subcommand("train", "train an ensemble and save it");
        add_data_opts(cmd, train_cmd->data);
        add_train_opts(cmd, train_cmd->train, "");
        cmd->add_option("--kind", train_cmd->kind, "logistic-linear|mlp");
        cmd->add_option("--M,--code-length", train_cmd->code_length, "committee size");
        cmd->add_option("--r", train_cmd->r, "abstain radius fraction");
        cmd->add_option("--seed", train_cmd->seed, "master seed");
        cmd->add_option("--out", train_cmd->out, "output directory");
        cmd->callback([train_cmd] { run_train(*train_cmd); });
    }

    auto classify_cmd = std::make_shared<ClassifyCmd>();
    {
        CLI::App* cmd = app.add_subcommand("classify", "classify a dataset with a saved ensemble");
        add_data_opts(cmd, classify_cmd->data);
        cmd->add_option("--model", classify_cmd->model, "ensemble.json path")->required();
        cmd->add_option("--seed", classify_cmd->seed, "master seed (synthetic data)");
        cmd->add_option("--out", classify_cmd->out, "output directory");
        cmd->callback([classify_cmd] { run_classify(*classify_cmd); });
    }

    auto attack_cmd = std::make_shared<AttackCmd>();
    {
        CLI::App* cmd =
            app.add_subcommand("attack", "black-box substitute attack against a saved ensemble");
        add_data_opts(cmd, attack_cmd->data);
        add_attack_opts(cmd, attack_cmd->attack);
        add_train_opts(cmd, attack_cmd->sub_train, "sub-");
        cmd->add_option("--model", attack_cmd->model, "ensemble.json path")->required();
        cmd->add_option("--arch", attack_cmd->arch, "substitute architecture");
        cmd->add_option("--index", attack_cmd->index, "challenge row index");
        cmd->add_option("--target", attack_cmd->target, "targeted attack class");
        cmd->add_option("--aug-epochs", attack_cmd->aug_epochs, "query augmentation rounds");
        cmd->add_option("--lambda", attack_cmd->lambda, "augmentation step size");
        cmd->add_option("--queries-per-epoch", attack_cmd->queries_per_epoch,
                        "query budget per round (0 = all points)");
        cmd->add_option("--seed", attack_cmd->seed, "master seed");
        cmd->add_option("--out", attack_cmd->out, "output directory");
        cmd->callback([attack_cmd] { run_attack_cmd(*attack_cmd); });
    }

    auto grid_cmd = std::make_shared<GridCmd>();
    {
        CLI::App* cmd = app.add_subcommand(
            "challenge-grid", "pairwise flip-rate grid over random binary classifiers");
        add_data_opts(cmd, grid_cmd->data);
        add_attack_opts(cmd, grid_cmd->attack);
        add_train_opts(cmd, grid_cmd->binary_train, "");
        add_train_opts(cmd, grid_cmd->sub_train, "sub-");
        cmd->add_option("--binary-kind", grid_cmd->binary_kind, "logistic-linear|mlp");
        cmd->add_option("--arch", grid_cmd->arch, "substitute architecture");
        cmd->add_option("--train-count", grid_cmd->train_count,
                        "rows for the training split (0 = half)");
        cmd->add_option("--K,--sample-size", grid_cmd->sample_size,
                        "random classifiers per cell");
        cmd->add_flag("--untargeted", grid_cmd->untargeted,
                      "one untargeted perturbation per point");
        cmd->add_option("--seed", grid_cmd->seed, "master seed");
        cmd->add_option("--out", grid_cmd->out, "output directory");
        cmd->callback([grid_cmd] { run_grid(*grid_cmd); });
    }

    auto bounds_cmd = std::make_shared<BoundsCmd>();
    {
        CLI::App* cmd = app.add_subcommand("bounds", "closed-form certificate values");
        cmd->add_option("--N,--classes", bounds_cmd->n_classes, "class count")->required();
        cmd->add_option("--M,--code-length", bounds_cmd->code_length, "committee size")
            ->required();
        cmd->add_option("--r", bounds_cmd->r, "abstain radius fraction")->required();
        cmd->add_option("--Q,--queries", bounds_cmd->queries, "query count");
        cmd->add_option("--epsilon", bounds_cmd->epsilon, "success probability for delta_bound");
        cmd->add_option("--delta", bounds_cmd->delta, "flip rate for epsilon_bound");
        cmd->add_option("--out", bounds_cmd->out, "output directory");
        cmd->callback([bounds_cmd] { run_bounds(*bounds_cmd); });
    }

    auto sweep_cmd = std::make_shared<SweepCmd>();
    {
        CLI::App* cmd =
            app.add_subcommand("sweep-r", "accuracy / abstention trade-off across r");
        add_data_opts(cmd, sweep_cmd->data);
        add_attack_opts(cmd, sweep_cmd->attack);
        add_train_opts(cmd, sweep_cmd->train, "");
        add_train_opts(cmd, sweep_cmd->sub_train, "sub-");
        cmd->add_option("--kind", sweep_cmd->kind, "logistic-linear|mlp");
        cmd->add_option("--arch", sweep_cmd->arch, "substitute architecture");
        cmd->add_option("--train-count", sweep_cmd->train_count,
                        "rows for the training split (0 = half)");
        cmd->add_option("--M,--code-length", sweep_cmd->code_length, "committee size");
        cmd->add_option("--r-grid", sweep_cmd->r_grid, "decode radii to evaluate")
            ->delimiter(',');
        cmd->add_option("--seed", sweep_cmd->seed, "master seed");
        cmd->add_option("--out", sweep_cmd->out, "output directory");
        cmd->callback([sweep_cmd] { run_sweep(*sweep_cmd); });
    }

    auto verify_cmd = std::make_shared<VerifyCmd>();
    {
        CLI::App* cmd =
            app.add_subcommand("verify-lemmas", "check the certificates against oracles");
        cmd->add_option("--N,--classes", verify_cmd->n_classes, "class count")->required();
        cmd->add_option("--M,--code-length", verify_cmd->code_length, "committee size")
            ->required();
        cmd->add_option("--r", verify_cmd->r, "abstain radius fraction")->required();
        cmd->add_flag("--exact", verify_cmd->exact, "exhaustive enumeration (tiny instances)");
        cmd->add_option("--trials", verify_cmd->trials, "Monte Carlo trials");
        cmd->add_option("--q-flip", verify_cmd->q_flip,
                        "also run the stub-committee check at this flip rate");
        cmd->add_option("--seed", verify_cmd->seed, "master seed");
        cmd->add_option("--out", verify_cmd->out, "output directory");
        cmd->callback([verify_cmd] { run_verify(*verify_cmd); });
    }

    auto reduction_cmd = std::make_shared<ReductionCmd>();
    {
        CLI::App* cmd = app.add_subcommand(
            "simulate-reduction", "full reduction pipeline against the stub committee");
        cmd->add_option("--N,--classes", reduction_cmd->n_classes, "class count")->required();
        cmd->add_option("--M,--code-length", reduction_cmd->code_length, "committee size")
            ->required();
        cmd->add_option("--r", reduction_cmd->r, "abstain radius fraction")->required();
        cmd->add_option("--q-flip", reduction_cmd->q_flip, "stub per-column flip probability");
        cmd->add_option("--Q,--queries", reduction_cmd->queries, "query count for bounds");
        cmd->add_option("--trials", reduction_cmd->trials, "Monte Carlo trials");
        cmd->add_option("--seed", reduction_cmd->seed, "master seed");
        cmd->add_option("--out", reduction_cmd->out, "output directory");
        cmd->callback([reduction_cmd] { run_reduction(*reduction_cmd); });
    }

    try {
        app.parse(argc, argv);
        return g_exit;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const recoc::ConfigError& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"config\"}\n", json(e.what()).dump().c_str());
        return 2;
    } catch (const recoc::FormatError& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"config\"}\n", json(e.what()).dump().c_str());
        return 2;
    } catch (const recoc::IoError& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"io\"}\n", json(e.what()).dump().c_str());
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"io\"}\n", json(e.what()).dump().c_str());
        return 4;
    } catch (const recoc::Error& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"assertion\"}\n",
                     json(e.what()).dump().c_str());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"error\":%s,\"type\":\"internal\"}\n",
                     json(e.what()).dump().c_str());
        return 3;
    }
}
