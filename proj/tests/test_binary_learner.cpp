#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "recoc/binary_learner.hpp"
#include "recoc/data.hpp"
#include "recoc/rng.hpp"

using namespace recoc;

namespace {

// Two linearly separable blobs with +-1 labels.
std::pair<Matrix, std::vector<int>> binary_blobs(std::uint64_t seed, int per_side = 60) {
    rng::Stream s(seed);
    Matrix x(0, 2);
    std::vector<int> z;
    for (int i = 0; i < per_side; ++i) {
        x.append_row(std::vector<double>{3.0 + s.gaussian(), 3.0 + s.gaussian()});
        z.push_back(+1);
        x.append_row(std::vector<double>{-3.0 + s.gaussian(), -3.0 + s.gaussian()});
        z.push_back(-1);
    }
    return {std::move(x), std::move(z)};
}

TrainConfig quick_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.epochs = 60;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("training configuration is validated") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.hidden_width = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero score predicts +1") {
    BinaryClassifier f;
    f.kind = BinaryKind::LogisticLinear;
    f.input_dim = 2;
    f.w = {0.0, 0.0};
    f.b = 0.0;
    CHECK(f.predict(std::vector<double>{1.0, -1.0}) == +1);
}

TEST_CASE("logistic-linear training separates blobs deterministically") {
    const auto [x, z] = binary_blobs(1);
    const TrainConfig cfg = quick_config(10);
    const BinaryClassifier f = train_binary(x, z, cfg, BinaryKind::LogisticLinear);

    int correct = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) correct += f.predict(x.row(i)) == z[i];
    CHECK(correct >= static_cast<int>(0.95 * x.rows()));

    const BinaryClassifier g = train_binary(x, z, cfg, BinaryKind::LogisticLinear);
    CHECK(f == g);
}

TEST_CASE("flipping every label exactly negates the logistic weights") {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto [x, z] = binary_blobs(s, 20);
        std::vector<int> neg(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) neg[i] = -z[i];
        const TrainConfig cfg = quick_config(rng::fold(s, 7));
        const BinaryClassifier a = train_binary(x, z, cfg, BinaryKind::LogisticLinear);
        const BinaryClassifier b = train_binary(x, neg, cfg, BinaryKind::LogisticLinear);
        REQUIRE(a.w.size() == b.w.size());
        for (std::size_t j = 0; j < a.w.size(); ++j) REQUIRE(b.w[j] == -a.w[j]);
        REQUIRE(b.b == -a.b);
    }
}

TEST_CASE("flipping every label exactly negates the mlp score") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto [x, z] = binary_blobs(s, 15);
        std::vector<int> neg(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) neg[i] = -z[i];
        TrainConfig cfg = quick_config(rng::fold(s, 9));
        cfg.epochs = 25;
        cfg.hidden_width = 8;
        const BinaryClassifier a = train_binary(x, z, cfg, BinaryKind::Mlp);
        const BinaryClassifier b = train_binary(x, neg, cfg, BinaryKind::Mlp);
        rng::Stream probes(rng::fold(s, 11));
        for (int k = 0; k < 50; ++k) {
            const std::vector<double> p{6.0 * probes.unit() - 3.0, 6.0 * probes.unit() - 3.0};
            REQUIRE(b.score(p) == -a.score(p));
        }
    }
}

TEST_CASE("mlp training fits the blobs") {
    const auto [x, z] = binary_blobs(4);
    TrainConfig cfg = quick_config(3);
    cfg.hidden_width = 8;
    const BinaryClassifier f = train_binary(x, z, cfg, BinaryKind::Mlp);
    int correct = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) correct += f.predict(x.row(i)) == z[i];
    CHECK(correct >= static_cast<int>(0.9 * x.rows()));
    CHECK(f == train_binary(x, z, cfg, BinaryKind::Mlp));
}

TEST_CASE("training rejects broken inputs") {
    const auto [x, z] = binary_blobs(2, 5);
    const TrainConfig cfg = quick_config(0);

    SECTION("non-finite features") {
        Matrix bad = x;
        bad(0, 0) = std::nan("");
        CHECK_THROWS_AS(train_binary(bad, z, cfg, BinaryKind::LogisticLinear), TrainingError);
    }
    SECTION("invalid labels") {
        std::vector<int> bad = z;
        bad[3] = 0;
        CHECK_THROWS_AS(train_binary(x, bad, cfg, BinaryKind::LogisticLinear), TrainingError);
    }
    SECTION("length mismatch") {
        std::vector<int> bad = z;
        bad.pop_back();
        CHECK_THROWS_AS(train_binary(x, bad, cfg, BinaryKind::LogisticLinear), TrainingError);
    }
    SECTION("empty data") {
        CHECK_THROWS_AS(train_binary(Matrix(0, 2), {}, cfg, BinaryKind::LogisticLinear),
                        TrainingError);
    }
    SECTION("single-sided labels are legal: a code column may give every class one sign") {
        const std::vector<int> ones(z.size(), 1);
        const BinaryClassifier f = train_binary(x, ones, cfg, BinaryKind::LogisticLinear);
        for (std::size_t i = 0; i < x.rows(); ++i) CHECK(f.predict(x.row(i)) == +1);
    }
}

TEST_CASE("substitute learns a 3-class problem") {
    const Dataset d = synth_gaussian(3, 2, 80, 8.0, 21);
    TrainConfig cfg = quick_config(5);
    cfg.epochs = 120;

    for (const SubstituteArch arch : {SubstituteArch::LinearSoftmax, SubstituteArch::Mlp}) {
        const SubstituteModel m = train_substitute(d, arch, cfg);
        int correct = 0;
        for (std::size_t i = 0; i < d.size(); ++i)
            correct += m.predict(d.features.row(i)) == d.labels[i];
        INFO("arch " << to_string(arch));
        CHECK(correct >= static_cast<int>(0.9 * d.size()));
        CHECK(m == train_substitute(d, arch, cfg));
    }
}

TEST_CASE("argmax ties resolve to the lowest class") {
    SubstituteModel m;
    m.arch = SubstituteArch::LinearSoftmax;
    m.n_classes = 3;
    m.input_dim = 2;
    m.w = Matrix(3, 2);
    m.b = {0.0, 0.0, 0.0};
    CHECK(m.predict(std::vector<double>{0.3, -0.7}) == 0);
}

TEST_CASE("input gradients match central finite differences") {
    const Dataset d = synth_gaussian(3, 4, 40, 6.0, 33);
    TrainConfig cfg = quick_config(6);
    cfg.epochs = 40;

    for (const SubstituteArch arch : {SubstituteArch::LinearSoftmax, SubstituteArch::Mlp}) {
        const SubstituteModel m = train_substitute(d, arch, cfg);
        rng::Stream s(77);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x(4);
            for (auto& v : x) v = d.feature_lo + (d.feature_hi - d.feature_lo) * s.unit();
            const int y = static_cast<int>(s.unit() * 3);
            const bool targeted = s.bernoulli(0.5);
            const int t = (y + 1) % 3;

            const auto g = input_gradient(m, x, y, targeted ? std::optional<int>(t) : std::nullopt);
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
                std::vector<double> xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                const int label = targeted ? t : y;
                double fd = (m.loss(xp, label) - m.loss(xm, label)) / (2.0 * h);
                if (targeted) fd = -fd;
                const double scale = std::max({1e-6, std::abs(fd), std::abs(g[j])});
                REQUIRE(std::abs(g[j] - fd) / scale < 1e-4);
            }
        }
    }
}

TEST_CASE("logit gradients match central finite differences") {
    const Dataset d = synth_gaussian(3, 3, 40, 6.0, 34);
    TrainConfig cfg = quick_config(8);
    cfg.epochs = 40;
    const SubstituteModel m = train_substitute(d, SubstituteArch::Mlp, cfg);

    rng::Stream s(13);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> x(3);
        for (auto& v : x) v = d.feature_lo + (d.feature_hi - d.feature_lo) * s.unit();
        const int c = static_cast<int>(s.unit() * 3);
        const auto g = logit_gradient(m, x, c);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
            std::vector<double> xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (m.logits(xp)[c] - m.logits(xm)[c]) / (2.0 * h);
            const double scale = std::max({1e-6, std::abs(fd), std::abs(g[j])});
            REQUIRE(std::abs(g[j] - fd) / scale < 1e-4);
        }
    }
}

TEST_CASE("gradient helpers validate their class indices") {
    const Dataset d = synth_gaussian(3, 2, 30, 6.0, 35);
    const SubstituteModel m = train_substitute(d, SubstituteArch::LinearSoftmax, quick_config(9));
    const std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_AS(input_gradient(m, x, 3), DomainError);
    CHECK_THROWS_AS(input_gradient(m, x, 0, 5), DomainError);
    CHECK_THROWS_AS(logit_gradient(m, x, -1), DomainError);
    CHECK_THROWS_AS(m.loss(x, 7), DomainError);
}
