#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "recoc/bounds.hpp"
#include "recoc/errors.hpp"

using namespace recoc;
using Catch::Matchers::WithinRel;

namespace {

// Reference CDF via log-gamma, independent of any library recurrence.
double cdf_leq_ref(int n, double p, int k) {
    double s = 0.0;
    for (int i = 0; i <= k; ++i) {
        const double lg = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                          std::lgamma(n - i + 1.0) + i * std::log(p) +
                          (n - i) * std::log1p(-p);
        s += std::exp(lg);
    }
    return s;
}

std::uint64_t choose(int n, int k) {
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / i;
    return c;
}

}  // namespace

TEST_CASE("binary entropy hits the frozen values") {
    CHECK_THAT(bounds::h2(0.25), WithinRel(0.81127812445913286, 1e-12));
    CHECK_THAT(bounds::h2(0.1), WithinRel(0.46899559358928122, 1e-12));
    CHECK(bounds::h2(0.5) == 1.0);
    CHECK(bounds::h2(0.0) == 0.0);
    CHECK(bounds::h2(1.0) == 0.0);
    CHECK(bounds::h2(0.3) == bounds::h2(0.7));
    CHECK_THROWS_AS(bounds::h2(-0.1), DomainError);
    CHECK_THROWS_AS(bounds::h2(1.1), DomainError);
}

TEST_CASE("trim certificate matches the hand-derived values") {
    const bounds::BoundValue b = bounds::trim_bound(10, 100, 0.1, 1);
    CHECK_THAT(b.raw, WithinRel(4.9575362207503782e-16, 1e-10));
    CHECK_FALSE(b.vacuous);
    CHECK(b.value == b.raw);

    const bounds::BoundValue pf = bounds::trim_bound_proof_form(10, 100, 0.1, 1);
    CHECK_THAT(pf.raw, WithinRel(4.9575362207503782e-14, 1e-10));
    CHECK_THAT(pf.raw / b.raw, WithinRel(100.0, 1e-9));

    CHECK_THAT(bounds::trim_bound(10, 50, 0.1, 1).raw,
               WithinRel(6.8895935527353534e-8, 1e-10));
    CHECK_THAT(bounds::trim_bound(10, 20, 0.25, 1).raw,
               WithinRel(0.45164455540555727, 1e-10));

    SECTION("query count scales linearly") {
        const double q1 = bounds::trim_bound(10, 100, 0.1, 1).raw;
        const double q7 = bounds::trim_bound(10, 100, 0.1, 7).raw;
        CHECK_THAT(q7, WithinRel(7.0 * q1, 1e-12));
        CHECK(bounds::trim_bound(10, 100, 0.1, 0).raw == 0.0);
    }

    SECTION("vacuous region is flagged, not hidden") {
        const bounds::BoundValue v = bounds::trim_bound(2, 3, 0.4, 1);
        CHECK_THAT(v.raw, WithinRel(2.124471100560164, 1e-10));
        CHECK(v.vacuous);
        CHECK(v.value == 1.0);
    }

    SECTION("domain checks") {
        CHECK_THROWS_AS(bounds::trim_bound(1, 10, 0.1, 1), DomainError);
        CHECK_THROWS_AS(bounds::trim_bound(10, 0, 0.1, 1), DomainError);
        CHECK_THROWS_AS(bounds::trim_bound(10, 10, 0.0, 1), DomainError);
        CHECK_THROWS_AS(bounds::trim_bound(10, 10, 1.0, 1), DomainError);
        CHECK_THROWS_AS(bounds::trim_bound(10, 10, 0.1, -1), DomainError);
    }
}

TEST_CASE("flip-rate lower bound") {
    CHECK_THAT(bounds::delta_bound(200, 0.05, 0.1), WithinRel(0.25174271293851464, 1e-10));
    SECTION("epsilon = 1 collapses to 2r exactly") {
        CHECK(bounds::delta_bound(200, 0.05, 1.0) == 2.0 * 0.05);
        CHECK(bounds::delta_bound(64, 0.2, 1.0) == 2.0 * 0.2);
    }
    SECTION("base-2 variant is looser for epsilon < 1") {
        CHECK(bounds::delta_bound(200, 0.05, 0.1, true) > bounds::delta_bound(200, 0.05, 0.1));
        const double expect = 2.0 * (0.05 + std::sqrt(std::log2(10.0) / 400.0));
        CHECK_THAT(bounds::delta_bound(200, 0.05, 0.1, true), WithinRel(expect, 1e-12));
    }
    SECTION("monotone decreasing in epsilon") {
        CHECK(bounds::delta_bound(100, 0.1, 0.01) > bounds::delta_bound(100, 0.1, 0.5));
    }
    CHECK_THROWS_AS(bounds::delta_bound(200, 0.05, 0.0), DomainError);
    CHECK_THROWS_AS(bounds::delta_bound(200, 0.05, 1.5), DomainError);
    CHECK_THROWS_AS(bounds::delta_bound(0, 0.05, 0.5), DomainError);
    CHECK_THROWS_AS(bounds::delta_bound(200, 0.0, 0.5), DomainError);
}

TEST_CASE("success-probability cap") {
    const bounds::BoundValue b = bounds::epsilon_bound(200, 0.05, 0.3);
    CHECK_THAT(b.raw, WithinRel(0.01831563888873418, 1e-10));  // exp(-4)
    CHECK_FALSE(b.vacuous);

    SECTION("delta = 2r sits exactly on the vacuous edge") {
        const bounds::BoundValue edge = bounds::epsilon_bound(100, 0.2, 0.4);
        CHECK(edge.value == 1.0);
        CHECK(edge.vacuous);
    }
    SECTION("delta below 2r certifies nothing") {
        CHECK(bounds::epsilon_bound(100, 0.2, 0.1).vacuous);
    }
    CHECK_THROWS_AS(bounds::epsilon_bound(200, 0.05, -0.1), DomainError);
    CHECK_THROWS_AS(bounds::epsilon_bound(200, 0.05, 1.1), DomainError);
}

TEST_CASE("entropy upper bound dominates every binomial coefficient") {
    CHECK_THAT(bounds::binom_entropy_bound(10, 0.5), WithinRel(258.36877025486439, 1e-10));
    CHECK(bounds::binom_entropy_bound(10, 0.5) >= 252.0);

    for (int n = 1; n <= 30; ++n) {
        for (int k = 1; k < n; ++k) {
            const double lambda = static_cast<double>(k) / n;
            const double bound = bounds::binom_entropy_bound(n, lambda);
            REQUIRE(bound >= static_cast<double>(choose(n, k)));
        }
    }

    CHECK_THROWS_AS(bounds::binom_entropy_bound(10, 0.0), DomainError);
    CHECK_THROWS_AS(bounds::binom_entropy_bound(10, 1.0), DomainError);
    CHECK_THROWS_AS(bounds::binom_entropy_bound(10, 0.12345), DomainError);
    CHECK_THROWS_AS(bounds::binom_entropy_bound(0, 0.5), DomainError);
}

TEST_CASE("tail bound dominates the exact lower tail") {
    CHECK_THAT(bounds::hoeffding_tail(100, 0.5, 0.1), WithinRel(0.13533528323661269, 1e-10));
    const double exact = cdf_leq_ref(100, 0.5, 40);
    CHECK_THAT(exact, WithinRel(0.028443966820490395, 1e-9));
    CHECK(exact <= bounds::hoeffding_tail(100, 0.5, 0.1));

    SECTION("spot grid") {
        for (int n : {10, 50, 120}) {
            for (double p : {0.2, 0.5, 0.8}) {
                for (double alpha : {0.05, 0.1, 0.15}) {
                    if (alpha >= p) continue;
                    const int k = static_cast<int>(std::floor((p - alpha) * n));
                    REQUIRE(cdf_leq_ref(n, p, k) <= bounds::hoeffding_tail(n, p, alpha) + 1e-15);
                }
            }
        }
    }

    CHECK_THROWS_AS(bounds::hoeffding_tail(0, 0.5, 0.1), DomainError);
    CHECK_THROWS_AS(bounds::hoeffding_tail(100, 0.0, 0.1), DomainError);
    CHECK_THROWS_AS(bounds::hoeffding_tail(100, 1.0, 0.1), DomainError);
    CHECK_THROWS_AS(bounds::hoeffding_tail(100, 0.5, 0.0), DomainError);
}

TEST_CASE("union step clamps at one") {
    CHECK_THAT(bounds::union_success_bound(10, 0.005908966064453125).raw,
               WithinRel(0.053180694580078125, 1e-12));
    CHECK(bounds::union_success_bound(5, 0.5).value == 1.0);
    CHECK(bounds::union_success_bound(5, 0.5).vacuous);
    CHECK_THROWS_AS(bounds::union_success_bound(1, 0.1), DomainError);
    CHECK_THROWS_AS(bounds::union_success_bound(5, 1.5), DomainError);
}

TEST_CASE("success floor is the complement of the trim certificate") {
    const double floor = bounds::success_floor(10, 100, 0.1, 1);
    CHECK_THAT(floor, WithinRel(1.0 - 4.9575362207503782e-16, 1e-12));
    CHECK(bounds::success_floor(2, 3, 0.4, 1) == 0.0);  // vacuous region
}
