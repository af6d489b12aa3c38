#include <cmath>
#include <vector>

#include "doctest.h"
#include "qnest/problems.hpp"
#include "qnest/qnest.hpp"
#include "qnest/stats.hpp"

using namespace qnest;

namespace {

// phi is a deterministic function of x (zero conditional variance) with a
// nonconstant conditional mean.
NestedProblem zero_cond_var_problem() {
    NestedProblem p;
    p.name = "zero-cond-var";
    p.dim = 1;
    p.gen_x = [](RngStream& rng) { return rng.uniform(); };
    p.gen_y = [](double, RngStream& rng) { return rng.uniform(); };
    p.phi = [](double x, double) { return x; };
    p.g = [](double x, double z) { return std::max(z, 0.0) + 0.5 * x; };
    p.lipschitz_k = 1.0;
    p.second_moment_v = 1.0;
    p.clip_lo = -1.0;
    p.clip_hi = 1.0;
    p.conditional_mean = [](double x) { return x; };
    p.ground_truth = GroundTruth{1.0, 0.0, "closed-form"};  // E[X + X/2], X~U[0,1]
    return p;
}

// V = 0: the inner integrand vanishes identically.
NestedProblem zero_v_problem() {
    NestedProblem p = zero_cond_var_problem();
    p.name = "zero-v";
    p.phi = [](double, double) { return 0.0; };
    p.second_moment_v = 0.0;
    p.clip_lo = 0.0;
    p.clip_hi = 0.0;
    p.conditional_mean = [](double) { return 0.0; };
    p.ground_truth = GroundTruth{0.25, 0.0, "closed-form"};  // E[0.5 X]
    return p;
}

// A kinked toy with a tiny variance bound, cheap enough for full-surrogate
// end-to-end runs.
NestedProblem small_toy() {
    NestedProblem p;
    p.name = "small-toy";
    p.dim = 1;
    p.gen_x = [](RngStream& rng) { return rng.uniform(); };
    p.gen_y = [](double x, RngStream& rng) { return x + rng.uniform(-0.25, 0.25); };
    p.phi = [](double x, double y) { return y - x; };
    p.g = [](double, double z) { return std::max(z, 0.0); };
    p.lipschitz_k = 1.0;
    p.second_moment_v = 0.021;  // E[(Y-x)^2 | x] = 0.0625/3
    p.outer_variance_s = 0.0;
    p.clip_lo = -std::sqrt(0.021);
    p.clip_hi = std::sqrt(0.021);
    p.conditional_mean = [](double) { return 0.0; };
    p.ground_truth = GroundTruth{0.0, 0.0, "closed-form"};
    return p;
}

}  // namespace

TEST_CASE("clipping never increases the distance to an in-range target") {
    RngStream rng(21);
    for (int i = 0; i < 100000; ++i) {
        double lo = -rng.uniform(0.0, 3.0);
        double hi = rng.uniform(0.0, 3.0);
        double t = rng.uniform(lo, hi);
        double r = rng.uniform(-10.0, 10.0);
        REQUIRE(std::abs(clip_to(r, lo, hi) - t) <= std::abs(r - t));
    }
}

TEST_CASE("inner call charge constants") {
    NestedProblem p = problem_by_name("gauss-toy");  // K = 1, V = 1
    // level 0: accuracy 1/2, failure 1/8 -> ceil(2)*ceil(ln 8 + 1) = 8 queries,
    // each costing one Gen_Y plus one phi, plus the final g evaluation.
    CHECK(b_level_charge(p, 0) == 8 * 2 + 1);
    CHECK(a_level_charge(p, 0) == 1 + 17);
    CHECK(a_level_charge(p, 2) == 1 + b_level_charge(p, 2) + b_level_charge(p, 1));

    NestedProblem pv0 = zero_v_problem();
    CHECK(b_level_charge(pv0, 5) == 1);
}

TEST_CASE("zero-variance inner sampler is estimated exactly") {
    NestedProblem p = make_identity_problem({IdentityKind::point_mass, 0.25});
    RngStream rng(22);
    for (int l : {0, 2, 5}) {
        auto [value, led] = b_level(p, 0.0, l, OracleMode::Surrogate(), rng);
        CHECK(value == 0.25);
    }
}

TEST_CASE("level differences vanish exactly when the conditional law is deterministic") {
    NestedProblem p = zero_cond_var_problem();
    RngStream rng(23);
    for (int l = 1; l <= 4; ++l)
        for (int rep = 0; rep < 30; ++rep) {
            LevelOutput out = a_level(p, l, OracleMode::Surrogate(), rng);
            REQUIRE(out.delta == 0.0);
        }
}

TEST_CASE("V = 0 short-circuits to g(x, 0) with no charged inner queries") {
    NestedProblem p = zero_v_problem();
    RngStream rng(24);
    LevelOutput l0 = a_level(p, 0, OracleMode::Surrogate(), rng);
    CHECK(l0.ledger.quantum_charged == 0);
    CHECK(l0.ledger.gen_y_calls == 0);
    for (int l = 1; l <= 4; ++l) {
        LevelOutput out = a_level(p, l, OracleMode::Surrogate(), rng);
        REQUIRE(out.delta == 0.0);
    }
}

TEST_CASE("level 0 equals the base estimator on a fresh draw") {
    NestedProblem p = problem_by_name("gauss-toy");
    RngStream r1(25), r2(25);
    LevelOutput a = a_level(p, 0, OracleMode::Surrogate(), r1);
    CostLedger led;
    double x = p.sample_x(r2, led);
    auto [v, bl] = b_level(p, x, 0, OracleMode::Surrogate(), r2);
    CHECK(a.delta == v);
}

TEST_CASE("per-x error of the clipped estimator meets the level bounds") {
    NestedProblem p = problem_by_name("gauss-toy");
    RngStream xr(26);
    CostLedger led;
    for (int xi = 0; xi < 2; ++xi) {
        double x = p.sample_x(xr, led);
        double target = p.g(x, p.conditional_mean(x));
        for (int l = 0; l <= 2; ++l) {
            RunningStats err2, err;
            RngStream rr = xr.child(xi, l);
            for (int i = 0; i < 1000; ++i) {
                auto [v, bl] = b_level(p, x, l, OracleMode::Surrogate(), rr);
                err2.add((v - target) * (v - target));
                err.add(v - target);
            }
            CHECK(err2.mean() <= std::exp2(-2 * l) * 1.3);
            CHECK(std::abs(err.mean()) <= std::exp2(-l) * 1.3);
        }
    }
}

TEST_CASE("coupled level differences have fast-decaying variance (surrogate)") {
    NestedProblem p = problem_by_name("gauss-toy");
    for (int l = 1; l <= 2; ++l) {
        RngStream rng(300 + l);
        RunningStats s;
        for (int i = 0; i < 1000; ++i) {
            LevelOutput out = a_level(p, l, OracleMode::Surrogate(), rng);
            s.add(out.delta);
        }
        CHECK(s.variance() <= 10.0 * std::exp2(-2 * l) * 1.3);
    }
}

TEST_CASE("quantum level sums telescope to the top-level estimator") {
    NestedProblem p = problem_by_name("gauss-toy");
    OracleMode mode = OracleMode::Idealized();
    const int l = 2, reps = 20000;
    RngStream r1(27), r2(28);
    RunningStats summed, direct;
    for (int i = 0; i < reps; ++i) {
        double acc = 0.0;
        for (int k = 0; k <= l; ++k) acc += a_level(p, k, mode, r1).delta;
        summed.add(acc);
        CostLedger led;
        double x = p.sample_x(r2, led);
        direct.add(b_level(p, x, l, mode, r2).first);
    }
    double gap = std::abs(summed.mean() - direct.mean());
    double se = std::sqrt(summed.std_error() * summed.std_error() +
                          direct.std_error() * direct.std_error());
    CHECK(gap <= 4.0 * se);
}

TEST_CASE("estimator schedule constants") {
    NestedProblem p = problem_by_name("gauss-toy");
    std::vector<LevelDiagnostic> diag;
    RngStream rng(29);
    EstimateResult res = q_nest_expect_08(p, 0.25, OracleMode::Idealized(), rng, &diag);
    REQUIRE(diag.size() == 4);  // L = ceil(log2(2/0.25)) = 3
    CHECK(diag[0].eps_level == 0.25 / 8.0);
    CHECK(diag[0].delta_level == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(diag[3].delta_level == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(std::abs(res.value - p.ground_truth->value) <= 0.25);
    CHECK_THROWS_AS(q_nest_expect_08(p, 1.5, OracleMode::Idealized(), rng),
                    std::invalid_argument);
}

TEST_CASE("constant integrand is recovered exactly across all levels") {
    NestedProblem p = make_identity_problem({IdentityKind::point_mass, 0.25});
    RngStream rng(30);
    EstimateResult res = q_nest_expect_08(p, 0.5, OracleMode::Surrogate(), rng);
    CHECK(res.value == 0.25);  // every group mean is exact; levels > 0 cancel
}

TEST_CASE("median repetition count") {
    CHECK(median_repetitions(0.05) == 17);
    CHECK(median_repetitions(0.49) == 5);
    CHECK(median_repetitions(0.01) == 27);  // ceil(4.605/0.18) = 26, bumped odd
    CHECK_THROWS_AS(median_repetitions(0.6), std::invalid_argument);
    CHECK_THROWS_AS(median_repetitions(0.0), std::invalid_argument);
}

TEST_CASE("median wrapper multiplies the charge by the repetition count") {
    NestedProblem p = problem_by_name("gauss-toy");
    RngStream r1(31), r2(31);
    // the charge is argument-determined, so any stream reproduces it
    EstimateResult single = q_nest_expect_08(p, 0.125, OracleMode::Idealized(), r1);
    EstimateResult wrapped = q_nest_expect(p, 0.125, 0.05, OracleMode::Idealized(), r2);
    CHECK(wrapped.ledger.quantum_charged == 17 * single.ledger.quantum_charged);
    CHECK(std::abs(wrapped.value - p.ground_truth->value) <= 0.125);
}

TEST_CASE("qa-mlmc on a linear problem collapses to level zero") {
    NestedProblem p = make_identity_problem({IdentityKind::point_mass, 0.25});
    RngStream rng(32);
    EstimateResult res = qa_mlmc_estimate(p, 0.25, OracleMode::Surrogate(), rng);
    CHECK(res.value == 0.25);
}

TEST_CASE("qa-mlmc surrogate end-to-end at coarse accuracy") {
    NestedProblem p = problem_by_name("gauss-toy");
    for (int seed : {1, 2}) {
        RngStream rng(seed);
        EstimateResult res = qa_mlmc_estimate(p, 0.25, OracleMode::Surrogate(), rng);
        CHECK(std::abs(res.value - p.ground_truth->value) <= 0.25);
        CHECK(res.ledger.classical_charged > 0);
    }
}

TEST_CASE("full stack surrogate run on a low-variance toy") {
    NestedProblem p = small_toy();
    RngStream rng(33);
    EstimateResult res = q_nest_expect_08(p, 0.5, OracleMode::Surrogate(), rng);
    CHECK(std::abs(res.value - p.ground_truth->value) <= 0.5);
    CHECK(res.ledger.gen_y_calls > 0);
    CHECK(res.ledger.quantum_charged > 0);
}

TEST_CASE("quantum estimators reject out-of-range parameters") {
    NestedProblem p = problem_by_name("gauss-toy");
    RngStream rng(34);
    CHECK_THROWS_AS(q_nest_expect(p, 0.1, 0.5, OracleMode::Idealized(), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(qa_mlmc_estimate(p, 0.0, OracleMode::Idealized(), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(a_level(p, -1, OracleMode::Surrogate(), rng), std::invalid_argument);
}

TEST_CASE("evppi runs through the vector path") {
    NestedProblem p = problem_by_name("evppi");
    RngStream rng(35);
    EstimateResult res = q_nest_expect_08(p, 0.2, OracleMode::Idealized(), rng);
    CHECK(std::abs(res.value - p.ground_truth->value) <= 0.2);

    // one real surrogate call through the per-coordinate estimators
    CostLedger led;
    double x = p.sample_x(rng, led);
    std::vector<double> gamma(p.dim);
    p.conditional_mean_vec(x, gamma);
    auto [v, bled] = b_level(p, x, 1, OracleMode::Surrogate(), rng);
    CHECK(std::abs(v - p.g_vec(x, gamma)) <= 0.5 * 1.3);
    CHECK(bled.gen_y_calls > 0);

    EstimateResult cls = classical_mlmc_estimate(p, 0.1, rng);
    CHECK(std::abs(cls.value - p.ground_truth->value) <= 0.3);
}

TEST_CASE("single-run estimators hit their accuracy targets on the coc toy") {
    NestedProblem p = problem_by_name("coc");
    const double eps = 0.05;
    int ok08 = 0, okqa = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        RngStream r1(9000 + s), r2(9500 + s);
        if (std::abs(q_nest_expect_08(p, eps, OracleMode::Idealized(), r1).value -
                     p.ground_truth->value) <= eps)
            ++ok08;
        if (std::abs(qa_mlmc_estimate(p, eps, OracleMode::Idealized(), r2).value -
                     p.ground_truth->value) <= eps)
            ++okqa;
    }
    CHECK(ok08 >= int(seeds * 0.8));
    CHECK(okqa >= int(seeds * 0.8));
}

TEST_CASE("clipped level-estimator output variance over random inputs stays bounded") {
    NestedProblem p = problem_by_name("gauss-toy");
    const double bound = (2.0 + 2.0 * p.outer_variance_s) * 1.3;
    for (int l = 0; l <= 4; ++l) {
        RngStream rng(400 + l);
        CostLedger led;
        RunningStats s;
        for (int i = 0; i < 5000; ++i) {
            double x = p.sample_x(rng, led);
            s.add(b_level(p, x, l, OracleMode::Idealized(), rng).first);
        }
        CHECK(s.variance() <= bound);
    }
}

TEST_CASE("bayes toy runs through the log-domain clip range") {
    NestedProblem p = problem_by_name("bayes");
    RngStream rng(37);
    EstimateResult q = q_nest_expect_08(p, 0.2, OracleMode::Idealized(), rng);
    CHECK(std::abs(q.value - p.ground_truth->value) <= 0.2);

    // the surrogate's clipped inner estimate stays inside [floor_c, 1], so
    // the outer log never sees a nonpositive argument
    CostLedger led;
    double x = p.sample_x(rng, led);
    for (int rep = 0; rep < 50; ++rep) {
        auto [v, bled] = b_level(p, x, 1, OracleMode::Surrogate(), rng);
        REQUIRE(std::isfinite(v));
        REQUIRE(v <= 0.0);             // log of a probability
        REQUIRE(v >= std::log(0.3));   // clip floor
    }

    EstimateResult c = classical_mlmc_estimate(p, 0.1, rng);
    CHECK(std::abs(c.value - p.ground_truth->value) <= 0.3);
}

TEST_CASE("same seed gives bit-identical quantum results") {
    NestedProblem p = problem_by_name("coc");
    RngStream r1(36), r2(36);
    EstimateResult a = q_nest_expect(p, 0.1, 0.1, OracleMode::Idealized(), r1);
    EstimateResult b = q_nest_expect(p, 0.1, 0.1, OracleMode::Idealized(), r2);
    CHECK(a.value == b.value);
    CHECK(a.ledger == b.ledger);
}
