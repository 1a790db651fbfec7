#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "supcfa/qp.hpp"
#include "test_util.hpp"

using namespace supcfa;
using supcfa::testing::psd_within;
using supcfa::testing::random_matrix;

namespace {

Matrix one_of_m(const std::vector<std::size_t>& classes, std::size_t m) {
    Matrix y(classes.size(), m);
    for (std::size_t i = 0; i < classes.size(); ++i)
        for (std::size_t k = 0; k < m; ++k) y(i, k) = k == classes[i] ? 1.0 : -1.0;
    return y;
}

// Random instance with n documents, m classes, d shared dimensions.
QpProblem random_problem(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed, double h = 1.0,
                         double c1 = 1.0) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> classes(n);
    for (auto& c : classes) c = rng() % m;
    return build_qp(random_matrix(n, d, seed + 1, 0.7), random_matrix(n, d, seed + 2, 0.7), one_of_m(classes, m), h,
                    c1);
}

QpProblem zero_problem(std::size_t n, double h, double c1) {
    return {Matrix(n, n), Matrix(n, n), Matrix(n, n), h, c1};
}

} // namespace

TEST_CASE("build_qp structure") {
    SUBCASE("zero projections give zero grams") {
        const QpProblem p = build_qp(Matrix(1, 2), Matrix(1, 2), one_of_m({0}, 2), 1.0, 1.0);
        CHECK(p.gram_ii == Matrix{{0}});
        CHECK(p.gram_it == Matrix{{0}});
        CHECK(p.gram_tt == Matrix{{0}});
    }
    SUBCASE("orthogonal labels zero the off-diagonal entries") {
        const Matrix y = one_of_m({0, 1}, 4); // y1·y2 = 0 for m = 4
        const QpProblem p = build_qp(random_matrix(2, 3, 1), random_matrix(2, 3, 2), y, 1.0, 1.0);
        CHECK(p.gram_ii(0, 1) == 0.0);
        CHECK(p.gram_ii(1, 0) == 0.0);
        CHECK(p.gram_it(0, 1) == 0.0);
        CHECK(p.gram_it(1, 0) == 0.0);
        CHECK(p.gram_tt(0, 1) == 0.0);
        CHECK(p.gram_ii(0, 0) > 0.0);
    }
    SUBCASE("entries follow the label-weighted inner products") {
        const Matrix u{{1, 2}, {0, 1}};
        const Matrix v{{3, -1}, {1, 1}};
        const Matrix y = one_of_m({0, 1}, 2); // y1·y2 = -2, ‖y‖² = 2
        const QpProblem p = build_qp(u, v, y, 1.0, 1.0);
        CHECK(p.gram_ii == Matrix{{10, -4}, {-4, 2}});
        CHECK(p.gram_it == Matrix{{2, -6}, {2, 2}});
        CHECK(p.gram_tt == Matrix{{20, -4}, {-4, 4}});
    }
    SUBCASE("stacked matrix is PSD on random n = 3") {
        const QpProblem p = random_problem(3, 3, 2, 5);
        const Matrix mm = p.stacked();
        CHECK(mm.rows() == 6);
        CHECK(psd_within(mm, 1e-8 * frobenius_norm(mm)));
        CHECK(max_abs(mm - mm.transposed()) == 0.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(build_qp(Matrix(2, 2), Matrix(3, 2), one_of_m({0, 1}, 2), 1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(build_qp(Matrix(2, 2), Matrix(2, 3), one_of_m({0, 1}, 2), 1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(build_qp(Matrix(2, 2), Matrix(2, 2), one_of_m({0, 1}, 2), 1.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("PSD holds on random instances of many sizes") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const std::size_t n = 1 + seed % 12;
        const QpProblem p = random_problem(n, 2 + seed % 4, 1 + seed % 5, 1000 + seed);
        const Matrix mm = p.stacked();
        CAPTURE(seed);
        CHECK(psd_within(mm, 1e-8 * std::max(1.0, frobenius_norm(mm))));
    }
}

TEST_CASE("solve_qp closed-form cases") {
    SUBCASE("linear objective goes to the upper corner") {
        const QpResult r = solve_qp(zero_problem(3, 1.0, 2.0));
        CHECK(r.converged);
        CHECK(r.duals.alpha == std::vector<double>(3, 2.0));
        CHECK(r.duals.gamma == std::vector<double>(3, 2.0));
        CHECK(r.objective == doctest::Approx(12.0));
    }
    SUBCASE("h = 0 stays at the origin") {
        QpProblem p = random_problem(3, 3, 2, 8, 0.0);
        const QpResult r = solve_qp(p);
        CHECK(r.converged);
        CHECK(r.objective == 0.0);
        CHECK(r.duals == DualState::zeros(3));
    }
    SUBCASE("scalar quadratic") {
        const QpProblem p{Matrix{{1}}, Matrix{{0}}, Matrix{{0}}, 1.0, 10.0};
        const QpResult r = solve_qp(p);
        CHECK(r.duals.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.duals.gamma[0] == 10.0);
    }
}

TEST_CASE("brute_force_qp closed-form cases") {
    const DualState lin = brute_force_qp(zero_problem(1, 1.0, 3.0), 10);
    CHECK(lin.alpha[0] == 3.0);
    CHECK(lin.gamma[0] == 3.0);
    const QpProblem p{Matrix{{1}}, Matrix{{0}}, Matrix{{0}}, 1.0, 10.0};
    const DualState s = brute_force_qp(p, 20);
    CHECK(s.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.gamma[0] == 10.0);
    CHECK_THROWS_AS(brute_force_qp(zero_problem(4, 1.0, 1.0), 4), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_qp(zero_problem(1, 1.0, 1.0), 0), std::invalid_argument);
}

TEST_CASE("solve_qp matches the brute-force oracle") {
    SUBCASE("n = 2, m = 2, d = 2") {
        const QpProblem p = random_problem(2, 2, 2, 31);
        const QpResult r = solve_qp(p);
        CHECK(std::abs(r.objective - p.objective(brute_force_qp(p, 20))) <= 1e-6);
    }
    SUBCASE("20 random instances with n ≤ 3, m ≤ 4, d ≤ 3") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const std::size_t n = 1 + seed % 3;
            const std::size_t m = 2 + seed % 3;
            const std::size_t d = 1 + (seed / 3) % 3;
            const double c1 = 0.5 + 0.25 * static_cast<double>(seed % 5);
            const QpProblem p = random_problem(n, m, d, 500 + seed, 1.0, c1);
            const QpResult r = solve_qp(p, std::nullopt, {1e-10, 100000});
            const double oracle = p.objective(brute_force_qp(p, 12));
            CAPTURE(seed);
            CHECK(r.converged);
            CHECK(r.objective >= oracle - 1e-6);
            CHECK(std::abs(r.objective - oracle) <= 1e-6);
        }
    }
}

TEST_CASE("default options match the oracle without a raised sweep cap") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const QpProblem p = random_problem(1 + seed % 3, 2 + seed % 3, 1 + (seed / 3) % 3, 500 + seed);
        CHECK(std::abs(solve_qp(p).objective - p.objective(brute_force_qp(p, 12))) <= 1e-6);
    }
}

TEST_CASE("solve_qp properties") {
    SUBCASE("iterates stay in the box and satisfy KKT within tolerance") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const QpProblem p = random_problem(8 + seed, 3, 3, 77 + seed, 1.0, 0.3 + 0.2 * static_cast<double>(seed));
            const QpResult r = solve_qp(p, std::nullopt, {1e-9, 100000});
            CHECK(r.converged);
            CHECK(r.duals.feasible(p.box_c1));
            CHECK(p.max_projected_gradient(r.duals) <= 1e-9);
            CHECK(r.objective == doctest::Approx(p.objective(r.duals)).epsilon(1e-12));
        }
    }
    SUBCASE("objective never decreases as sweeps are added") {
        const QpProblem p = random_problem(12, 4, 3, 404);
        double prev = p.objective(DualState::zeros(12));
        for (std::size_t sweeps = 1; sweeps <= 15; ++sweeps) {
            const QpResult r = solve_qp(p, std::nullopt, {1e-14, sweeps});
            CHECK(r.objective >= prev - 1e-12);
            prev = r.objective;
        }
    }
    SUBCASE("sweep cap reports non-convergence") {
        const QpProblem p = random_problem(20, 4, 3, 405);
        const QpResult r = solve_qp(p, std::nullopt, {1e-14, 1});
        CHECK_FALSE(r.converged);
        CHECK(r.sweeps == 1);
        CHECK(r.duals.feasible(p.box_c1));
    }
    SUBCASE("warm starts are clipped into the box and reach the same optimum") {
        const QpProblem p = random_problem(6, 3, 2, 406);
        DualState warm{std::vector<double>(6, 5.0), std::vector<double>(6, -1.0)};
        const QpResult cold = solve_qp(p, std::nullopt, {1e-11, 100000});
        const QpResult hot = solve_qp(p, warm, {1e-11, 100000});
        CHECK(hot.objective == doctest::Approx(cold.objective).epsilon(1e-9));
        CHECK_THROWS_AS(solve_qp(p, DualState::zeros(5)), std::invalid_argument);
    }
    SUBCASE("the objective is concave along random segments") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const QpProblem p = random_problem(5, 3, 3, 407);
        for (int trial = 0; trial < 50; ++trial) {
            DualState a = DualState::zeros(5), b = DualState::zeros(5), mid = DualState::zeros(5);
            for (std::size_t i = 0; i < 5; ++i) {
                a.alpha[i] = unit(rng);
                a.gamma[i] = unit(rng);
                b.alpha[i] = unit(rng);
                b.gamma[i] = unit(rng);
                mid.alpha[i] = 0.5 * (a.alpha[i] + b.alpha[i]);
                mid.gamma[i] = 0.5 * (a.gamma[i] + b.gamma[i]);
            }
            CHECK(p.objective(mid) >= 0.5 * (p.objective(a) + p.objective(b)) - 1e-12);
        }
    }
    SUBCASE("with zero grams, scaling h keeps the maximizer") {
        for (double h : {0.1, 1.0, 7.0}) {
            const QpResult r = solve_qp(zero_problem(2, h, 1.5));
            CHECK(r.duals.alpha == std::vector<double>(2, 1.5));
        }
    }
}

TEST_CASE("gradient agrees with finite differences") {
    const QpProblem p = random_problem(4, 3, 2, 55);
    DualState x{{0.1, 0.5, 0.9, 0.3}, {0.7, 0.2, 0.4, 0.6}};
    const DualState g = p.gradient(x);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < 4; ++i) {
        DualState hi = x, lo = x;
        hi.alpha[i] += eps;
        lo.alpha[i] -= eps;
        CHECK(g.alpha[i] == doctest::Approx((p.objective(hi) - p.objective(lo)) / (2 * eps)).epsilon(1e-6));
        hi = x;
        lo = x;
        hi.gamma[i] += eps;
        lo.gamma[i] -= eps;
        CHECK(g.gamma[i] == doctest::Approx((p.objective(hi) - p.objective(lo)) / (2 * eps)).epsilon(1e-6));
    }
}
