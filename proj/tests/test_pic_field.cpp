#include "mfmlmc/errors.hpp"
#include "mfmlmc/pic_field.hpp"
#include "mfmlmc/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace mfmlmc;
using pic::GridSpec;

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> density(std::span<const double> positions, const GridSpec& grid) {
    std::vector<double> rho(grid.n_cells(), 0.0);
    for (double x : positions) pic::deposit_into(x, grid, rho);
    for (double& r : rho) r /= static_cast<double>(positions.size());
    return rho;
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_NOTHROW(GridSpec(20.0, 1.0));
    CHECK(GridSpec(20.0, 1.0).n_cells() == 20);
    CHECK(GridSpec(2.0, 0.25).n_cells() == 8);
    CHECK_THROWS_AS(GridSpec(3.0, 1.0), ConfigError);
    CHECK_THROWS_AS(GridSpec(20.0, 0.7), ConfigError);
    CHECK_THROWS_AS(GridSpec(-20.0, 1.0), ConfigError);
}

TEST_CASE("deposit examples") {
    const GridSpec grid(20.0, 1.0);
    auto w = pic::deposit(3.5, grid);
    CHECK(w.node[0] == 3);
    CHECK(w.node[1] == 4);
    CHECK(w.weight[0] == 0.5);
    CHECK(w.weight[1] == 0.5);

    w = pic::deposit(3.0, grid);
    CHECK(w.node[0] == 3);
    CHECK(w.weight[0] == 1.0);
    CHECK(w.weight[1] == 0.0);

    w = pic::deposit(19.5, grid);
    CHECK(w.node[0] == 19);
    CHECK(w.node[1] == 0);
    CHECK(w.weight[0] == 0.5);
    CHECK(w.weight[1] == 0.5);
}

TEST_CASE("deposit scales by 1/h and wraps outside the domain") {
    const GridSpec grid(2.0, 0.25);
    const auto w = pic::deposit(0.375, grid);
    CHECK(w.node[0] == 1);
    CHECK(w.weight[0] == doctest::Approx(2.0));
    CHECK(w.weight[0] + w.weight[1] == doctest::Approx(4.0));
    const auto wrapped = pic::deposit(0.375 - 2.0, grid);
    CHECK(wrapped.node[0] == 1);
    CHECK(wrapped.weight[0] == doctest::Approx(2.0));
}

TEST_CASE("single Fourier mode Poisson solve") {
    for (double h : {1.0, 0.5, 0.25}) {
        const GridSpec grid(20.0, h);
        const double len = grid.domain_length();
        std::vector<double> rho(grid.n_cells());
        for (std::size_t i = 0; i < rho.size(); ++i) {
            rho[i] = 0.3 + std::cos(2.0 * std::numbers::pi * grid.node(i) / len);
        }
        const auto e = pic::solve_field(rho, grid);
        double worst = 0.0;
        const double scale = len / (2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            const double exact = scale * std::sin(2.0 * std::numbers::pi * grid.node(i) / len);
            worst = std::max(worst, std::abs(e[i] - exact));
        }
        CHECK(worst / scale < 1e-10);
    }
}

TEST_CASE("uniform density gives zero field") {
    const GridSpec grid(20.0, 1.0);
    const std::vector<double> rho(20, 0.05);
    CHECK(max_abs(pic::solve_field(rho, grid)) < 1e-15);
}

TEST_CASE("field has zero mean and the solver is linear") {
    const GridSpec grid(20.0, 1.0);
    const pic::PoissonSolver solver(grid);
    RandomStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> r1(20), r2(20), mix(20), e1(20), e2(20), em(20);
        const double a = rng.normal(), b = rng.normal();
        for (std::size_t i = 0; i < 20; ++i) {
            r1[i] = rng.uniform();
            r2[i] = rng.normal();
            mix[i] = a * r1[i] + b * r2[i];
        }
        solver.solve(r1, e1);
        solver.solve(r2, e2);
        solver.solve(mix, em);
        CHECK(std::abs(std::accumulate(e1.begin(), e1.end(), 0.0)) < 1e-12);
        double worst = 0.0;
        for (std::size_t i = 0; i < 20; ++i) worst = std::max(worst, std::abs(em[i] - (a * e1[i] + b * e2[i])));
        CHECK(worst < 1e-13 * (1.0 + max_abs(em)));
    }
}

TEST_CASE("interpolate_field examples") {
    const GridSpec grid(20.0, 1.0);
    std::vector<double> e(20, 0.0);
    e[4] = 2.0;
    e[5] = 4.0;
    CHECK(pic::interpolate_field(e, 4.0, grid) == 2.0);
    CHECK(pic::interpolate_field(e, 4.5, grid) == doctest::Approx(3.0));
    e[19] = 1.0;
    e[0] = 3.0;
    CHECK(pic::interpolate_field(e, 19.5, grid) == doctest::Approx(2.0));
    CHECK(pic::interpolate_field(e, -0.5, grid) == doctest::Approx(2.0));
}

TEST_CASE("charge conservation over random particles") {
    const GridSpec grid(20.0, 0.5);
    RandomStream rng(9);
    std::vector<double> pos(10000);
    for (double& x : pos) x = grid.wrap(rng.normal(10.0, 6.0));
    const auto rho = density(pos, grid);
    const double total = std::accumulate(rho.begin(), rho.end(), 0.0) * grid.cell_size();
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("deposition and interpolation are adjoint") {
    const GridSpec grid(20.0, 1.0);
    RandomStream rng(13);
    std::vector<double> pos(10000), e(20);
    for (double& x : pos) x = grid.wrap(rng.uniform() * 20.0);
    for (double& v : e) v = rng.normal();
    double lhs = 0.0;
    for (double x : pos) lhs += pic::interpolate_field(e, x, grid);
    std::vector<double> deposited(20, 0.0);
    for (double x : pos) pic::deposit_into(x, grid, deposited);
    double rhs = 0.0;
    for (std::size_t i = 0; i < 20; ++i) rhs += e[i] * deposited[i] * grid.cell_size();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
}

TEST_CASE("shifting particles by one cell rotates density and field") {
    const GridSpec grid(20.0, 1.0);
    RandomStream rng(21);
    std::vector<double> pos(2000), shifted(2000);
    for (std::size_t p = 0; p < pos.size(); ++p) {
        pos[p] = grid.wrap(rng.normal(8.0, 4.0));
        shifted[p] = grid.wrap(pos[p] + 1.0);
    }
    const auto rho = density(pos, grid);
    const auto rho_s = density(shifted, grid);
    const auto e = pic::solve_field(rho, grid);
    const auto e_s = pic::solve_field(rho_s, grid);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(rho_s[(i + 1) % 20] == doctest::Approx(rho[i]).epsilon(1e-12));
        CHECK(std::abs(e_s[(i + 1) % 20] - e[i]) < 1e-12);
    }
}
