#include "mfmlmc/pic_field.hpp"

#include "mfmlmc/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

namespace mfmlmc::pic {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

GridSpec::GridSpec(double domain_length, double cell_size) : length_(domain_length), h_(cell_size) {
    if (!(domain_length > 0.0) || !(cell_size > 0.0) || !std::isfinite(domain_length) ||
        !std::isfinite(cell_size)) {
        throw ConfigError("grid: domain_length and cell_size must be positive");
    }
    const double cells = domain_length / cell_size;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * rounded || rounded < 4.0) {
        throw ConfigError("grid: domain_length/cell_size must be an integer >= 4 (got " +
                          std::to_string(cells) + ")");
    }
    n_ = static_cast<std::size_t>(rounded);
}

double GridSpec::wrap(double x) const noexcept {
    double r = std::fmod(x, length_);
    if (r < 0.0) r += length_;
    if (r >= length_) r -= length_;
    return r;
}

NodeWeights deposit(double position, const GridSpec& grid) noexcept {
    const double u = grid.wrap(position) / grid.cell_size();
    double cell = std::floor(u);
    double frac = u - cell;
    std::size_t i = static_cast<std::size_t>(cell);
    if (i >= grid.n_cells()) {
        i = 0;
        frac = 0.0;
    }
    const std::size_t j = i + 1 == grid.n_cells() ? 0 : i + 1;
    const double inv_h = 1.0 / grid.cell_size();
    return NodeWeights{{i, j}, {(1.0 - frac) * inv_h, frac * inv_h}};
}

void deposit_into(double position, const GridSpec& grid, std::span<double> rho) noexcept {
    const NodeWeights w = deposit(position, grid);
    rho[w.node[0]] += w.weight[0];
    rho[w.node[1]] += w.weight[1];
}

double interpolate_field(std::span<const double> e_nodes, double position,
                         const GridSpec& grid) noexcept {
    const NodeWeights w = deposit(position, grid);
    const double h = grid.cell_size();
    return (w.weight[0] * h) * e_nodes[w.node[0]] + (w.weight[1] * h) * e_nodes[w.node[1]];
}

struct PoissonSolver::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

PoissonSolver::PoissonSolver(const GridSpec& grid)
    : grid_(grid), plans_(std::make_unique<Plans>()) {
    const int n = static_cast<int>(grid.n_cells());
    const std::size_t n_modes = grid.n_cells() / 2 + 1;
    wavenumber_.resize(n_modes);
    for (std::size_t m = 0; m < n_modes; ++m) {
        wavenumber_[m] = 2.0 * std::numbers::pi * static_cast<double>(m) / grid.domain_length();
    }
    std::vector<double> real(grid.n_cells());
    auto* spectrum = fftw_alloc_complex(n_modes);
    {
        std::lock_guard lock(planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plans_->forward = fftw_plan_dft_r2c_1d(n, real.data(), spectrum, flags);
        plans_->backward = fftw_plan_dft_c2r_1d(n, spectrum, real.data(), flags);
    }
    fftw_free(spectrum);
}

PoissonSolver::~PoissonSolver() {
    std::lock_guard lock(planner_mutex());
    if (plans_->forward) fftw_destroy_plan(plans_->forward);
    if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

void PoissonSolver::solve(std::span<const double> rho, std::span<double> e_nodes) const {
    const std::size_t n = grid_.n_cells();
    if (rho.size() != n || e_nodes.size() != n) {
        throw ContractError("PoissonSolver::solve: density/field size does not match grid");
    }
    const std::size_t n_modes = n / 2 + 1;
    std::vector<double> work(rho.begin(), rho.end());
    std::vector<std::complex<double>> spectrum(n_modes);
    auto* raw = reinterpret_cast<fftw_complex*>(spectrum.data());
    fftw_execute_dft_r2c(plans_->forward, work.data(), raw);

    // Zero mode removed (rho - rho0); E_k = -i k phi_k with phi_k = rho_k / k^2.
    spectrum[0] = 0.0;
    for (std::size_t m = 1; m < n_modes; ++m) {
        const double k = wavenumber_[m];
        spectrum[m] *= std::complex<double>(0.0, -1.0 / k);
    }
    if (n % 2 == 0) spectrum[n / 2] = 0.0;

    fftw_execute_dft_c2r(plans_->backward, raw, work.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) e_nodes[i] = work[i] * scale;
}

std::vector<double> solve_field(std::span<const double> rho, const GridSpec& grid) {
    PoissonSolver solver(grid);
    std::vector<double> e(grid.n_cells());
    solver.solve(rho, e);
    return e;
}

}  // namespace mfmlmc::pic
