#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace mfmlmc::pic {

/// Uniform periodic 1D grid with nodes x_i = i*h, i = 0 .. n_cells-1.
class GridSpec {
public:
    /// Throws ConfigError unless domain_length / cell_size is an integer >= 4.
    GridSpec(double domain_length, double cell_size);

    double domain_length() const noexcept { return length_; }
    double cell_size() const noexcept { return h_; }
    std::size_t n_cells() const noexcept { return n_; }
    double node(std::size_t i) const noexcept { return static_cast<double>(i) * h_; }

    /// Reduces x into [0, domain_length).
    double wrap(double x) const noexcept;

private:
    double length_;
    double h_;
    std::size_t n_;
};

/// Tent-kernel weights of one particle: S((x - x_i)/h)/h at the two bracketing nodes.
struct NodeWeights {
    std::array<std::size_t, 2> node;
    std::array<double, 2> weight;
};

/// Sparse deposit of a particle at `position` (wrapped internally). Weights sum to 1/h.
NodeWeights deposit(double position, const GridSpec& grid) noexcept;

/// Adds the deposit of one particle into a dense density vector of length n_cells.
void deposit_into(double position, const GridSpec& grid, std::span<double> rho) noexcept;

/// Periodic linear interpolation of a nodal field at `position` (wrapped internally).
double interpolate_field(std::span<const double> e_nodes, double position,
                         const GridSpec& grid) noexcept;

/// Spectral periodic Poisson solver for -phi'' = rho - mean(rho), returning E = -phi' at nodes.
/// Plans are created once; solve() is safe to call concurrently.
class PoissonSolver {
public:
    explicit PoissonSolver(const GridSpec& grid);
    ~PoissonSolver();
    PoissonSolver(const PoissonSolver&) = delete;
    PoissonSolver& operator=(const PoissonSolver&) = delete;

    const GridSpec& grid() const noexcept { return grid_; }

    void solve(std::span<const double> rho, std::span<double> e_nodes) const;

private:
    struct Plans;
    GridSpec grid_;
    std::unique_ptr<Plans> plans_;
    std::vector<double> wavenumber_;
};

/// Convenience wrapper that builds a solver for `grid` and solves once.
std::vector<double> solve_field(std::span<const double> rho, const GridSpec& grid);

}  // namespace mfmlmc::pic
