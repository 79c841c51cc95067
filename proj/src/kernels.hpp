#pragma once

// Internal helpers shared by the stepping kernels.

#include "mfmlmc/model.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace mfmlmc::detail {

/// Per-block scratch for coefficient evaluation.
struct Scratch {
    explicit Scratch(const ModelSpec& model)
        : drift(model.state_dim),
          diffusion(model.state_dim * model.noise_dim),
          meanfield(model.meanfield_dim),
          meanfield_coarse(model.meanfield_dim),
          payoff(model.payoff_dim) {}

    std::vector<double> drift;
    std::vector<double> diffusion;
    std::vector<double> meanfield;
    std::vector<double> meanfield_coarse;
    std::vector<double> payoff;
};

/// One Euler-Maruyama update x += drift * dt + diffusion * dw.
inline void euler_step(const ModelSpec& model, std::span<double> x, double t,
                       std::span<const double> field, double dt, std::span<const double> dw,
                       Scratch& s) {
    const std::size_t d = model.state_dim;
    const std::size_t noise = model.noise_dim;
    model.drift(x, t, field, s.drift);
    model.diffusion(x, t, field, s.diffusion);
    for (std::size_t j = 0; j < d; ++j) {
        double inc = s.drift[j] * dt;
        for (std::size_t k = 0; k < noise; ++k) inc += s.diffusion[j * noise + k] * dw[k];
        x[j] += inc;
    }
}

/// Per-block partial sums of a dim-vector. Blocks are combined in index order, so the result
/// does not depend on which worker filled which block.
class BlockSums {
public:
    BlockSums(std::size_t blocks, std::size_t dim) : dim_(dim), data_(blocks * dim, 0.0) {}

    std::span<double> block(std::size_t b) { return {data_.data() + b * dim_, dim_}; }

    void sum_into(std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t blocks = dim_ == 0 ? 0 : data_.size() / dim_;
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t k = 0; k < dim_; ++k) out[k] += data_[b * dim_ + k];
        }
    }

    void mean_into(std::size_t n, std::span<double> out) const {
        sum_into(out);
        for (double& v : out) v /= static_cast<double>(n);
    }

private:
    std::size_t dim_;
    std::vector<double> data_;
};

}  // namespace mfmlmc::detail
