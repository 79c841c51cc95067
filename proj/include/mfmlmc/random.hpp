#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfmlmc {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// Pure function of (counter, key); every stream in the library is built on it.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer. Used as the stable hash for stream-key derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Folds `value` into `hash`. Order-sensitive; the derivation of every stream key is
/// hash_combine(... hash_combine(splitmix64(root), a) ..., z).
constexpr std::uint64_t hash_combine(std::uint64_t hash, std::uint64_t value) noexcept {
    return splitmix64(hash ^ splitmix64(value + 0x632BE59BD9B4E019ULL));
}

enum class StreamRole : std::uint32_t {
    initial = 0,               // initial-condition draw of a particle or pair
    brownian = 1,              // Brownian increments of a particle or pair
    independent_initial = 2,   // frozen-field comparison ensembles
    independent_brownian = 3,
};

/// Identifies one stream: (root seed, epoch, level, sample index, role).
/// `epoch` separates the re-simulations of levels 0 and 1 after a sample-count restart.
struct StreamId {
    std::uint64_t root = 0;
    std::uint32_t epoch = 0;
    std::int32_t level = 0;
    std::uint64_t sample = 0;
    StreamRole role = StreamRole::initial;
};

std::uint64_t stream_key(const StreamId& id) noexcept;

/// Derives a child seed from a root seed and a list of indices (study runs, ε indices).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Sequential view over a counter-based Philox stream.
///
/// Each block yields two 64-bit lanes; uniforms take the top 53 bits of a lane.
/// Normals use Box-Muller and cache the second variate of each pair.
class RandomStream {
public:
    RandomStream() = default;
    explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}
    explicit RandomStream(const StreamId& id) noexcept : key_(stream_key(id)) {}

    std::uint64_t next_u64() noexcept {
        if (lane_ == 2) refill();
        return lanes_[lane_++];
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_left() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_left();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double variance) noexcept {
        return mean + std::sqrt(variance) * normal();
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t blocks_consumed() const noexcept { return counter_; }

private:
    void refill() noexcept;

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> lanes_{};
    int lane_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mfmlmc
