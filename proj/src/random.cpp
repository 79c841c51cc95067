#include "mfmlmc/random.hpp"

namespace mfmlmc {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t stream_key(const StreamId& id) noexcept {
    std::uint64_t h = splitmix64(id.root);
    h = hash_combine(h, id.epoch);
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(id.level)));
    h = hash_combine(h, id.sample);
    h = hash_combine(h, static_cast<std::uint64_t>(id.role));
    return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) noexcept {
    return hash_combine(hash_combine(splitmix64(root ^ 0xA5A5A5A5A5A5A5A5ULL), a), b);
}

void RandomStream::refill() noexcept {
    const std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(key_),
                                           static_cast<std::uint32_t>(key_ >> 32)};
    const auto out = philox4x32_10(ctr, key);
    lanes_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    lanes_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    ++counter_;
    lane_ = 0;
}

}  // namespace mfmlmc
