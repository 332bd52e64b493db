#include "ewmiv/random.hpp"

#include <cmath>

namespace ewmiv {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    // Decorrelate nearby seeds/streams before they become Philox key/counter.
    const std::uint64_t k = splitmix64(seed);
    const std::uint64_t s = splitmix64(stream ^ 0xA5A5A5A5A5A5A5A5ull);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    counter_ = {0u, 0u, static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
}

void Rng::refill() {
    std::array<std::uint32_t, 4> c = counter_;
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    block_ = c;
    pos_ = 0;
    if (++counter_[0] == 0) ++counter_[1];  // 2^64 blocks per stream
}

std::uint32_t Rng::next_u32() {
    if (pos_ >= 4) refill();
    return block_[static_cast<std::size_t>(pos_++)];
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
    return a + (b - a) * uniform01();
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

double Rng::normal(double mean, double sd) {
    return mean + sd * normal();
}

bool Rng::bernoulli(double p) {
    return uniform01() < p;
}

Rng Rng::substream(std::uint64_t index) const {
    return Rng(seed_, splitmix64(stream_ + 0x51ED2701u) ^ splitmix64(index));
}

}  // namespace ewmiv
