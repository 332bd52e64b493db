#ifndef EWMIV_RANDOM_HPP
#define EWMIV_RANDOM_HPP

#include <array>
#include <cstdint>

namespace ewmiv {

/**
 * Counter-based PRNG (Philox-4x32-10).
 *
 * State is (key, counter): the key is derived from a 64-bit seed, the high
 * half of the counter from a 64-bit stream id. Streams with distinct ids are
 * statistically independent, so parallel workers can each take
 * rng.substream(worker) and produce reproducible draws regardless of
 * scheduling. Draw sequences depend only on (seed, stream), never on global
 * state.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on [0,1) with 53 random bits.
    double uniform01();
    double uniform(double a, double b);

    /// Standard normal via Box-Muller (second draw cached).
    double normal();
    double normal(double mean, double sd);

    bool bernoulli(double p);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent generator for a sub-task; (seed, stream, index) fully
    /// determines its output.
    Rng substream(std::uint64_t index) const;

private:
    void refill();

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;  // forces refill on first draw
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace ewmiv

#endif
