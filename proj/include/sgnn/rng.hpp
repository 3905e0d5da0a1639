#pragma once

#include <array>
#include <cstdint>

namespace sgnn {

/// Counter-based random stream (Philox4x32-10).
///
/// The 64-bit seed is the cipher key; the counter block is
/// (draw index, stream id). Because the cipher is a bijection on counter
/// blocks for a fixed key, distinct stream ids never share an output block,
/// and a stream is a pure function of (seed, stream_id) on every platform.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int buf_pos_ = 2;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// Stream ids are partitioned by purpose in the top 16 bits so that, for
/// example, weight initialisation and per-sample simulation of the same run
/// never collide.
enum class StreamPurpose : std::uint64_t {
    Sample = 0,
    Observation = 1,
    Init = 2,
    Shuffle = 3,
    Perturbation = 4,
    Split = 5,
    Bandwidth = 6,
    Multistart = 7,
    Rademacher = 8,
    Subsample = 9,
};

constexpr std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) noexcept
{
    return (static_cast<std::uint64_t>(purpose) << 48) | (index & ((std::uint64_t{1} << 48) - 1));
}

/// Derive an independent 64-bit seed from a parent seed and a tag (SplitMix64 finaliser).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;

}  // namespace sgnn
