#pragma once

// Counter-based random stream: output i of a stream with key k is
// mix64(k + i * golden), i.e. SplitMix64 evaluated at an explicit counter.
// Streams are split by hashing a stream id into a fresh key, so draws for
// independent purposes (matrix init, noise, initial conditions, per-cell
// replicates) never share state and can be produced in any order.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace chaosbench {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-sensitive hash of a sequence of words into a stream key.
constexpr std::uint64_t derive_key(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = mix64(base ^ 0x6a09e667f3bcc909ULL);
    for (auto w : words) h = mix64(h ^ mix64(w + 0x9e3779b97f4a7c15ULL));
    return h;
}

class CounterRng {
public:
    using result_type = std::uint64_t;
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

    /// Independent child stream; does not advance this stream.
    constexpr CounterRng split(std::uint64_t stream_id) const {
        return CounterRng(derive_key(key_, {stream_id}));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1p-53; }

    constexpr std::uint64_t key() const { return key_; }
    constexpr std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace chaosbench
