#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace feddct::nn {

/// Counter-based random stream keyed by (seed, label).
///
/// Draw i of a stream is a pure function of (seed, label, i): consumers that
/// derive their own labelled child stream never perturb each other, and the
/// raw 64-bit sequence is identical on every platform. Normal draws go through
/// the C math library and are only as portable as std::log/std::cos.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string label);

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string &label() const noexcept { return label_; }

    // Stream with label "<label>/<sub>".
    RngStream child(std::string_view sub) const;
    RngStream child(std::string_view sub, std::uint64_t index) const;

    // Pure, indexed access.
    std::uint64_t bits_at(std::uint64_t index) const noexcept;
    double uniform_at(std::uint64_t index) const noexcept;

    // Sequential access; advances the internal counter.
    std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
    double next_uniform() noexcept { return uniform_at(counter_++); }
    double next_normal() noexcept;
    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) noexcept;

    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::string label_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Fisher-Yates with RngStream draws; identical permutation on every platform.
template <typename T>
void shuffle_in_place(std::vector<T> &items, RngStream &rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

std::vector<std::size_t> permutation(std::size_t n, RngStream rng);

} // namespace feddct::nn
