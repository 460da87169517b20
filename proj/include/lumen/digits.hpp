#pragma once

// Deterministic 8x8 grayscale digit renderings for desk-scale experiments.

#include <cstdint>
#include <vector>

namespace lumen {

struct Dataset {
    std::vector<std::vector<double>> images;  // 64 values in [0,1], row-major
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
};

inline constexpr int kDigitSide = 8;
inline constexpr int kDigitPixels = kDigitSide * kDigitSide;

/// `count` samples, labels cycling 0..9; each glyph gets a random offset,
/// stroke intensity and additive Gaussian noise.
Dataset synthetic_digits(int count, std::uint64_t seed);

}  // namespace lumen
