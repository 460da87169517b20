#include "lumen/digits.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "lumen/errors.hpp"

namespace lumen {

namespace {

// 5 wide x 7 tall bitmaps, MSB is the leftmost column.
constexpr std::array<std::array<std::uint8_t, 7>, 10> kGlyphs = {{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
}};

}  // namespace

Dataset synthetic_digits(int count, std::uint64_t seed) {
    if (count < 0) throw DomainError("synthetic_digits: count must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dx(0, kDigitSide - 5);
    std::uniform_int_distribution<int> dy(0, kDigitSide - 7);
    std::uniform_real_distribution<double> intensity(0.6, 1.0);
    std::normal_distribution<double> noise(0.0, 0.12);
    std::bernoulli_distribution dropout(0.06);

    Dataset d;
    d.images.reserve(static_cast<std::size_t>(count));
    d.labels.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int label = i % 10;
        const int ox = dx(rng);
        const int oy = dy(rng);
        const double ink = intensity(rng);
        std::vector<double> img(kDigitPixels, 0.0);
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 5; ++c)
                if ((kGlyphs[label][r] >> (4 - c)) & 1u) {
                    if (dropout(rng)) continue;
                    img[(oy + r) * kDigitSide + ox + c] = ink;
                }
        for (double& p : img) p = std::clamp(p + noise(rng), 0.0, 1.0);
        d.images.push_back(std::move(img));
        d.labels.push_back(label);
    }
    return d;
}

}  // namespace lumen
