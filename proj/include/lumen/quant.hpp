#pragma once

// Digital-side parameter conditioning before deployment on the photonic
// substrate: uniform quantization, binarization with batch-norm folding,
// magnitude pruning and weight clustering.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lumen {

enum class QuantScheme { uniform, binary_weights, cluster };

std::string to_string(QuantScheme scheme);
QuantScheme parse_quant_scheme(const std::string& text);

struct QuantSpec {
    int weight_bits = 16;
    int activation_bits = 16;
    QuantScheme scheme = QuantScheme::uniform;
    int cluster_count = 0;

    void validate() const;
};

struct QuantizedTensor {
    std::vector<double> values;
    std::vector<std::int64_t> codes;
    double step = 0.0;  // spacing between adjacent levels
};

/// Symmetric quantizer over [-range, range]. bits == 1 is mid-rise with levels
/// {-range, +range}; bits >= 2 is mid-tread with codes in [-M, M],
/// M = 2^(bits-1) - 1, so zero is representable. Out-of-range values clamp.
QuantizedTensor uniform_quantize(std::span<const double> values, int bits, double symmetric_range);

/// Unsigned quantizer over [0, range] with 2^bits levels (activation DACs).
QuantizedTensor unsigned_quantize(std::span<const double> values, int bits, double range);

struct BinarizedLayer {
    std::vector<double> signs;       // row-major, +1 / -1
    std::vector<double> multiplier;  // per output, applied after accumulation
    std::vector<double> shift;       // per output, applied electronically
};

/// sign(w) with sign(0) = +1; batch norm folded into a per-output multiplier
/// plus additive shift. Rows = bn_scale.size().
BinarizedLayer binarize_with_bn(std::span<const double> weights, std::span<const double> bn_scale,
                                std::span<const double> bn_shift);

/// Zeroes the floor(target * n) smallest-magnitude entries, ties broken by
/// lowest flat index.
std::vector<double> prune_magnitude(std::span<const double> weights, double sparsity_target);

/// Fraction of exact zeros.
double sparsity_of(std::span<const double> weights);

struct ClusterResult {
    std::vector<double> codebook;    // ascending
    std::vector<std::int32_t> index; // per weight
    double objective = 0.0;          // sum of squared reconstruction errors

    [[nodiscard]] std::vector<double> reconstruct() const;
};

/// Optimal 1-D k-means (exact dynamic program over sorted values).
ClusterResult cluster_quantize(std::span<const double> weights, int cluster_count);

}  // namespace lumen
