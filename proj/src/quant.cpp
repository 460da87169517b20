#include "lumen/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lumen/errors.hpp"

namespace lumen {

std::string to_string(QuantScheme scheme) {
    switch (scheme) {
        case QuantScheme::uniform: return "uniform";
        case QuantScheme::binary_weights: return "binary_weights";
        case QuantScheme::cluster: return "cluster";
    }
    return "uniform";
}

QuantScheme parse_quant_scheme(const std::string& text) {
    if (text == "uniform") return QuantScheme::uniform;
    if (text == "binary_weights" || text == "binary") return QuantScheme::binary_weights;
    if (text == "cluster") return QuantScheme::cluster;
    throw ConfigError("scheme", "unknown quantization scheme '" + text + "'");
}

void QuantSpec::validate() const {
    if (weight_bits < 1) throw ConfigError("weight_bits", "must be >= 1");
    if (activation_bits < 1) throw ConfigError("activation_bits", "must be >= 1");
    if (weight_bits > 32 || activation_bits > 32) throw ConfigError("bits", "must be <= 32");
    if (scheme == QuantScheme::binary_weights && weight_bits != 1)
        throw ConfigError("weight_bits", "binary_weights scheme requires weight_bits = 1");
    if (scheme == QuantScheme::cluster && cluster_count < 2)
        throw ConfigError("cluster_count", "cluster scheme requires cluster_count >= 2");
}

namespace {
void check_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) throw DataError("non-finite value in tensor");
}
}  // namespace

QuantizedTensor uniform_quantize(std::span<const double> values, int bits, double symmetric_range) {
    if (bits < 1 || bits > 32) throw DomainError("quantizer bits must lie in [1,32]");
    if (!(symmetric_range > 0.0)) throw DomainError("quantizer range must be > 0");
    check_finite(values);
    QuantizedTensor out;
    out.values.resize(values.size());
    out.codes.resize(values.size());
    if (bits == 1) {
        out.step = 2.0 * symmetric_range;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::int64_t code = values[i] >= 0.0 ? 1 : -1;
            out.codes[i] = code;
            out.values[i] = static_cast<double>(code) * symmetric_range;
        }
        return out;
    }
    const auto m = static_cast<std::int64_t>((std::uint64_t{1} << (bits - 1)) - 1);
    out.step = symmetric_range / static_cast<double>(m);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto code = std::clamp(static_cast<std::int64_t>(std::llround(values[i] / out.step)), -m, m);
        out.codes[i] = code;
        out.values[i] = static_cast<double>(code) * out.step;
    }
    return out;
}

QuantizedTensor unsigned_quantize(std::span<const double> values, int bits, double range) {
    if (bits < 1 || bits > 32) throw DomainError("quantizer bits must lie in [1,32]");
    if (!(range > 0.0)) throw DomainError("quantizer range must be > 0");
    check_finite(values);
    const auto top = static_cast<std::int64_t>((std::uint64_t{1} << bits) - 1);
    QuantizedTensor out;
    out.step = range / static_cast<double>(top);
    out.values.resize(values.size());
    out.codes.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto code = std::clamp(static_cast<std::int64_t>(std::llround(values[i] / out.step)),
                                     std::int64_t{0}, top);
        out.codes[i] = code;
        out.values[i] = static_cast<double>(code) * out.step;
    }
    return out;
}

BinarizedLayer binarize_with_bn(std::span<const double> weights, std::span<const double> bn_scale,
                                std::span<const double> bn_shift) {
    const std::size_t rows = bn_scale.size();
    if (rows == 0 || bn_shift.size() != rows || weights.size() % rows != 0)
        throw ShapeError("binarize_with_bn: weights must be rows x cols with one BN pair per row");
    check_finite(weights);
    BinarizedLayer out;
    out.signs.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) out.signs[i] = weights[i] >= 0.0 ? 1.0 : -1.0;
    out.multiplier.resize(rows);
    out.shift.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        if (bn_scale[r] == 0.0 || !std::isfinite(bn_scale[r])) {
            std::ostringstream os;
            os << "cannot fold batch norm: scale of output " << r << " is zero";
            throw FoldError(os.str());
        }
        out.multiplier[r] = bn_scale[r];
        out.shift[r] = bn_shift[r];
    }
    return out;
}

std::vector<double> prune_magnitude(std::span<const double> weights, double sparsity_target) {
    if (!(sparsity_target >= 0.0 && sparsity_target < 1.0))
        throw DomainError("sparsity target must lie in [0,1)");
    check_finite(weights);
    const std::size_t n = weights.size();
    const auto k = static_cast<std::size_t>(std::floor(sparsity_target * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(weights[a]) < std::abs(weights[b]);
    });
    std::vector<double> out(weights.begin(), weights.end());
    for (std::size_t i = 0; i < k; ++i) out[order[i]] = 0.0;
    return out;
}

double sparsity_of(std::span<const double> weights) {
    if (weights.empty()) return 0.0;
    const auto zeros = std::count(weights.begin(), weights.end(), 0.0);
    return static_cast<double>(zeros) / static_cast<double>(weights.size());
}

std::vector<double> ClusterResult::reconstruct() const {
    std::vector<double> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) out[i] = codebook[index[i]];
    return out;
}

namespace {

// Optimal 1-D k-means over sorted values: clusters are contiguous runs, so
// D[c][j] = min_i D[c-1][i] + cost(i, j) with a monotone argmin, solved by
// divide and conquer.
class SegmentCost {
public:
    explicit SegmentCost(const std::vector<double>& sorted) : s1_(sorted.size() + 1, 0.0), s2_(sorted.size() + 1, 0.0) {
        const double shift = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const double v = sorted[i] - shift;
            s1_[i + 1] = s1_[i] + v;
            s2_[i + 1] = s2_[i] + v * v;
        }
    }
    // Sum of squared deviations over [i, j).
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        const double n = static_cast<double>(j - i);
        const double s = s1_[j] - s1_[i];
        return std::max(0.0, s2_[j] - s2_[i] - s * s / n);
    }

private:
    std::vector<double> s1_, s2_;
};

void fill_layer(const SegmentCost& cost, const std::vector<double>& prev, std::vector<double>& cur,
                std::vector<std::size_t>& arg, std::size_t jlo, std::size_t jhi, std::size_t ilo, std::size_t ihi) {
    if (jlo > jhi) return;
    const std::size_t mid = jlo + (jhi - jlo) / 2;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = ilo;
    for (std::size_t i = ilo; i <= std::min(ihi, mid - 1); ++i) {
        const double v = prev[i] + cost(i, mid);
        if (v < best) {
            best = v;
            best_i = i;
        }
    }
    cur[mid] = best;
    arg[mid] = best_i;
    if (mid > jlo) fill_layer(cost, prev, cur, arg, jlo, mid - 1, ilo, best_i);
    fill_layer(cost, prev, cur, arg, mid + 1, jhi, best_i, ihi);
}

}  // namespace

ClusterResult cluster_quantize(std::span<const double> weights, int cluster_count) {
    check_finite(weights);
    std::vector<double> sorted(weights.begin(), weights.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq(sorted);
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (cluster_count < 1 || static_cast<std::size_t>(cluster_count) > uniq.size()) {
        std::ostringstream os;
        os << "cluster_count " << cluster_count << " exceeds the " << uniq.size() << " distinct weight values";
        throw DegenerateClusterError(os.str());
    }

    const std::size_t n = sorted.size();
    const auto k = static_cast<std::size_t>(cluster_count);
    const SegmentCost cost(sorted);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
    std::vector<std::vector<std::size_t>> arg(k + 1, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t j = 1; j <= n; ++j) prev[j] = cost(0, j);
    for (std::size_t c = 2; c <= k; ++c) {
        std::fill(cur.begin(), cur.end(), inf);
        fill_layer(cost, prev, cur, arg[c], c, n, c - 1, n - 1);
        std::swap(prev, cur);
    }

    ClusterResult out;
    out.codebook.resize(k);
    std::size_t end = n;
    for (std::size_t c = k; c >= 1; --c) {
        const std::size_t begin = c == 1 ? 0 : arg[c][end];
        out.codebook[c - 1] = std::accumulate(sorted.begin() + begin, sorted.begin() + end, 0.0) /
                              static_cast<double>(end - begin);
        end = begin;
    }
    out.index.resize(weights.size());
    out.objective = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        // Nearest center; ties go to the lower one.
        const auto it = std::lower_bound(out.codebook.begin(), out.codebook.end(), weights[i]);
        auto c = static_cast<std::size_t>(it - out.codebook.begin());
        if (c == k || (c > 0 && weights[i] - out.codebook[c - 1] <= out.codebook[c] - weights[i])) --c;
        out.index[i] = static_cast<std::int32_t>(c);
        const double d = weights[i] - out.codebook[c];
        out.objective += d * d;
    }
    return out;
}

}  // namespace lumen
