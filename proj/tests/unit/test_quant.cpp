#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "generators.hpp"
#include "lumen/errors.hpp"
#include "lumen/quant.hpp"

using namespace lumen;

namespace {

double sse(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Optimal 1-D two-cluster split: clusters are contiguous in sorted order.
double best_threshold_split(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t cut = 1; cut < v.size(); ++cut) {
        double total = 0.0;
        for (auto [lo, hi] : {std::pair{std::size_t{0}, cut}, std::pair{cut, v.size()}}) {
            const double mean = std::accumulate(v.begin() + lo, v.begin() + hi, 0.0) / (hi - lo);
            for (std::size_t i = lo; i < hi; ++i) total += (v[i] - mean) * (v[i] - mean);
        }
        best = std::min(best, total);
    }
    return best;
}

}  // namespace

TEST_SUITE("quant") {

TEST_CASE("one-bit quantizer is mid-rise") {
    const std::vector<double> v = {0.3, -0.7};
    const auto q = uniform_quantize(v, 1, 1.0);
    CHECK(q.values == std::vector<double>{1.0, -1.0});
    const std::vector<double> z = {0.0};
    CHECK(uniform_quantize(z, 1, 2.0).values[0] == 2.0);
}

TEST_CASE("mid-tread keeps zero") {
    const std::vector<double> z = {0.0, -0.0};
    for (int bits = 2; bits <= 16; ++bits) {
        const auto q = uniform_quantize(z, bits, 3.0);
        CHECK(q.values[0] == 0.0);
        CHECK(q.codes[1] == 0);
    }
}

TEST_CASE("property: idempotence and half-step error bound") {
    auto r = gen::rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const int bits = gen::integer(r, 2, 12);
        const double range = gen::uniform(r, 0.1, 10.0);
        const auto v = gen::vec(r, 32, -range, range);
        const auto q = uniform_quantize(v, bits, range);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(q.values[i] - v[i]) <= q.step / 2 + 1e-12);
        const auto again = uniform_quantize(q.values, bits, range);
        CHECK(again.values == q.values);
    }
}

TEST_CASE("quantizer errors") {
    const std::vector<double> bad = {1.0, std::nan("")};
    CHECK_THROWS_AS(uniform_quantize(bad, 8, 1.0), DataError);
    const std::vector<double> ok = {1.0};
    CHECK_THROWS_AS(uniform_quantize(ok, 0, 1.0), DomainError);
    CHECK_THROWS_AS(uniform_quantize(ok, 8, 0.0), DomainError);
}

TEST_CASE("unsigned quantizer covers the range") {
    const std::vector<double> v = {0.0, 0.5, 1.0, 2.0};
    const auto q = unsigned_quantize(v, 4, 1.0);
    CHECK(q.values[0] == 0.0);
    CHECK(q.values[2] == doctest::Approx(1.0));
    CHECK(q.values[3] == doctest::Approx(1.0));
    CHECK(std::abs(q.values[1] - 0.5) <= q.step / 2);
}

TEST_CASE("binarization and batch-norm folding") {
    const std::vector<double> w = {0.2, -0.1};
    const std::vector<double> one = {1.0}, zero = {0.0};
    const auto b = binarize_with_bn(w, one, zero);
    CHECK(b.signs == std::vector<double>{1.0, -1.0});
    CHECK(b.multiplier[0] == 1.0);
    CHECK(b.shift[0] == 0.0);
    const std::vector<double> signed_zero = {0.0, -0.0};
    CHECK(binarize_with_bn(signed_zero, one, zero).signs == std::vector<double>{1.0, 1.0});
    CHECK_THROWS_AS(binarize_with_bn(w, zero, zero), FoldError);
}

TEST_CASE("property: folded path equals batch norm after the dot product") {
    auto r = gen::rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = gen::integer(r, 1, 6), cols = gen::integer(r, 1, 12);
        const auto w = gen::vec(r, rows * cols, -1.0, 1.0);
        auto scale = gen::vec(r, rows, 0.1, 2.0);
        for (double& s : scale)
            if (gen::integer(r, 0, 1)) s = -s;
        const auto shift = gen::vec(r, rows, -1.0, 1.0);
        const auto x = gen::vec(r, cols, -1.0, 1.0);
        const auto b = binarize_with_bn(w, scale, shift);
        for (int o = 0; o < rows; ++o) {
            double dot = 0.0;
            for (int i = 0; i < cols; ++i) dot += (w[o * cols + i] >= 0.0 ? 1.0 : -1.0) * x[i];
            const double oracle = scale[o] * dot + shift[o];
            double folded = 0.0;
            for (int i = 0; i < cols; ++i) folded += b.signs[o * cols + i] * x[i];
            CHECK(b.multiplier[o] * folded + b.shift[o] == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("magnitude pruning") {
    const std::vector<double> w = {0.1, -0.5, 0.05, 0.9};
    CHECK(prune_magnitude(w, 0.5) == std::vector<double>{0.0, -0.5, 0.0, 0.9});
    CHECK(prune_magnitude(w, 0.0) == w);
    const std::vector<double> ties = {1.0, -1.0, 1.0, 2.0};
    CHECK(prune_magnitude(ties, 0.5) == std::vector<double>{0.0, 0.0, 1.0, 2.0});
    CHECK_THROWS_AS(prune_magnitude(w, 1.5), DomainError);
}

TEST_CASE("property: pruned sparsity is exactly floor(t n) / n") {
    auto r = gen::rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = gen::integer(r, 1, 300);
        auto w = gen::vec(r, n, -1.0, 1.0);
        for (double& v : w)
            if (v == 0.0) v = 0.5;
        const double t = gen::uniform(r, 0.0, 1.0);
        const auto p = prune_magnitude(w, t);
        CHECK(sparsity_of(p) == doctest::Approx(std::floor(t * n) / n));
        double kept_min = 1e9, dropped_max = 0.0;
        for (int i = 0; i < n; ++i) {
            if (p[i] == 0.0) dropped_max = std::max(dropped_max, std::abs(w[i]));
            else kept_min = std::min(kept_min, std::abs(w[i]));
        }
        CHECK(dropped_max <= kept_min);
    }
}

TEST_CASE("clustering examples") {
    const std::vector<double> v = {0.0, 0.0, 1.0, 1.0};
    const auto c = cluster_quantize(v, 2);
    CHECK(c.codebook == std::vector<double>{0.0, 1.0});
    CHECK(c.reconstruct() == v);
    CHECK(c.objective == 0.0);
    CHECK_THROWS_AS(cluster_quantize(v, 3), DegenerateClusterError);

    const std::vector<double> five = {0.3, -0.2, 0.3, 0.9, 0.1, -0.2};
    const auto exact = cluster_quantize(five, 4);
    CHECK(exact.objective == doctest::Approx(0.0));
    CHECK(exact.reconstruct() == five);
}

TEST_CASE("property: two clusters match the exhaustive threshold search") {
    auto r = gen::rng(34);
    for (int trial = 0; trial < 200; ++trial) {
        const auto v = gen::vec(r, 8, -1.0, 1.0);
        const auto c = cluster_quantize(v, 2);
        CHECK(c.objective == doctest::Approx(best_threshold_split(v)).epsilon(1e-9));
        CHECK(sse(c.reconstruct(), v) == doctest::Approx(c.objective).epsilon(1e-9));
    }
}

TEST_CASE("property: clustering beats a uniform grid with the same level count") {
    auto r = gen::rng(35);
    for (int trial = 0; trial < 50; ++trial) {
        auto v = gen::vec(r, 200, -1.0, 1.0);
        for (double& x : v) x = x * x * x;
        double range = 0.0;
        for (double x : v) range = std::max(range, std::abs(x));
        const auto u = uniform_quantize(v, 3, range);
        const auto c = cluster_quantize(v, 7);
        CHECK(c.objective <= sse(u.values, v) + 1e-12);
    }
}

TEST_CASE("quant spec validation") {
    QuantSpec s;
    CHECK_NOTHROW(s.validate());
    s.scheme = QuantScheme::cluster;
    CHECK_THROWS(s.validate());
    s.cluster_count = 16;
    CHECK_NOTHROW(s.validate());
    CHECK(parse_quant_scheme("binary_weights") == QuantScheme::binary_weights);
    CHECK(to_string(QuantScheme::cluster) == "cluster");
}

}
