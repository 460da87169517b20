#include <cmath>
#include <numeric>

#include "doctest.h"
#include "generators.hpp"
#include "lumen/errors.hpp"
#include "lumen/mapper.hpp"

using namespace lumen;

namespace {

LayerIR fc(int in, int out) {
    LayerIR l;
    l.name = "fc";
    l.in_features = in;
    l.out_features = out;
    return l;
}

LayerIR conv(int in_ch, int out_ch, int k, int h, int w, int stride = 1) {
    LayerIR l;
    l.name = "conv";
    l.kind = LayerKind::convolution;
    l.conv = {in_ch, out_ch, k, k, stride, h, w};
    return l;
}

}  // namespace

TEST_SUITE("mapper") {

TEST_CASE("decomposition counts") {
    const auto items = decompose_layer(fc(4, 3), 2);
    CHECK(items.size() == 6);
    for (const auto& w : items) CHECK(w.length == 2);

    const auto small = decompose_layer(fc(3, 5), 8);
    CHECK(small.size() == 5);
    CHECK(small[0].padded == 5);

    const auto c = decompose_layer(conv(1, 1, 3, 4, 4), 16);
    CHECK(c.size() == 4);
    for (const auto& w : c) CHECK(w.length == 9);

    CHECK_THROWS_AS(decompose_layer(fc(0, 3), 2), ShapeError);
}

TEST_CASE("property: decomposition conserves MACs") {
    auto r = gen::rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const LayerIR layer = trial % 2 ? fc(gen::integer(r, 1, 300), gen::integer(r, 1, 40))
                                        : conv(gen::integer(r, 1, 4), gen::integer(r, 1, 6),
                                               gen::integer(r, 1, 3), gen::integer(r, 3, 9),
                                               gen::integer(r, 3, 9), gen::integer(r, 1, 2));
        const int g = gen::integer(r, 1, 64);
        const auto items = decompose_layer(layer, g);
        std::int64_t macs = 0;
        for (const auto& w : items) {
            CHECK(w.length <= g);
            CHECK(w.length + w.padded == g);
            macs += w.length;
        }
        CHECK(macs == layer.dense_macs());
        const auto per = static_cast<std::size_t>((layer.fan_in() + g - 1) / g);
        CHECK(items.size() == per * layer.rows() * layer.patches());
    }
}

TEST_CASE("im2col gathers channel-major patches") {
    const auto layer = conv(2, 1, 2, 3, 3);
    std::vector<double> input(18);
    std::iota(input.begin(), input.end(), 0.0);
    std::vector<double> patch(8);
    im2col_patch(layer, input, 3, patch);  // output row 1, col 1
    CHECK(patch == std::vector<double>{4, 5, 7, 8, 13, 14, 16, 17});
}

TEST_CASE("sparse compression") {
    const std::vector<double> w = {0, 2, 3, 0};
    const auto c = compress_sparse(w, 2, 2);
    CHECK(c.payload[0] == std::vector<double>{2});
    CHECK(c.payload[1] == std::vector<double>{3});
    CHECK(c.columns[0] == std::vector<int>{1});
    CHECK(c.columns[1] == std::vector<int>{0});
    CHECK(c.decompress() == w);

    const std::vector<double> zero_row = {0, 0, 1, 2};
    const auto z = compress_sparse(zero_row, 2, 2, 2);
    CHECK(z.payload[0].empty());
    CHECK(z.padding_slots() == 0);
}

TEST_CASE("property: compression round trip and MAC savings") {
    auto r = gen::rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 16, cols = 16, g = gen::integer(r, 1, 16);
        auto w = gen::vec(r, rows * cols, -1.0, 1.0);
        int zeros = 0;
        for (double& v : w)
            if (gen::uniform(r, 0.0, 1.0) < 0.471) {
                v = 0.0;
                ++zeros;
            }
        const auto c = compress_sparse(w, rows, cols, g);
        CHECK(c.decompress() == w);
        CHECK(c.nonzeros() == rows * cols - zeros);

        auto layer = fc(cols, rows);
        const auto s = build_schedule(layer, g, 1, bit_slice_schedule(16, 16), &c);
        const auto dense = build_schedule(layer, g, 1, bit_slice_schedule(16, 16));
        CHECK(s.scheduled_macs() == c.nonzeros());
        CHECK(s.scheduled_macs() + s.padded_slots() == c.nonzeros() + c.padding_slots());
        CHECK(s.scheduled_macs() <= dense.scheduled_macs());
        CHECK(s.time_steps <= dense.time_steps);
    }
}

TEST_CASE("bit slicing") {
    const auto s = bit_slice_schedule(8, 4);
    CHECK(s.slice_count == 2);
    CHECK(bit_slice_schedule(6, 8).slice_count == 1);
    const auto two = bit_slice_schedule(4, 2);
    CHECK(two.slice(13) == std::vector<std::int64_t>{1, 3});
    const std::vector<double> outs = {2.0, 6.0};
    CHECK(reconstruct_sliced_dot(outs, two) == 26.0);
    const std::vector<double> zeros = {0.0, 0.0};
    CHECK(reconstruct_sliced_dot(zeros, two) == 0.0);
    const std::vector<double> one = {5.5};
    CHECK_THROWS_AS(reconstruct_sliced_dot(one, two), ScheduleError);
    const std::vector<double> ident = {3.25};
    CHECK(reconstruct_sliced_dot(ident, bit_slice_schedule(6, 8)) == 3.25);
}

TEST_CASE("property: slicing is complete and dot products are conserved") {
    auto r = gen::rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        const int pbits = gen::integer(r, 1, 16), hbits = gen::integer(r, 1, 8);
        const auto sched = bit_slice_schedule(pbits, hbits);
        const int n = gen::integer(r, 1, 16);
        const auto w = gen::ints(r, n, 0, (std::int64_t{1} << pbits) - 1);
        const auto x = gen::ints(r, n, -50, 50);
        std::int64_t oracle = 0;
        std::vector<double> outs(sched.slice_count, 0.0);
        for (int i = 0; i < n; ++i) {
            oracle += w[i] * x[i];
            const auto digits = sched.slice(w[i]);
            std::int64_t back = 0;
            for (int s = 0; s < sched.slice_count; ++s) {
                CHECK(digits[s] <= sched.digit_max());
                back += digits[s] * static_cast<std::int64_t>(sched.slice_scale(s));
                outs[s] += static_cast<double>(digits[s] * x[i]);
            }
            CHECK(back == w[i]);
        }
        CHECK(reconstruct_sliced_dot(outs, sched) == static_cast<double>(oracle));
    }
}

TEST_CASE("schedule spreads rounds over VDUs and slices") {
    const auto layer = fc(8, 6);
    const auto s = build_schedule(layer, 4, 3, bit_slice_schedule(8, 4));
    // 12 chunks over 3 VDUs -> 4 rounds, each repeated for 2 slices.
    CHECK(s.time_steps == 8);
    CHECK(s.items.size() == 24);
    CHECK_THROWS(build_schedule(layer, 0, 1, bit_slice_schedule(8, 4)));
}

}
