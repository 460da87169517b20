#pragma once

// Lowering of DNN layers onto fixed-width vector-dot-product units: work
// decomposition, sparse-row compression and bit-sliced scheduling.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lumen/quant.hpp"

namespace lumen {

enum class LayerKind { fully_connected, convolution };
enum class Activation { relu, sign, identity };
enum class VDUKind { conv_vdu, fc_vdu, bnn_vdu, vcsel_vdu };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
std::string to_string(VDUKind kind);
LayerKind parse_layer_kind(const std::string& text);
Activation parse_activation(const std::string& text);
VDUKind parse_vdu_kind(const std::string& text);

struct ConvShape {
    int in_ch = 1;
    int out_ch = 1;
    int kh = 1;
    int kw = 1;
    int stride = 1;
    int in_h = 1;
    int in_w = 1;

    [[nodiscard]] int out_h() const { return (in_h - kh) / stride + 1; }
    [[nodiscard]] int out_w() const { return (in_w - kw) / stride + 1; }
};

struct WeightRef {
    std::size_t offset = 0;  // first record index in the weight blob
    std::size_t count = 0;   // number of weight values
};

struct LayerIR {
    std::string name;
    LayerKind kind = LayerKind::fully_connected;
    int in_features = 0;   // fully connected
    int out_features = 0;  // fully connected
    ConvShape conv;        // convolution; input is CHW, no padding
    Activation activation = Activation::relu;
    std::optional<QuantSpec> quant;  // overrides the model-wide spec
    double sparsity = 0.0;
    bool has_bias = false;
    bool has_bn = false;
    std::optional<VDUKind> vdu;  // explicit VDU placement
    WeightRef weight_ref;

    /// Output dot products per patch (FC outputs or conv output channels).
    [[nodiscard]] int rows() const;
    /// Dot product length.
    [[nodiscard]] int fan_in() const;
    /// Patch positions (1 for FC).
    [[nodiscard]] int patches() const;
    [[nodiscard]] int input_size() const;
    [[nodiscard]] int output_size() const;
    [[nodiscard]] std::int64_t dense_macs() const;
    void validate() const;
};

/// Gathers the im2col patch `patch` of a CHW input, ordered (channel, ky, kx).
void im2col_patch(const LayerIR& layer, std::span<const double> input, int patch,
                  std::span<double> out);

struct WorkItem {
    int accumulator = 0;  // flat output index: row * patches + patch
    int row = 0;
    int patch = 0;
    int begin = 0;   // offset into the (possibly packed) weight row
    int length = 0;  // <= granularity
    int padded = 0;  // idle, power-gated slots in the bank
    int time_step = 0;
    int vdu = 0;
    std::optional<int> bit_slice;
    bool packed = false;  // begin/length index the compressed payload
};

/// Row-wise packing of nonzeros with a column map.
struct CompressedMatrix {
    int rows = 0;
    int cols = 0;
    int bank_width = 1;
    std::vector<std::vector<double>> payload;
    std::vector<std::vector<int>> columns;

    [[nodiscard]] std::int64_t nonzeros() const;
    /// Idle bank slots left after packing each row into bank-width chunks.
    [[nodiscard]] std::int64_t padding_slots() const;
    /// Dense element count over stored payload count (>= 1).
    [[nodiscard]] double compression_ratio() const;
    [[nodiscard]] std::vector<double> decompress() const;
};

CompressedMatrix compress_sparse(std::span<const double> weights, int rows, int cols,
                                 int bank_width = 1);

/// Unsigned weight-magnitude digits, LSB first; sign rides the rail.
struct BitSliceSchedule {
    int slice_width = 16;  // m
    int slice_count = 1;   // k
    int parameter_bits = 16;

    [[nodiscard]] std::int64_t digit_max() const { return (std::int64_t{1} << slice_width) - 1; }
    [[nodiscard]] double slice_scale(int s) const;
    /// Digits of |value|, LSB first.
    [[nodiscard]] std::vector<std::int64_t> slice(std::int64_t magnitude) const;
};

BitSliceSchedule bit_slice_schedule(int parameter_bits, int hardware_bits);

/// sum_s outputs[s] * 2^(m s).
double reconstruct_sliced_dot(std::span<const double> slice_outputs, const BitSliceSchedule& schedule);

/// Dense decomposition: ceil(fan_in / G) items per (row, patch), emitted
/// row-major with chunks outside patches. Time steps assume one VDU.
std::vector<WorkItem> decompose_layer(const LayerIR& layer, int granularity);

struct Schedule {
    std::vector<WorkItem> items;
    int time_steps = 0;
    int granularity = 1;
    int vdu_count = 1;
    BitSliceSchedule slicing;
    std::int64_t dense_macs = 0;

    [[nodiscard]] std::int64_t scheduled_macs() const;
    [[nodiscard]] std::int64_t padded_slots() const;
};

/// Full schedule: items (packed when `compressed` is given) dealt round-robin
/// to `vdu_count` VDUs; each round expands into k consecutive slice steps on
/// the same devices.
Schedule build_schedule(const LayerIR& layer, int granularity, int vdu_count,
                        const BitSliceSchedule& slicing,
                        const CompressedMatrix* compressed = nullptr);

}  // namespace lumen
