#include "lumen/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lumen/errors.hpp"

namespace lumen {

std::string to_string(LayerKind kind) {
    return kind == LayerKind::convolution ? "convolution" : "fully_connected";
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::relu: return "relu";
        case Activation::sign: return "sign";
        case Activation::identity: return "identity";
    }
    return "relu";
}

std::string to_string(VDUKind kind) {
    switch (kind) {
        case VDUKind::conv_vdu: return "conv_vdu";
        case VDUKind::fc_vdu: return "fc_vdu";
        case VDUKind::bnn_vdu: return "bnn_vdu";
        case VDUKind::vcsel_vdu: return "vcsel_vdu";
    }
    return "fc_vdu";
}

LayerKind parse_layer_kind(const std::string& text) {
    if (text == "fully_connected" || text == "fc" || text == "dense") return LayerKind::fully_connected;
    if (text == "convolution" || text == "conv") return LayerKind::convolution;
    throw CapabilityError("unsupported layer kind '" + text + "'");
}

Activation parse_activation(const std::string& text) {
    if (text == "relu") return Activation::relu;
    if (text == "sign") return Activation::sign;
    if (text == "identity" || text == "none" || text == "linear") return Activation::identity;
    throw CapabilityError("unsupported activation '" + text + "'");
}

VDUKind parse_vdu_kind(const std::string& text) {
    if (text == "conv_vdu" || text == "conv") return VDUKind::conv_vdu;
    if (text == "fc_vdu" || text == "fc") return VDUKind::fc_vdu;
    if (text == "bnn_vdu" || text == "bnn") return VDUKind::bnn_vdu;
    if (text == "vcsel_vdu" || text == "vcsel") return VDUKind::vcsel_vdu;
    throw ConfigError("vdu", "unknown VDU kind '" + text + "'");
}

int LayerIR::rows() const {
    return kind == LayerKind::fully_connected ? out_features : conv.out_ch;
}

int LayerIR::fan_in() const {
    return kind == LayerKind::fully_connected ? in_features : conv.in_ch * conv.kh * conv.kw;
}

int LayerIR::patches() const {
    return kind == LayerKind::fully_connected ? 1 : conv.out_h() * conv.out_w();
}

int LayerIR::input_size() const {
    return kind == LayerKind::fully_connected ? in_features : conv.in_ch * conv.in_h * conv.in_w;
}

int LayerIR::output_size() const { return rows() * patches(); }

std::int64_t LayerIR::dense_macs() const {
    return static_cast<std::int64_t>(rows()) * patches() * fan_in();
}

void LayerIR::validate() const {
    auto fail = [this](const std::string& what) {
        throw ShapeError("layer '" + name + "': " + what);
    };
    if (kind == LayerKind::fully_connected) {
        if (in_features < 1 || out_features < 1) fail("fully connected dims must be positive");
    } else {
        const auto& c = conv;
        if (c.in_ch < 1 || c.out_ch < 1 || c.kh < 1 || c.kw < 1 || c.stride < 1 || c.in_h < 1 ||
            c.in_w < 1)
            fail("convolution dims must be positive");
        if (c.kh > c.in_h || c.kw > c.in_w) fail("kernel larger than input");
    }
    if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0,1)");
    if (weight_ref.count != 0 &&
        weight_ref.count != static_cast<std::size_t>(rows()) * static_cast<std::size_t>(fan_in()))
        fail("weight_ref count does not match layer dims");
    if (quant) quant->validate();
}

void im2col_patch(const LayerIR& layer, std::span<const double> input, int patch,
                  std::span<double> out) {
    if (layer.kind == LayerKind::fully_connected) {
        std::copy(input.begin(), input.end(), out.begin());
        return;
    }
    const auto& c = layer.conv;
    const int oy = patch / c.out_w();
    const int ox = patch % c.out_w();
    std::size_t k = 0;
    for (int ch = 0; ch < c.in_ch; ++ch)
        for (int ky = 0; ky < c.kh; ++ky)
            for (int kx = 0; kx < c.kw; ++kx) {
                const int y = oy * c.stride + ky;
                const int x = ox * c.stride + kx;
                out[k++] = input[(static_cast<std::size_t>(ch) * c.in_h + y) * c.in_w + x];
            }
}

std::int64_t CompressedMatrix::nonzeros() const {
    std::int64_t n = 0;
    for (const auto& row : payload) n += static_cast<std::int64_t>(row.size());
    return n;
}

std::int64_t CompressedMatrix::padding_slots() const {
    std::int64_t pad = 0;
    for (const auto& row : payload) {
        const auto len = static_cast<std::int64_t>(row.size());
        const std::int64_t chunks = (len + bank_width - 1) / bank_width;
        pad += chunks * bank_width - len;
    }
    return pad;
}

double CompressedMatrix::compression_ratio() const {
    const double dense = static_cast<double>(rows) * static_cast<double>(cols);
    return dense / static_cast<double>(std::max<std::int64_t>(nonzeros(), 1));
}

std::vector<double> CompressedMatrix::decompress() const {
    std::vector<double> dense(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
    for (int r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < payload[r].size(); ++i)
            dense[static_cast<std::size_t>(r) * cols + columns[r][i]] = payload[r][i];
    return dense;
}

CompressedMatrix compress_sparse(std::span<const double> weights, int rows, int cols,
                                 int bank_width) {
    if (rows < 0 || cols < 0 ||
        weights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw ShapeError("compress_sparse: weight count does not match rows x cols");
    if (bank_width < 1) throw ShapeError("compress_sparse: bank width must be >= 1");
    CompressedMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.bank_width = bank_width;
    m.payload.resize(rows);
    m.columns.resize(rows);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double v = weights[static_cast<std::size_t>(r) * cols + c];
            if (v == 0.0) continue;
            m.payload[r].push_back(v);
            m.columns[r].push_back(c);
        }
    }
    return m;
}

double BitSliceSchedule::slice_scale(int s) const {
    return std::ldexp(1.0, slice_width * s);
}

std::vector<std::int64_t> BitSliceSchedule::slice(std::int64_t magnitude) const {
    if (magnitude < 0) throw DomainError("bit slicing expects a magnitude >= 0");
    std::vector<std::int64_t> digits(static_cast<std::size_t>(slice_count));
    const std::int64_t mask = digit_max();
    for (int s = 0; s < slice_count; ++s) {
        digits[s] = magnitude & mask;
        magnitude >>= slice_width;
    }
    if (magnitude != 0) throw DomainError("magnitude does not fit the slice schedule");
    return digits;
}

BitSliceSchedule bit_slice_schedule(int parameter_bits, int hardware_bits) {
    if (parameter_bits < 1 || hardware_bits < 1)
        throw DomainError("parameter and hardware bits must be >= 1");
    if (hardware_bits > 32) throw DomainError("hardware bits must be <= 32");
    BitSliceSchedule s;
    s.slice_width = hardware_bits;
    s.slice_count = (parameter_bits + hardware_bits - 1) / hardware_bits;
    s.parameter_bits = parameter_bits;
    return s;
}

double reconstruct_sliced_dot(std::span<const double> slice_outputs, const BitSliceSchedule& schedule) {
    if (static_cast<int>(slice_outputs.size()) != schedule.slice_count) {
        std::ostringstream os;
        os << "expected " << schedule.slice_count << " slice outputs, got " << slice_outputs.size();
        throw ScheduleError(os.str());
    }
    double total = 0.0;
    for (int s = 0; s < schedule.slice_count; ++s) total += slice_outputs[s] * schedule.slice_scale(s);
    return total;
}

namespace {

void check_granularity(int granularity) {
    if (granularity < 1) throw ShapeError("granularity must be >= 1");
}

// Emits items row-major; chunks of one row are outside patches so a VDU can
// keep its weights across consecutive patches.
template <typename RowLength>
std::vector<WorkItem> emit_items(const LayerIR& layer, int granularity, bool packed,
                                 RowLength row_length) {
    std::vector<WorkItem> items;
    const int patches = layer.patches();
    for (int r = 0; r < layer.rows(); ++r) {
        const int len = row_length(r);
        for (int begin = 0; begin < len; begin += granularity) {
            const int chunk = std::min(granularity, len - begin);
            for (int p = 0; p < patches; ++p) {
                WorkItem w;
                w.accumulator = r * patches + p;
                w.row = r;
                w.patch = p;
                w.begin = begin;
                w.length = chunk;
                w.padded = granularity - chunk;
                w.packed = packed;
                items.push_back(w);
            }
        }
    }
    return items;
}

}  // namespace

std::vector<WorkItem> decompose_layer(const LayerIR& layer, int granularity) {
    check_granularity(granularity);
    layer.validate();
    auto items = emit_items(layer, granularity, false, [&](int) { return layer.fan_in(); });
    for (std::size_t i = 0; i < items.size(); ++i) items[i].time_step = static_cast<int>(i);
    return items;
}

std::int64_t Schedule::scheduled_macs() const {
    std::int64_t n = 0;
    for (const auto& w : items) n += w.length;
    return n;
}

std::int64_t Schedule::padded_slots() const {
    std::int64_t n = 0;
    for (const auto& w : items) n += w.padded;
    return n;
}

Schedule build_schedule(const LayerIR& layer, int granularity, int vdu_count,
                        const BitSliceSchedule& slicing, const CompressedMatrix* compressed) {
    check_granularity(granularity);
    if (vdu_count < 1) throw ShapeError("vdu_count must be >= 1");
    if (slicing.slice_count < 1) throw ScheduleError("slice count must be >= 1");
    layer.validate();
    std::vector<WorkItem> base;
    if (compressed != nullptr) {
        if (compressed->rows != layer.rows() || compressed->cols != layer.fan_in())
            throw ShapeError("compressed matrix does not match the layer");
        base = emit_items(layer, granularity, true, [&](int r) {
            return static_cast<int>(compressed->payload[r].size());
        });
    } else {
        base = emit_items(layer, granularity, false, [&](int) { return layer.fan_in(); });
    }

    Schedule s;
    s.granularity = granularity;
    s.vdu_count = vdu_count;
    s.slicing = slicing;
    s.dense_macs = layer.dense_macs();
    const int k = slicing.slice_count;
    s.items.reserve(base.size() * static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < base.size(); ++i) {
        const int round = static_cast<int>(i / static_cast<std::size_t>(vdu_count));
        const int vdu = static_cast<int>(i % static_cast<std::size_t>(vdu_count));
        for (int sl = 0; sl < k; ++sl) {
            WorkItem w = base[i];
            w.vdu = vdu;
            w.time_step = round * k + sl;
            if (k > 1) w.bit_slice = sl;
            s.items.push_back(w);
        }
    }
    const int rounds = static_cast<int>((base.size() + static_cast<std::size_t>(vdu_count) - 1) /
                                        static_cast<std::size_t>(vdu_count));
    s.time_steps = rounds * k;
    std::stable_sort(s.items.begin(), s.items.end(), [](const WorkItem& a, const WorkItem& b) {
        return a.time_step < b.time_step;
    });
    return s;
}

}  // namespace lumen
