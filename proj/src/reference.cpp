#include "lumen/reference.hpp"

#include "lumen/errors.hpp"

namespace lumen {

ReferenceOutput reference_layer(const DeployedLayer& layer, std::span<const double> input) {
    const auto& ir = layer.ir;
    if (static_cast<int>(input.size()) != ir.input_size())
        throw ShapeError("reference_layer: input size does not match layer '" + ir.name + "'");
    const QuantizedInput q = quantize_layer_input(input, layer.quant.activation_bits);
    std::vector<double> x(q.normalized.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = q.normalized[i] * q.scale;

    const int rows = ir.rows();
    const int fan_in = ir.fan_in();
    const int patches = ir.patches();
    std::vector<double> patch(static_cast<std::size_t>(fan_in));
    ReferenceOutput out;
    out.input_scale = q.scale;
    out.pre_activation.resize(static_cast<std::size_t>(rows) * patches);
    out.outputs.resize(out.pre_activation.size());
    for (int p = 0; p < patches; ++p) {
        im2col_patch(ir, x, p, patch);
        for (int r = 0; r < rows; ++r) {
            long double dot = 0.0L;
            const double* w = layer.weights.data() + static_cast<std::size_t>(r) * fan_in;
            for (int k = 0; k < fan_in; ++k) dot += static_cast<long double>(w[k]) * patch[k];
            const double v = layer.multiplier[r] * static_cast<double>(dot) + layer.shift[r] + layer.bias[r];
            const std::size_t o = static_cast<std::size_t>(r) * patches + p;
            out.pre_activation[o] = v;
            out.outputs[o] = apply_activation(ir.activation, v);
        }
    }
    return out;
}

std::vector<double> reference_forward(const DeployedModel& model, std::span<const double> input) {
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto r = reference_layer(model.layers[i], x);
        x = i + 1 == model.layers.size() ? std::move(r.pre_activation) : std::move(r.outputs);
    }
    return x;
}

double reference_accuracy(const DeployedModel& model, const std::vector<std::vector<double>>& inputs,
                          std::span<const int> labels) {
    if (inputs.size() != labels.size()) throw ShapeError("input and label counts differ");
    if (inputs.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (argmax(reference_forward(model, inputs[i])) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

}  // namespace lumen
