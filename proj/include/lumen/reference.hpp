#pragma once

// Dense digital forward pass over a deployed model. Uses the same weight and
// activation quantization as the photonic path but exact accumulation, so it
// is the oracle the analog execution is checked against.

#include <span>
#include <vector>

#include "lumen/arch_sim.hpp"

namespace lumen {

struct ReferenceOutput {
    std::vector<double> pre_activation;
    std::vector<double> outputs;
    double input_scale = 0.0;
};

ReferenceOutput reference_layer(const DeployedLayer& layer, std::span<const double> input);

/// Logits of the last layer (pre-activation).
std::vector<double> reference_forward(const DeployedModel& model, std::span<const double> input);

/// Fraction of inputs whose reference argmax equals the label.
double reference_accuracy(const DeployedModel& model, const std::vector<std::vector<double>>& inputs,
                          std::span<const int> labels);

}  // namespace lumen
