#pragma once

// Small trainers that produce the desk-scale models used by the harness:
// a float MLP, a binarized MLP with a learned per-output affine, and a
// prune + cluster recovery pass.

#include <cstdint>
#include <vector>

#include "lumen/arch_sim.hpp"
#include "lumen/digits.hpp"

namespace lumen {

struct TrainOptions {
    int epochs = 30;
    int batch = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

/// Fully connected ReLU network with bias; last layer is linear.
Model train_mlp(const Dataset& data, const std::vector<int>& widths, const TrainOptions& options);

/// Sign weights and sign activations trained through straight-through
/// estimators; every layer carries a learned affine (bn_scale, bn_shift).
/// Inputs are seen through the same `activation_bits` quantizer used at
/// inference time.
Model train_bnn(const Dataset& data, const std::vector<int>& widths, int activation_bits,
                const TrainOptions& options);

/// Zeroes the smallest `sparsity` fraction of each layer, retrains the
/// survivors with the mask held, and marks the model for `cluster_bits`-bit
/// weight sharing.
Model prune_and_recover(const Model& model, const Dataset& data, double sparsity, int cluster_bits,
                        const TrainOptions& options);

/// Unquantized forward pass (float MLPs and BNNs alike).
std::vector<double> float_forward(const Model& model, const std::vector<double>& input);
double evaluate_float(const Model& model, const Dataset& data);

}  // namespace lumen
