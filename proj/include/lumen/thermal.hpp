#pragma once

// Mutual thermal crosstalk among thermo-optic heaters in an MR bank, and
// eigenmode-based (TED) heater command solving that cancels it.
//
// Thermal action is expressed directly in resonance-shift units (nm): K[i][j]
// is the fraction of heater j's own shift that appears at MR i.

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lumen/device.hpp"

namespace lumen {

class ThermalCouplingMatrix {
public:
    ThermalCouplingMatrix() = default;
    /// Wraps an explicit coupling matrix (e.g. a measured one). Must be
    /// symmetric with unit diagonal.
    ThermalCouplingMatrix(Eigen::MatrixXd entries, std::vector<double> positions_um = {},
                          double decay_length_um = 0.0);

    [[nodiscard]] int dimension() const { return static_cast<int>(entries_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& entries() const { return entries_; }
    [[nodiscard]] double operator()(int i, int j) const { return entries_(i, j); }
    [[nodiscard]] const std::vector<double>& positions_um() const { return positions_; }
    [[nodiscard]] double decay_length_um() const { return decay_length_; }

    struct Eigenbasis {
        Eigen::VectorXd values;   // ascending
        Eigen::MatrixXd vectors;  // columns
    };
    /// Lazily computed, cached; safe for concurrent readers.
    /// Throws DecompositionError when K is not positive definite.
    [[nodiscard]] const Eigenbasis& eigenbasis() const;

    /// Principal submatrix over the given heater indices.
    [[nodiscard]] ThermalCouplingMatrix restricted(std::span<const int> indices) const;

private:
    struct Cache {
        std::once_flag once;
        std::optional<Eigenbasis> basis;
        bool positive_definite = false;
    };

    Eigen::MatrixXd entries_;
    std::vector<double> positions_;
    double decay_length_ = 0.0;
    std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

struct HeaterSolution {
    std::vector<double> commands_nm;       // per-heater shift commands after quantization
    std::vector<double> powers_mw;         // per heater
    std::vector<double> achieved_shifts_nm;
    std::vector<double> residual_nm;       // achieved - (target + bias)
    double bias_nm = 0.0;                  // uniform offset added to every target
    double total_power_mw = 0.0;

    [[nodiscard]] double residual_norm() const;
};

/// K[i][j] = exp(-|x_i - x_j| / decay_length).
ThermalCouplingMatrix build_coupling_matrix(std::span<const double> positions_um,
                                            double decay_length_um);

/// Equally spaced 1-D bank layout.
std::vector<double> linear_layout(int count, double pitch_um);

/// Solves K s = target in the eigenbasis of K, biasing all targets uniformly
/// when a command would otherwise be negative, then quantizes per actuator.
HeaterSolution ted_solve(const ThermalCouplingMatrix& coupling, std::span<const double> targets_nm,
                         const TuningMechanism& mechanism);

/// Baseline: every heater driven as if isolated.
HeaterSolution naive_solve(const ThermalCouplingMatrix& coupling, std::span<const double> targets_nm,
                           const TuningMechanism& mechanism);

/// 100 * (1 - |r_ted| / |r_naive|). Throws NotApplicableError when the naive
/// residual is zero but the TED residual is not.
double crosstalk_reduction(const HeaterSolution& naive, const HeaterSolution& ted);

/// 100 * (1 - P_ted / P_naive); 0 when both are zero.
double tuning_power_reduction(const HeaterSolution& naive, const HeaterSolution& ted);

}  // namespace lumen
