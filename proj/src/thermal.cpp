#include "lumen/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lumen/errors.hpp"

namespace lumen {

namespace {

void check_targets(std::span<const double> targets, const ThermalCouplingMatrix& k,
                   const TuningMechanism& mechanism) {
    if (static_cast<int>(targets.size()) != k.dimension())
        throw ShapeError("target count does not match coupling matrix dimension");
    for (double t : targets) {
        if (!(t >= 0.0)) throw DomainError("thermal targets must be >= 0");
        if (t > mechanism.max_shift_nm) {
            std::ostringstream os;
            os << "thermal target " << t << " nm exceeds max shift " << mechanism.max_shift_nm;
            throw RangeExceededError(os.str());
        }
    }
}

Eigen::VectorXd modal_solve(const ThermalCouplingMatrix::Eigenbasis& eb, const Eigen::VectorXd& rhs) {
    Eigen::VectorXd modal = eb.vectors.transpose() * rhs;
    modal.array() /= eb.values.array();
    return eb.vectors * modal;
}

// Modal solve plus two rounds of iterative refinement against K itself.
Eigen::VectorXd solve_in_eigenbasis(const ThermalCouplingMatrix& k, const Eigen::VectorXd& rhs) {
    const auto& eb = k.eigenbasis();
    Eigen::VectorXd x = modal_solve(eb, rhs);
    for (int round = 0; round < 2; ++round) x += modal_solve(eb, rhs - k.entries() * x);
    return x;
}

HeaterSolution finish(const ThermalCouplingMatrix& k, std::span<const double> targets,
                      const Eigen::VectorXd& raw_commands, double bias,
                      const TuningMechanism& mechanism) {
    const int n = k.dimension();
    HeaterSolution sol;
    sol.bias_nm = bias;
    sol.commands_nm.resize(n);
    sol.powers_mw.resize(n);
    for (int i = 0; i < n; ++i) {
        sol.commands_nm[i] = mechanism.quantize(raw_commands[i]);
        sol.powers_mw[i] = mechanism.power_per_nm_mw * sol.commands_nm[i];
    }
    const Eigen::Map<const Eigen::VectorXd> q(sol.commands_nm.data(), n);
    const Eigen::VectorXd achieved = k.entries() * q;
    sol.achieved_shifts_nm.assign(achieved.data(), achieved.data() + n);
    sol.residual_nm.resize(n);
    for (int i = 0; i < n; ++i) sol.residual_nm[i] = achieved[i] - (targets[i] + bias);
    sol.total_power_mw = mechanism.power_per_nm_mw *
                         std::accumulate(sol.commands_nm.begin(), sol.commands_nm.end(), 0.0);
    return sol;
}

}  // namespace

ThermalCouplingMatrix::ThermalCouplingMatrix(Eigen::MatrixXd entries, std::vector<double> positions_um,
                                             double decay_length_um)
    : entries_(std::move(entries)), positions_(std::move(positions_um)),
      decay_length_(decay_length_um) {
    if (entries_.rows() != entries_.cols()) throw ShapeError("coupling matrix must be square");
    const auto n = entries_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (entries_(i, i) != 1.0) throw DesignError("coupling matrix diagonal must be 1");
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = entries_(i, j);
            if (!(v >= 0.0 && v <= 1.0)) throw DesignError("coupling entries must lie in [0,1]");
            if (std::abs(v - entries_(j, i)) > 1e-12)
                throw DesignError("coupling matrix must be symmetric");
        }
    }
}

const ThermalCouplingMatrix::Eigenbasis& ThermalCouplingMatrix::eigenbasis() const {
    std::call_once(cache_->once, [this] {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(entries_);
        if (solver.info() != Eigen::Success) return;
        const Eigen::VectorXd& values = solver.eigenvalues();
        const double scale = values.size() ? std::max(1.0, values.cwiseAbs().maxCoeff()) : 1.0;
        cache_->positive_definite = values.size() == 0 || values.minCoeff() > 1e-12 * scale;
        cache_->basis = Eigenbasis{values, solver.eigenvectors()};
    });
    if (!cache_->basis || !cache_->positive_definite)
        throw DecompositionError("thermal coupling matrix is not positive definite");
    return *cache_->basis;
}

ThermalCouplingMatrix ThermalCouplingMatrix::restricted(std::span<const int> indices) const {
    const auto m = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd sub(m, m);
    std::vector<double> pos;
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = entries_(indices[a], indices[b]);
        if (!positions_.empty()) pos.push_back(positions_[indices[a]]);
    }
    return ThermalCouplingMatrix(std::move(sub), std::move(pos), decay_length_);
}

double HeaterSolution::residual_norm() const {
    double s = 0.0;
    for (double r : residual_nm) s += r * r;
    return std::sqrt(s);
}

ThermalCouplingMatrix build_coupling_matrix(std::span<const double> positions_um,
                                            double decay_length_um) {
    if (!(decay_length_um > 0.0)) throw DomainError("decay_length must be > 0");
    std::vector<double> sorted(positions_um.begin(), positions_um.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DegenerateLayoutError("heater positions must be distinct");
    const auto n = static_cast<Eigen::Index>(positions_um.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            k(i, j) = i == j ? 1.0
                             : std::exp(-std::abs(positions_um[i] - positions_um[j]) / decay_length_um);
    return ThermalCouplingMatrix(std::move(k),
                                 std::vector<double>(positions_um.begin(), positions_um.end()),
                                 decay_length_um);
}

std::vector<double> linear_layout(int count, double pitch_um) {
    std::vector<double> xs(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) xs[i] = pitch_um * i;
    return xs;
}

HeaterSolution ted_solve(const ThermalCouplingMatrix& coupling, std::span<const double> targets_nm,
                         const TuningMechanism& mechanism) {
    check_targets(targets_nm, coupling, mechanism);
    const int n = coupling.dimension();
    if (n == 0) return finish(coupling, targets_nm, Eigen::VectorXd(), 0.0, mechanism);
    (void)coupling.eigenbasis();  // throws when K is not positive definite

    const Eigen::Map<const Eigen::VectorXd> t(targets_nm.data(), n);
    Eigen::VectorXd s = solve_in_eigenbasis(coupling, t);

    // Heaters cannot cool: shift every target by the same b so that
    // s(b) = s + b * K^-1 1 >= 0. Feasible b form an interval; take the
    // smallest |b| in it.
    double bias = 0.0;
    if (s.minCoeff() < 0.0) {
        const Eigen::VectorXd g = solve_in_eigenbasis(coupling, Eigen::VectorXd::Ones(n));
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (g[i] > 0.0) lo = std::max(lo, -s[i] / g[i]);
            else if (g[i] < 0.0) hi = std::min(hi, -s[i] / g[i]);
            else if (s[i] < 0.0) lo = std::numeric_limits<double>::infinity();
        }
        if (!(lo <= hi)) throw RangeExceededError("no uniform bias makes all heater commands nonnegative");
        bias = std::clamp(0.0, lo, hi);
        s += bias * g;
        for (int i = 0; i < n; ++i) {
            if (s[i] < -1e-9) throw RangeExceededError("bias adjustment left a negative heater command");
            s[i] = std::max(s[i], 0.0);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (s[i] > mechanism.max_shift_nm) {
            std::ostringstream os;
            os << "bias-adjusted heater command " << s[i] << " nm exceeds max shift "
               << mechanism.max_shift_nm << " nm";
            throw RangeExceededError(os.str());
        }
    }
    return finish(coupling, targets_nm, s, bias, mechanism);
}

HeaterSolution naive_solve(const ThermalCouplingMatrix& coupling, std::span<const double> targets_nm,
                           const TuningMechanism& mechanism) {
    check_targets(targets_nm, coupling, mechanism);
    const int n = coupling.dimension();
    const Eigen::Map<const Eigen::VectorXd> t(targets_nm.data(), n);
    return finish(coupling, targets_nm, t, 0.0, mechanism);
}

double crosstalk_reduction(const HeaterSolution& naive, const HeaterSolution& ted) {
    const double rn = naive.residual_norm();
    const double rt = ted.residual_norm();
    if (rn == 0.0) {
        if (rt == 0.0) return 100.0;
        throw NotApplicableError("naive residual is zero (identity coupling); reduction undefined");
    }
    return 100.0 * (1.0 - rt / rn);
}

double tuning_power_reduction(const HeaterSolution& naive, const HeaterSolution& ted) {
    if (naive.total_power_mw == 0.0) return 0.0;
    return 100.0 * (1.0 - ted.total_power_mw / naive.total_power_mw);
}

}  // namespace lumen
