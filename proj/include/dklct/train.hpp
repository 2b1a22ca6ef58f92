#pragma once

// Training: L-BFGS with an adaptive step length, the standard-GP fit that
// provides the pre-training target, network pre-training and joint
// optimization of kernel and network parameters.

#include "dklct/gp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dklct {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LbfgsOptions {
    std::size_t max_iterations = 200;
    std::size_t memory = 10;
    double gradient_tolerance = 1e-5; ///< on the max-norm
    double relative_tolerance = 1e-9; ///< on the accepted cost change
    double initial_rate = 1.0;
    double max_rate = 1.0;
    double growth = 1.5;
    std::size_t growth_streak = 5;
    std::size_t max_halvings = 20;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double cost = 0.0;
    double gradient_norm = 0.0; ///< max-norm
    double rate = 0.0;
    std::size_t halvings = 0;
    bool grew = false;
    bool reset = false; ///< memory cleared after a failed search
};

enum class StopReason { gradient, cost_change, iteration_budget, stagnated };
const char* stop_reason_name(StopReason reason);

struct TrainReport {
    std::string phase;
    std::vector<IterationRecord> records; ///< record 0 is the starting point
    StopReason stop = StopReason::iteration_budget;
    bool stagnated = false;
    double seconds = 0.0;
    std::vector<double> final_parameters;

    std::size_t iterations() const noexcept { return records.empty() ? 0 : records.size() - 1; }
    double initial_cost() const { return records.front().cost; }
    double final_cost() const { return records.back().cost; }

    /// iteration,cost,grad_norm,lr,halvings,event
    void write_csv(std::ostream& os) const;
};

/// Returns the cost and writes the gradient into `grad` (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsResult {
    std::vector<double> x;
    TrainReport report;
};

/// Minimizes f from x0. Steps are rate·d for the L-BFGS direction d; a cost
/// increase halves the rate and retries, and the rate grows again after a
/// streak of steps accepted without halving. Exceptions thrown by f during
/// a trial step count as a cost increase.
LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double> x0, const LbfgsOptions& options,
                           std::string phase = "lbfgs");

/// Axis-aligned input box; pre-training points are a uniform grid over it.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
    std::size_t dims() const noexcept { return lo.size(); }
};

/// Uniform grid with `count` points in 1-D or round(count^(1/D)) per axis,
/// endpoints included. One point per row, last axis fastest.
Matrix grid_points(const Box& box, std::size_t count);

struct TrainConfig {
    CostKind cost = CostKind::nlml;
    std::size_t pretrain_points = 100;
    std::vector<std::size_t> widths{1, 5, 4, 1};
    std::size_t m_tilde = 48;    ///< basis size per latent dimension (deep kernel)
    std::size_t gp_m_tilde = 48; ///< basis size per input dimension (standard GP)
    double alpha = kDefaultCoverageAlpha;
    /// Lengthscale that fixes the Simpson node counts for the whole run.
    double node_lengthscale = 0.1353352832366127; // e^-2
    std::size_t max_nodes = 401;
    std::size_t floor_nodes = 31;
    std::vector<double> start_log_lengthscales{-2.0, -1.0, 0.0};
    std::vector<double> start_log_sigma_f{-1.0, 0.0};
    double start_noise_fraction = 0.01; ///< σ0 = fraction·std(y)
    LbfgsOptions gp_fit{.max_iterations = 100};
    LbfgsOptions pretrain{.max_iterations = 500, .gradient_tolerance = 1e-8, .relative_tolerance = 1e-12};
    LbfgsOptions joint{.max_iterations = 300};
    bool pretrain_enabled = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StandardGpFit {
    KernelHyperparameters hyp;
    double cost = 0.0;
    std::size_t best_start = 0;
    std::vector<TrainReport> reports; ///< one per start; diverged starts have no records
    Matrix points;                    ///< pre-training points, one per row
    std::vector<double> mean;         ///< f_t at `points`
};

/// Node counts used by every phase of a run.
std::vector<std::size_t> run_node_counts(std::span<const LineMeasurement> lines, const TrainConfig& config);

/// Identity-warp reduced-rank GP fitted from the multi-start grid; the best
/// final cost wins. Throws TrainingError if every start fails.
StandardGpFit fit_standard_gp(std::span<const LineMeasurement> lines, const Box& box, const TrainConfig& config);

struct PretrainResult {
    WarpNetwork net{std::vector<std::size_t>{1, 1}};
    double mse = 0.0;
    TrainReport report;
};

/// Least-squares fit of the network output to `targets` at `points` (rows),
/// starting from `net`. Targets are standardized and the scale is folded
/// back into the output layer.
PretrainResult pretrain_network(WarpNetwork net, const Matrix& points, std::span<const double> targets,
                                const TrainConfig& config);

struct JointResult {
    KernelHyperparameters hyp;
    WarpNetwork net{std::vector<std::size_t>{1, 1}};
    TrainReport report;
};

/// Initial latent hyperparameters for a warp: σ_f and σ carried over, the
/// latent lengthscale a quarter of the spread of u over `points`.
KernelHyperparameters latent_hyperparameters(const KernelHyperparameters& input_hyp, const WarpNetwork& net,
                                             const Matrix& points);

/// Minimizes the selected cost over all of θ. Never returns a higher cost
/// than the starting point.
JointResult joint_train(const LineGpProblem& problem, WarpNetwork net, KernelHyperparameters hyp,
                        const TrainConfig& config);

struct PipelineResult {
    StandardGpFit standard;
    PretrainResult pretrain;
    JointResult joint;
    ReducedRankSystem system;
    Prediction prediction;
};

/// Standard-GP fit, pre-training (unless disabled), joint training and the
/// posterior at `stars`. Failures are rethrown as TrainingError tagged with
/// the phase.
PipelineResult run_pipeline(std::span<const LineMeasurement> lines, const Matrix& stars, const Box& box,
                            const TrainConfig& config);
/// Same, continuing from an existing standard-GP fit of the same data.
PipelineResult run_pipeline(std::span<const LineMeasurement> lines, const Matrix& stars, StandardGpFit standard,
                            const TrainConfig& config);

void save_hyperparameters(const std::filesystem::path& path, const KernelHyperparameters& hyp);
KernelHyperparameters load_hyperparameters(const std::filesystem::path& path);

} // namespace dklct
