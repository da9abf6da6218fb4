#pragma once

#include <optional>
#include <string>
#include <vector>

#include "n2sid/admm.hpp"
#include "n2sid/extraction.hpp"
#include "n2sid/model.hpp"

namespace n2sid {

enum class Split { none, half };
enum class X0Policy { zero, ls_estimate };

std::string to_string(Split s);
std::string to_string(X0Policy p);
Split parse_split(const std::string& name);
X0Policy parse_x0_policy(const std::string& name);

struct PipelineConfig {
    Index s = 15;
    // The grid bounds apply to the per-sample weight lambda / N_ide; the solver sees lambda itself.
    double lambda_min = 0.031622776601683794;  // 10^-1.5
    double lambda_max = 1000.0;
    int grid = 20;
    Variant variant = Variant::m1;
    int order = 0;  //!< 0 selects the order automatically per lambda
    int max_order = 10;
    Split split = Split::none;
    Index del = 0;
    bool detrend = true;
    bool scale_outputs = false;
    X0Policy x0_policy = X0Policy::ls_estimate;
    bool m2_scaled = false;
    AdmmParams admm;
    bool warm_start = true;
    unsigned threads = 1;  //!< workers for cold-start sweeps

    void validate() const;
    /// logspace(log10 lambda_min, log10 lambda_max, grid), i.e. the grid of lambda / N_ide.
    [[nodiscard]] std::vector<double> normalized_grid() const;
    /// normalized_grid() scaled by the identification length.
    [[nodiscard]] std::vector<double> lambda_grid(Index samples) const;
};

/// Drops the first `del` samples, removes per-channel means and optionally scales each output
/// to unit max-abs.
IoRecord preprocess(const IoRecord& rec, const PipelineConfig& cfg);

/// (ide-1, ide-2). With Split::half the first part gets the extra sample of an odd record.
std::pair<IoRecord, IoRecord> split_record(const IoRecord& rec, Split split);

/// Initial state minimizing the simulation error of `model` on rec.
Vector simulation_x0(const StateSpaceModel& model, const IoRecord& rec);

/// Simulated output with the initial state chosen by `policy`.
Matrix simulate_with_policy(const StateSpaceModel& model, const IoRecord& rec, X0Policy policy);

/// VAF of the simulated output on a validation record.
double evaluate(const IdentifiedModel& model, const IoRecord& val, X0Policy policy);

/// VAF of the one-step observer prediction, x0 fitted or zero per policy.
double evaluate_prediction(const IdentifiedModel& model, const IoRecord& val, X0Policy policy);

struct LambdaPoint {
    double lambda = 0.0;             //!< weight passed to the solver
    double lambda_normalized = 0.0;  //!< lambda / N_ide
    bool failed = false;
    std::string error;
    double J = 0.0;  //!< sum of squared simulation errors on ide-2
    Vector sigma;
    int order = 0;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};

struct Timings {
    double factorization = 0.0;
    double sweep = 0.0;
    double extraction = 0.0;
    double total = 0.0;
};

struct PipelineReport {
    IdentifiedModel best;
    double lambda_opt = 0.0;
    double lambda_opt_normalized = 0.0;
    std::vector<LambdaPoint> points;
    std::optional<double> vaf_validation;
    Timings timings;
    Index ide1_samples = 0;
    Index ide2_samples = 0;

    /// (lambda / N_ide, J) per grid point, NaN where the point failed.
    [[nodiscard]] std::vector<std::pair<double, double>> J_curve() const;
    [[nodiscard]] std::vector<double> failures() const;
};

/// Full lambda search on an already preprocessed record. Throws NumericalError if every grid
/// point fails.
PipelineReport identify(const IoRecord& rec, const PipelineConfig& cfg);

/// Same search for output-only data: the input Toeplitz term is absent and the model has m = 0.
PipelineReport identify_output_only(const Matrix& y, const PipelineConfig& cfg);

}  // namespace n2sid
