#include "n2sid/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace n2sid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

IdentifiedModel extract(const SolveResult& res, const OperatorSpec& spec, const IoRecord& ide1,
                        const PipelineConfig& cfg, LambdaPoint& point) {
    const auto svd = lowrank_svd(res);
    point.sigma = svd.sigma;

    const Index p = spec.outputs(), s = spec.window();
    // Shift invariance needs (s - 1) p rows; M2 needs one more state sample than the order.
    int cap = static_cast<int>(std::min<Index>((s - 1) * p, spec.columns() - 1));
    cap = std::min(cap, cfg.max_order);
    const int order = cfg.order > 0 ? cfg.order : std::min(select_order(svd.sigma, cfg.max_order), cap);
    point.order = order;

    switch (cfg.variant) {
        case Variant::m1:
            return compute_m1(svd, ToeplitzEstimates::from_decision(res.x, spec), ide1, order);
        case Variant::m2:
            return compute_m2(svd, ide1, order, cfg.m2_scaled);
        case Variant::m3:
            return compute_m3(svd, ToeplitzEstimates::from_decision(res.x, spec), ide1, order);
    }
    throw DimensionError("unknown variant");
}

}  // namespace

std::string to_string(Split s) { return s == Split::half ? "half" : "none"; }
std::string to_string(X0Policy p) { return p == X0Policy::zero ? "zero" : "ls"; }

Split parse_split(const std::string& name) {
    if (name == "none") return Split::none;
    if (name == "half") return Split::half;
    throw DimensionError("unknown split '" + name + "' (expected none or half)");
}

X0Policy parse_x0_policy(const std::string& name) {
    if (name == "zero") return X0Policy::zero;
    if (name == "ls" || name == "ls_estimate") return X0Policy::ls_estimate;
    throw DimensionError("unknown x0 policy '" + name + "' (expected zero or ls)");
}

void PipelineConfig::validate() const {
    require(s >= 2, "s must be at least 2");
    require(grid >= 1, "grid must have at least one point");
    require(lambda_min > 0.0 && lambda_min <= lambda_max && std::isfinite(lambda_max),
            "lambda range must satisfy 0 < lambda_min <= lambda_max");
    require(order >= 0, "order must be positive (or 0 for automatic selection)");
    require(max_order >= 1, "max_order must be at least 1");
    require(del >= 0, "del must be nonnegative");
    admm.validate();
}

std::vector<double> PipelineConfig::normalized_grid() const {
    return logspace(std::log10(lambda_min), std::log10(lambda_max), grid);
}

std::vector<double> PipelineConfig::lambda_grid(Index samples) const {
    require(samples >= 1, "sample count must be positive");
    auto out = normalized_grid();
    for (double& v : out) v *= static_cast<double>(samples);
    return out;
}

IoRecord preprocess(const IoRecord& rec, const PipelineConfig& cfg) {
    rec.validate();
    require(rec.samples() - cfg.del > cfg.s, "too few samples left after deleting the first del samples");
    IoRecord out = rec.slice(cfg.del, rec.samples() - cfg.del);
    if (cfg.detrend) {
        if (out.inputs() > 0) out.u.rowwise() -= out.u.colwise().mean();
        out.y.rowwise() -= out.y.colwise().mean();
    }
    if (cfg.scale_outputs) {
        for (Index i = 0; i < out.outputs(); ++i) {
            const double peak = out.y.col(i).cwiseAbs().maxCoeff();
            if (peak > 0.0) out.y.col(i) /= peak;
        }
    }
    return out;
}

std::pair<IoRecord, IoRecord> split_record(const IoRecord& rec, Split split) {
    if (split == Split::none) return {rec, rec};
    const Index first = (rec.samples() + 1) / 2;
    return {rec.slice(0, first), rec.slice(first, rec.samples() - first)};
}

Vector simulation_x0(const StateSpaceModel& model, const IoRecord& rec) {
    model.validate();
    const Index n = model.n(), p = model.p();
    const Matrix free = simulate(model, rec.u, Vector::Zero(n));
    Matrix basis(rec.samples() * p, n);
    Matrix block = model.C;
    for (Index k = 0; k < rec.samples(); ++k) {
        basis.middleRows(k * p, p) = block;
        block = block * model.A;
    }
    if (!basis.allFinite()) throw NumericalError("initial-state regressor overflowed");
    const Matrix resid = (rec.y - free).transpose();
    return least_squares(basis, Eigen::Map<const Vector>(resid.data(), resid.size())).X.col(0);
}

Matrix simulate_with_policy(const StateSpaceModel& model, const IoRecord& rec, X0Policy policy) {
    const Vector x0 = policy == X0Policy::zero ? Vector::Zero(model.n()) : simulation_x0(model, rec);
    return simulate(model, rec.u, x0);
}

double evaluate(const IdentifiedModel& model, const IoRecord& val, X0Policy policy) {
    val.validate();
    require(val.inputs() == model.model.m() && val.outputs() == model.model.p(),
            "validation record does not match model dimensions");
    return vaf(val.y, simulate_with_policy(model.model, val, policy));
}

double evaluate_prediction(const IdentifiedModel& model, const IoRecord& val, X0Policy policy) {
    val.validate();
    require(val.inputs() == model.observer.m() && val.outputs() == model.observer.p(),
            "validation record does not match model dimensions");
    const Vector x0 = policy == X0Policy::zero ? Vector::Zero(model.observer.n()) : estimate_x0(model.observer, val);
    return vaf(val.y, predict_observer(model.observer, val, x0));
}

std::vector<std::pair<double, double>> PipelineReport::J_curve() const {
    std::vector<std::pair<double, double>> out;
    for (const auto& pt : points) {
        out.emplace_back(pt.lambda_normalized, pt.failed ? std::numeric_limits<double>::quiet_NaN() : pt.J);
    }
    return out;
}

std::vector<double> PipelineReport::failures() const {
    std::vector<double> out;
    for (const auto& pt : points)
        if (pt.failed) out.push_back(pt.lambda);
    return out;
}

PipelineReport identify(const IoRecord& rec, const PipelineConfig& cfg) {
    cfg.validate();
    rec.validate();
    const auto t_start = Clock::now();

    const auto [ide1, ide2] = split_record(rec, cfg.split);
    require(ide1.samples() > cfg.s, "identification record must be longer than s");

    PipelineReport report;
    report.ide1_samples = ide1.samples();
    report.ide2_samples = ide2.samples();

    const auto spec = OperatorSpec::from_data(ide1.u, ide1.y, cfg.s);
    auto t0 = Clock::now();
    const SweepFactorization fact(spec);
    report.timings.factorization = seconds_since(t0);

    const auto grid = cfg.lambda_grid(ide1.samples());
    const auto normalized = cfg.normalized_grid();
    t0 = Clock::now();
    const auto solved = sweep(spec, ide1.y, grid, cfg.admm, fact, cfg.warm_start, cfg.threads);
    report.timings.sweep = seconds_since(t0);

    t0 = Clock::now();
    double best_J = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        LambdaPoint pt;
        pt.lambda = grid[k];
        pt.lambda_normalized = normalized[k];
        if (!solved[k].result) {
            pt.failed = true;
            pt.error = solved[k].error;
            report.points.push_back(std::move(pt));
            continue;
        }
        const SolveResult& res = *solved[k].result;
        pt.iterations = res.iterations;
        pt.converged = res.converged;
        pt.objective = res.objective;
        try {
            IdentifiedModel model = extract(res, spec, ide1, cfg, pt);
            model.lambda = grid[k];
            const Matrix yhat = simulate_with_policy(model.model, ide2, cfg.x0_policy);
            pt.J = (ide2.y - yhat).squaredNorm();
            if (!std::isfinite(pt.J)) throw NumericalError("J is not finite");
            if (pt.J < best_J) {
                best_J = pt.J;
                report.best = std::move(model);
                report.lambda_opt = grid[k];
                report.lambda_opt_normalized = normalized[k];
            }
        } catch (const NumericalError& e) {
            pt.failed = true;
            pt.error = e.what();
        }
        report.points.push_back(std::move(pt));
    }
    report.timings.extraction = seconds_since(t0);
    if (!std::isfinite(best_J)) {
        std::string msg = "every lambda grid point failed";
        if (!report.points.empty() && !report.points.front().error.empty()) msg += ": " + report.points.front().error;
        throw NumericalError(msg);
    }
    report.timings.total = seconds_since(t_start);
    return report;
}

PipelineReport identify_output_only(const Matrix& y, const PipelineConfig& cfg) {
    return identify(IoRecord{Matrix::Zero(y.rows(), 0), y}, cfg);
}

}  // namespace n2sid
