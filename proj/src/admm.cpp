#include "n2sid/admm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <Eigen/SVD>

namespace n2sid {

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

}  // namespace

double QuadraticTerm::value(const DecisionVector& x) const {
    return lambda / static_cast<double>(samples) * (x.yhat - a.yhat).squaredNorm();
}

QuadraticTerm build_quadratic(const Matrix& y, double lambda, const OperatorSpec& spec) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DimensionError("lambda must be a finite nonnegative number");
    }
    require(y.rows() == spec.samples() && y.cols() == spec.outputs(), "measured outputs do not match spec");
    QuadraticTerm q;
    q.lambda = lambda;
    q.samples = spec.samples();
    q.a = DecisionVector::zeros(spec);
    for (Index i = 0; i < spec.outputs(); ++i) q.a.yhat.segment(i * spec.samples(), spec.samples()) = y.col(i);
    return q;
}

void AdmmParams::validate() const {
    require(max_iter > 0, "max_iter must be positive");
    require(eps_abs > 0.0 && eps_rel > 0.0, "tolerances must be positive");
    require(tau > 1.0 && mu > 1.0, "tau and mu must exceed 1");
    require(rho0 > 0.0, "rho0 must be positive");
}

// ---- factorization ----------------------------------------------------------

SweepFactorization::SweepFactorization(const OperatorSpec& spec)
    : SweepFactorization(build_M(spec), spec.samples()) {}

SweepFactorization::SweepFactorization(Matrix M, Index samples) : M_(std::move(M)), samples_(samples) {
    require(M_.rows() == M_.cols() && samples_ <= M_.rows(), "coefficient matrix has wrong shape");
    const Index d = M_.rows();

    alpha_ = std::max(1.0, M_.diagonal().maxCoeff());
    Matrix B = M_;
    B.diagonal().head(samples_).array() += alpha_;

    const Eigen::SelfAdjointEigenSolver<Matrix> eb(B);
    if (eb.info() != Eigen::Success) throw NumericalError("eigendecomposition of M + alpha E failed");
    const Vector& lb = eb.eigenvalues();
    const double floor = 1e-12 * lb.cwiseAbs().maxCoeff();
    Index first = 0;
    while (first < d && lb(first) <= floor) ++first;
    const Index r = d - first;

    const Matrix S = eb.eigenvectors().rightCols(r) * lb.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
    const Matrix reduced = S.transpose() * M_ * S;
    const Eigen::SelfAdjointEigenSolver<Matrix> em(0.5 * (reduced + reduced.transpose()));
    if (em.info() != Eigen::Success) throw NumericalError("eigendecomposition of reduced M failed");

    T_ = S * em.eigenvectors();
    gamma_ = em.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
}

Vector SweepFactorization::solve(double fit_weight, double rho, const Vector& rhs) const {
    require(rhs.size() == M_.rows(), "right-hand side has wrong length");
    const double c = fit_weight / alpha_;
    const Vector denom = (c * (1.0 - gamma_.array()) + rho * gamma_.array()).matrix();
    const double cutoff = 1e-12 * std::max(denom.maxCoeff(), 0.0);
    Vector proj = T_.transpose() * rhs;
    for (Index k = 0; k < proj.size(); ++k) proj(k) = denom(k) > cutoff ? proj(k) / denom(k) : 0.0;
    Vector x = T_ * proj;
    if (!x.allFinite()) throw NumericalError("x-update produced non-finite values");
    return x;
}

Matrix SweepFactorization::reconstruct() const {
    Matrix B = M_;
    B.diagonal().head(samples_).array() += alpha_;
    const Matrix BT = B * T_;
    return BT * gamma_.asDiagonal() * BT.transpose();
}

// ---- proximal step ----------------------------------------------------------

Matrix svt(const Matrix& Y, double threshold) {
    require(threshold >= 0.0, "svt threshold must be nonnegative");
    if (threshold == 0.0 || Y.size() == 0) return Y;
    Eigen::BDCSVD<Matrix> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD failed in singular value thresholding");
    const Vector shrunk = (svd.singularValues().array() - threshold).cwiseMax(0.0).matrix();
    Index rank = 0;
    while (rank < shrunk.size() && shrunk(rank) > 0.0) ++rank;
    return svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
}

double nuclear_norm(const Matrix& Y) {
    if (Y.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(Y);
    return svd.singularValues().sum();
}

double objective(const OperatorSpec& spec, const QuadraticTerm& quad, const DecisionVector& x) {
    return nuclear_norm(apply_operator(x, spec)) + quad.value(x);
}

// ---- ADMM --------------------------------------------------------------------

SolveResult solve(const OperatorSpec& spec, const QuadraticTerm& quad, const AdmmParams& params,
                  const SweepFactorization& fact, const WarmStart* warm) {
    params.validate();
    quad.a.check(spec);
    require(fact.M().rows() == spec.block_size(), "factorization does not match spec");

    const Index p = spec.outputs();
    const double c = quad.weight();
    const double sqrt_dim_z = std::sqrt(static_cast<double>(spec.rows() * spec.columns()));
    const double sqrt_dim_x = std::sqrt(static_cast<double>(spec.decision_size()));

    SolveResult st;
    if (warm != nullptr) {
        warm->x.check(spec);
        st.x = warm->x;
        st.Z = warm->Z;
        st.dual = warm->dual;
        st.rho = std::clamp(warm->rho, kRhoMin, kRhoMax);
    } else {
        st.x = quad.a;
        st.Z = apply_operator(st.x, spec);
        st.dual = Matrix::Zero(spec.rows(), spec.columns());
        st.rho = params.rho0;
    }

    Matrix Ax;
    for (int it = 1; it <= params.max_iter; ++it) {
        // x-update: (H + rho M) x = H a + A_adj(rho Z - Y), one block per output.
        const DecisionVector back = apply_adjoint(st.rho * st.Z - st.dual, spec);
        DecisionVector hy = DecisionVector::zeros(spec);
        hy.yhat = c * quad.a.yhat;
        for (Index i = 0; i < p; ++i) {
            const Vector rhs = hy.output_block(spec, i) + back.output_block(spec, i);
            st.x.set_output_block(spec, i, fact.solve(c, st.rho, rhs));
        }

        Ax = apply_operator(st.x, spec);
        const Matrix Zold = st.Z;
        st.Z = svt(Ax + st.dual / st.rho, 1.0 / st.rho);
        const Matrix r = Ax - st.Z;
        st.dual += st.rho * r;
        if (!st.dual.allFinite() || !st.Z.allFinite()) {
            throw NumericalError("ADMM iterates became non-finite at iteration " + std::to_string(it));
        }

        st.iterations = it;
        st.primal_res = r.norm();
        st.dual_res = st.rho * apply_adjoint(st.Z - Zold, spec).stacked().norm();
        const double eps_pri = sqrt_dim_z * params.eps_abs + params.eps_rel * std::max(Ax.norm(), st.Z.norm());
        const double eps_dual =
            sqrt_dim_x * params.eps_abs + params.eps_rel * apply_adjoint(st.dual, spec).stacked().norm();
        if (st.primal_res <= eps_pri && st.dual_res <= eps_dual) {
            st.converged = true;
            break;
        }

        if (params.adapt_penalty) {
            if (st.primal_res > params.mu * st.dual_res) {
                st.rho = std::min(st.rho * params.tau, kRhoMax);
            } else if (st.dual_res > params.mu * st.primal_res) {
                st.rho = std::max(st.rho / params.tau, kRhoMin);
            }
        }
    }

    st.objective = nuclear_norm(Ax) + quad.value(st.x);
    if (!std::isfinite(st.objective)) throw NumericalError("ADMM objective is not finite");
    return st;
}

std::vector<SweepPoint> sweep(const OperatorSpec& spec, const Matrix& y, const std::vector<double>& grid,
                              const AdmmParams& params, const SweepFactorization& fact, bool warm_start,
                              unsigned threads) {
    require(!grid.empty(), "lambda grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        require(grid[k] > 0.0 && std::isfinite(grid[k]), "lambda grid must be strictly positive");
        require(k == 0 || grid[k] > grid[k - 1], "lambda grid must be ascending");
    }

    std::vector<SweepPoint> points(grid.size());
    const auto run_point = [&](std::size_t k, const WarmStart* warm) {
        points[k].lambda = grid[k];
        try {
            points[k].result = solve(spec, build_quadratic(y, grid[k], spec), params, fact, warm);
        } catch (const NumericalError& e) {
            points[k].error = e.what();
        }
    };

    if (warm_start) {
        std::optional<WarmStart> warm;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            run_point(k, warm ? &*warm : nullptr);
            if (points[k].result) {
                const SolveResult& r = *points[k].result;
                warm = WarmStart{r.x, r.Z, r.dual, r.rho};
            }
        }
        return points;
    }

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.size())));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next++; k < grid.size(); k = next++) run_point(k, nullptr);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return points;
}

std::vector<double> logspace(double lo_exponent, double hi_exponent, int count) {
    require(count >= 1, "grid size must be positive");
    require(lo_exponent <= hi_exponent, "grid exponents must be ordered");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double e = count == 1 ? hi_exponent
                                    : lo_exponent + (hi_exponent - lo_exponent) * k / (count - 1.0);
        out[static_cast<std::size_t>(k)] = std::pow(10.0, e);
    }
    // Endpoints exactly as powers of ten.
    out.front() = std::pow(10.0, count == 1 ? hi_exponent : lo_exponent);
    out.back() = std::pow(10.0, hi_exponent);
    return out;
}

}  // namespace n2sid
