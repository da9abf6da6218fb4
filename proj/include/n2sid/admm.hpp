#pragma once

#include <optional>
#include <string>
#include <vector>

#include "n2sid/structured_ops.hpp"

namespace n2sid {

/// Fit term (lambda / N) sum_k ||y(k) - yhat(k)||^2 written as 1/2 (x - a)^T H (x - a),
/// with H = (2 lambda / N) I on the yhat block and zero elsewhere.
struct QuadraticTerm {
    double lambda = 0.0;
    Index samples = 0;
    DecisionVector a;  //!< yhat block = measured outputs, v and w blocks zero

    /// Diagonal of H on the yhat block.
    [[nodiscard]] double weight() const { return 2.0 * lambda / static_cast<double>(samples); }
    [[nodiscard]] double value(const DecisionVector& x) const;
};

/// y: N x p measured outputs matching spec.
QuadraticTerm build_quadratic(const Matrix& y, double lambda, const OperatorSpec& spec);

struct AdmmParams {
    int max_iter = 200;
    double eps_abs = 1e-6;
    double eps_rel = 1e-3;
    double tau = 2.0;   //!< penalty multiplier
    double mu = 10.0;   //!< residual balance ratio
    double rho0 = 1.0;  //!< initial penalty
    bool adapt_penalty = true;

    void validate() const;
};

/**
 * Joint diagonalization of the coefficient matrix M and the fit-term Hessian pattern E
 * (identity on the yhat block).
 *
 * With B = M + alpha E and a basis T satisfying T^T B T = I, T^T M T = diag(gamma), the
 * x-update matrix c E + rho M becomes diag((c / alpha)(1 - gamma) + rho gamma) for every fit
 * weight c and penalty rho, so a whole lambda sweep shares a single factorization. Directions
 * in the null space of B do not influence the problem and are dropped.
 */
class SweepFactorization {
public:
    explicit SweepFactorization(const OperatorSpec& spec);
    SweepFactorization(Matrix M, Index samples);

    [[nodiscard]] const Matrix& M() const { return M_; }
    [[nodiscard]] Index rank() const { return T_.cols(); }

    /// Minimum-norm-in-range solution of (fit_weight E + rho M) x = rhs.
    [[nodiscard]] Vector solve(double fit_weight, double rho, const Vector& rhs) const;

    /// M recovered from the factors, for consistency checks.
    [[nodiscard]] Matrix reconstruct() const;

private:
    Matrix M_;
    Index samples_;
    double alpha_ = 1.0;
    Matrix T_;
    Vector gamma_;
};

struct SolveResult {
    DecisionVector x;
    Matrix Z;     //!< low-rank iterate
    Matrix dual;  //!< unscaled multiplier for A(x) - Z = 0
    double rho = 1.0;
    int iterations = 0;
    double primal_res = 0.0;
    double dual_res = 0.0;
    double objective = 0.0;
    bool converged = false;
};

/// Starting point for a solve; usually the result of a neighbouring lambda.
struct WarmStart {
    DecisionVector x;
    Matrix Z;
    Matrix dual;
    double rho;
};

/// Singular value soft-thresholding U max(Sigma - threshold, 0) V^T.
Matrix svt(const Matrix& Y, double threshold);

double nuclear_norm(const Matrix& Y);

/// ||A(x)||_* + 1/2 (x - a)^T H (x - a).
double objective(const OperatorSpec& spec, const QuadraticTerm& quad, const DecisionVector& x);

/// ADMM for min ||Z||_* + 1/2 (x - a)^T H (x - a) subject to A(x) = Z, with residual-balanced
/// penalty adaptation. Throws NumericalError on non-finite iterates.
SolveResult solve(const OperatorSpec& spec, const QuadraticTerm& quad, const AdmmParams& params,
                  const SweepFactorization& fact, const WarmStart* warm = nullptr);

struct SweepPoint {
    double lambda = 0.0;
    std::optional<SolveResult> result;  //!< empty when the solve failed
    std::string error;
};

/// Solves for every lambda in an ascending positive grid. The factorization is shared; with
/// warm_start each point starts from its predecessor, otherwise points are independent and may
/// run on up to `threads` workers. Failures are recorded per point.
std::vector<SweepPoint> sweep(const OperatorSpec& spec, const Matrix& y, const std::vector<double>& grid,
                              const AdmmParams& params, const SweepFactorization& fact,
                              bool warm_start = true, unsigned threads = 1);

/// Points 10^lo, ..., 10^hi, logarithmically spaced.
std::vector<double> logspace(double lo_exponent, double hi_exponent, int count);

}  // namespace n2sid
