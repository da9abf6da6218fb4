#pragma once

#include <string>

#include "n2sid/admm.hpp"
#include "n2sid/model.hpp"
#include "n2sid/structured_ops.hpp"

namespace n2sid {

/// Thin SVD U diag(sigma) Vt of the low-rank matrix, sigma descending.
struct SubspaceSvd {
    Matrix U;
    Vector sigma;
    Matrix Vt;
};

SubspaceSvd lowrank_svd(const Matrix& Z);
inline SubspaceSvd lowrank_svd(const SolveResult& result) { return lowrank_svd(result.Z); }

/// Singular values at or above this fraction of the largest take part in order selection.
inline constexpr double kSigmaFloor = 1e-12;

/**
 * Order whose singular value is closest, on a log scale, to the midpoint of log(max) and
 * log(min) over the values above the floor. Ties go to the smaller order; the result is
 * clamped to [1, max_order]. sigma must be non-increasing with a positive first entry.
 */
int select_order(const Vector& sigma, int max_order);

/// Estimated block-Toeplitz matrices of the data equation, rebuilt from the decision vector.
struct ToeplitzEstimates {
    Matrix Tu;  //!< (p s) x (m s), lower block triangular, block (r, t) = v(r - t)
    Matrix Ty;  //!< (p s) x (p s), strictly lower, block (r, t) = w(r - t - 1)
    Index s = 0;
    Index p = 0;

    static ToeplitzEstimates from_decision(const DecisionVector& x, const OperatorSpec& spec);

    /// k-th block of the first block column.
    [[nodiscard]] Matrix input_block(Index k) const;
    [[nodiscard]] Matrix output_block(Index k) const;
};

/// Minimum-norm least squares through a complete orthogonal decomposition, relative rank
/// threshold 1e-10.
struct LeastSquares {
    Matrix X;
    bool rank_deficient = false;
};

LeastSquares least_squares(const Matrix& A, const Matrix& B);

struct AcEstimate {
    Matrix Aobs;
    Matrix C;
    bool rank_deficient = false;
};

/// Shift invariance of the observability basis U (s p rows, block row r = window offset r).
AcEstimate estimate_AC(const Matrix& U, Index s, Index p);

/// [C; C Aobs; ...; C Aobs^(count-1)].
Matrix observability(const Matrix& Aobs, const Matrix& C, Index count);

struct GainEstimate {
    Matrix K;
    bool rank_deficient = false;
};

/// Least-squares K with C Aobs^(j-1) K matched to subdiagonal block j of Ty, j = 1..s-1.
GainEstimate estimate_K(const Matrix& Aobs, const Matrix& C, const Matrix& Ty);

/**
 * The observer prediction C xhat(k) + D u(k) is affine in theta = (vec Bobs, vec D, x0) once
 * (Aobs, C, K) are fixed: prediction = regressor * theta + offset, with rows ordered sample
 * by sample, outputs fastest.
 */
struct PredictionRegression {
    Matrix regressor;  //!< (N p) x (n m + p m + n)
    Vector offset;     //!< contribution of K y(k)
};

PredictionRegression prediction_regression(const Matrix& Aobs, const Matrix& C, const Matrix& K,
                                           const IoRecord& rec);

struct InputEstimate {
    Matrix Bobs;
    Matrix D;
    Vector x0;
    bool rank_deficient = false;
};

/// (Bobs, D, x0) minimizing the observer prediction error on rec.
InputEstimate estimate_BDx0(const Matrix& Aobs, const Matrix& C, const Matrix& K, const IoRecord& rec);

/// Initial state minimizing the observer prediction error with every matrix fixed.
Vector estimate_x0(const ObserverModel& obs, const IoRecord& rec);

enum class Variant { m1, m2, m3 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct IdentifiedModel {
    StateSpaceModel model;
    ObserverModel observer;  //!< the matrices actually estimated; model is derived from these
    int order = 0;
    double lambda = 0.0;
    Vector sigma;
    Variant variant = Variant::m1;
    Vector x0;  //!< initial observer state on the identification record
    bool rank_deficient = false;
};

/// Shift invariance for (Aobs, C), K from Ty, then (Bobs, D, x0) from the prediction error.
IdentifiedModel compute_m1(const SubspaceSvd& svd, const ToeplitzEstimates& est, const IoRecord& rec, int order);

/// Regression on a state sequence read from the right singular vectors, optionally scaled by
/// sqrt(sigma). The state at column c belongs to sample c.
IdentifiedModel compute_m2(const SubspaceSvd& svd, const IoRecord& rec, int order, bool scaled = false);

/// As M1 for (Aobs, C, K); (Bobs, D) from the Markov parameters in Tu; x0 afterwards.
IdentifiedModel compute_m3(const SubspaceSvd& svd, const ToeplitzEstimates& est, const IoRecord& rec, int order);

}  // namespace n2sid
