#pragma once

#include <cstdint>
#include <vector>

#include "n2sid/types.hpp"

namespace n2sid {

/**
 * Discrete-time LTI model in innovation form
 *
 *   x(k+1) = A x(k) + B u(k) + K e(k)
 *   y(k)   = C x(k) + D u(k) + e(k)
 *
 * Samples are numbered k = 1..N in the literature; every API in this library
 * stores sample k in row k-1 of its data matrices.
 */
struct StateSpaceModel {
    Matrix A;  //!< n x n
    Matrix B;  //!< n x m
    Matrix C;  //!< p x n
    Matrix D;  //!< p x m
    Matrix K;  //!< n x p, zero when no innovation model is known

    [[nodiscard]] Index n() const { return A.rows(); }
    [[nodiscard]] Index m() const { return B.cols(); }
    [[nodiscard]] Index p() const { return C.rows(); }

    /// Throws DimensionError on inconsistent shapes, NumericalError on non-finite entries.
    void validate() const;

    /// Model with K = 0 of matching size.
    static StateSpaceModel without_gain(Matrix A, Matrix B, Matrix C, Matrix D);
};

/// Observer (predictor) form: x(k+1) = Aobs x(k) + Bobs u(k) + K y(k), y(k) = C x(k) + D u(k).
struct ObserverModel {
    Matrix Aobs;  //!< A - K C
    Matrix Bobs;  //!< B - K D
    Matrix C;
    Matrix D;
    Matrix K;

    [[nodiscard]] Index n() const { return Aobs.rows(); }
    [[nodiscard]] Index m() const { return Bobs.cols(); }
    [[nodiscard]] Index p() const { return C.rows(); }

    void validate() const;
};

/// Time-aligned input/output samples; row k holds sample k+1.
struct IoRecord {
    Matrix u;  //!< N x m (m may be 0)
    Matrix y;  //!< N x p

    [[nodiscard]] Index samples() const { return y.rows(); }
    [[nodiscard]] Index inputs() const { return u.cols(); }
    [[nodiscard]] Index outputs() const { return y.cols(); }

    void validate() const;

    /// Rows [first, first + count).
    [[nodiscard]] IoRecord slice(Index first, Index count) const;
};

ObserverModel to_observer(const StateSpaceModel& model);

/// Inverse of to_observer: A = Aobs + K C, B = Bobs + K D.
StateSpaceModel from_observer(const ObserverModel& obs);

/// Deterministic simulation x(k+1) = A x(k) + B u(k), yhat(k) = C x(k) + D u(k), x(1) = x0.
/// The innovation gain is ignored. Throws NumericalError if the state overflows.
Matrix simulate(const StateSpaceModel& model, const Matrix& u, const Vector& x0);

/// One-step-ahead observer prediction driven by measured inputs and outputs.
Matrix predict_observer(const ObserverModel& obs, const IoRecord& rec, const Vector& x0);

enum class MarkovChannel { input, output };

/// Impulse-response blocks filling the lower block-Toeplitz matrices of the data equation:
/// input channel gives D, C Bobs, C Aobs Bobs, ...; output channel gives 0, C K, C Aobs K, ...
std::vector<Matrix> markov_parameters(const ObserverModel& obs, int count, MarkovChannel channel);

/// Variance accounted for, in percent. Throws NumericalError if y is identically zero.
double vaf(const Matrix& y, const Matrix& yhat);

/// Per-output VAF (column-wise).
Vector vaf_per_output(const Matrix& y, const Matrix& yhat);

// ---- synthetic data -------------------------------------------------------

/// Innovation-form data with i.i.d. Gaussian e(k) of the given standard deviation.
IoRecord generate_data(const StateSpaceModel& model, const Matrix& u, const Vector& x0,
                       double noise_std, std::uint64_t seed);

/// Random binary (+1/-1) input, each level held for `hold` samples.
Matrix prbs_input(Index samples, Index inputs, std::uint64_t seed, Index hold = 1);

/// Standard normal input.
Matrix gaussian_input(Index samples, Index inputs, std::uint64_t seed);

}  // namespace n2sid
