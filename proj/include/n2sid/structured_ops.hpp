#pragma once

#include <vector>

#include "n2sid/types.hpp"

namespace n2sid {

// ---- elementary structured matrices ---------------------------------------

/// Circulant matrix whose column c is x cyclically shifted down by c.
Matrix circulant(const Vector& x);

/// rows x cols Hankel matrix with entry (a, b) = x(a + b); requires x.size() == rows + cols - 1.
Matrix hankel(const Vector& x, Index rows, Index cols);

/// Adjoint of hankel(): anti-diagonal sums of Z, a vector of length rows + cols - 1.
Vector hankel_adjoint(const Matrix& Z);

/// s x s lower-triangular Toeplitz matrix with the given first column. A first column of
/// length s - 1 produces the strictly lower variant (zero diagonal).
Matrix toeplitz_lower(const Vector& first_col, Index s);

/// Block-Hankel data matrix: block (r, c) is series row r + c (as a column), giving a
/// (q s) x (N - s + 1) matrix for an N x q series.
Matrix block_hankel(const Matrix& series, Index s);

// ---- Fourier representations ---------------------------------------------

/// DFT of a given order with F(a, b) = exp(-2 pi i a b / order). Transforms use a
/// mixed-radix FFT, so the order need not be a power of two.
class DftPlan {
public:
    explicit DftPlan(Index order);

    [[nodiscard]] Index order() const { return order_; }

    [[nodiscard]] CVector forward(const CVector& x) const;
    /// Unnormalized inverse: returns F^H x.
    [[nodiscard]] CVector adjoint(const CVector& x) const;

    /// Dense DFT matrix restricted to the listed columns (in the listed order).
    [[nodiscard]] CMatrix columns(const std::vector<Index>& cols) const;
    [[nodiscard]] CMatrix matrix() const;

private:
    Index order_;
};

/// Column selections turning a DFT of order rows + cols - 1 into a Hankel factorization
/// hankel(x) = (1/order) H^H diag(F x) G, with H = F[:, cols-1 .. order-1] and G = F[:, cols-1 .. 0].
struct HankelFourier {
    DftPlan dft;
    std::vector<Index> h_cols;
    std::vector<Index> g_cols;

    HankelFourier(Index rows, Index cols);

    [[nodiscard]] CMatrix H() const { return dft.columns(h_cols); }
    [[nodiscard]] CMatrix G() const { return dft.columns(g_cols); }
};

/// hankel() evaluated through the Fourier factorization.
Matrix hankel_fourier(const Vector& x, Index rows, Index cols);

/// hankel_adjoint() evaluated as (1/order) F^H diag(H Z G^H).
Vector hankel_adjoint_fourier(const Matrix& Z);

/// Circulant through its spectral factorization (1/q) F^H diag(F x) F.
Matrix circulant_fourier(const Vector& x);

// ---- the identification operator -----------------------------------------

/// Dimensions and frozen data matrices of the linear operator
///   A(x) = Yhat_s - T_u U_s - T_y Y_s
/// assembled per output i as Hankel(yhat_i) + sum_j T(v^{ij}) V_j + sum_j T_0(w^{ij}) W_j with
/// V_j = -U_s^j and W_j = -Y_s^j.
class OperatorSpec {
public:
    /// u: N x m (m may be 0), y: N x p.
    static OperatorSpec from_data(const Matrix& u, const Matrix& y, Index s);

    [[nodiscard]] Index samples() const { return N_; }
    [[nodiscard]] Index window() const { return s_; }
    [[nodiscard]] Index columns() const { return ncols_; }
    [[nodiscard]] Index outputs() const { return p_; }
    [[nodiscard]] Index inputs() const { return m_; }

    /// Length of one per-output parameter block: N + m s + p (s - 1).
    [[nodiscard]] Index block_size() const { return N_ + m_ * s_ + p_ * (s_ - 1); }
    [[nodiscard]] Index decision_size() const { return p_ * block_size(); }
    [[nodiscard]] Index rows() const { return p_ * s_; }

    [[nodiscard]] const std::vector<Matrix>& V() const { return V_; }
    [[nodiscard]] const std::vector<Matrix>& W() const { return W_; }

private:
    Index N_ = 0, s_ = 0, ncols_ = 0, p_ = 0, m_ = 0;
    std::vector<Matrix> V_;
    std::vector<Matrix> W_;
};

/**
 * Decision variable x = (yhat, v, w).
 *
 * Global stacking: yhat holds yhat_1 .. yhat_p (N each); v holds v^{i,j} (s each) ordered by
 * output i then input j; w holds w^{i,j} (s - 1 each) ordered by output i then output j.
 * v^{i,j} is the first column of the (i, j) scalar Toeplitz inside T_u (Markov parameters
 * D, C Bobs, ...); w^{i,j} the strictly-lower first column inside T_y.
 */
struct DecisionVector {
    Vector yhat;
    Vector v;
    Vector w;

    static DecisionVector zeros(const OperatorSpec& spec);

    /// Per-output block (yhat_i, v^{i,1..m}, w^{i,1..p}), the unit on which M acts.
    [[nodiscard]] Vector output_block(const OperatorSpec& spec, Index i) const;
    void set_output_block(const OperatorSpec& spec, Index i, const Vector& block);

    [[nodiscard]] auto yhat_of(const OperatorSpec& spec, Index i) const {
        return yhat.segment(i * spec.samples(), spec.samples());
    }
    [[nodiscard]] auto v_of(const OperatorSpec& spec, Index i, Index j) const {
        return v.segment((i * spec.inputs() + j) * spec.window(), spec.window());
    }
    [[nodiscard]] auto w_of(const OperatorSpec& spec, Index i, Index j) const {
        return w.segment((i * spec.outputs() + j) * (spec.window() - 1), spec.window() - 1);
    }

    /// Concatenation (yhat, v, w).
    [[nodiscard]] Vector stacked() const;
    static DecisionVector from_stacked(const OperatorSpec& spec, const Vector& x);

    void check(const OperatorSpec& spec) const;
};

/// A(x): a (p s) x ncols matrix whose row r p + i is window offset r of output i.
Matrix apply_operator(const DecisionVector& x, const OperatorSpec& spec);

/// Adjoint of apply_operator with respect to the Frobenius / Euclidean inner products.
DecisionVector apply_adjoint(const Matrix& Z, const OperatorSpec& spec);

/// Rows of Z belonging to output i (an s x ncols matrix).
Matrix output_rows(const Matrix& Z, Index p, Index i);

/// Per-output coefficient matrix M with A_adj,i(A_i(x_i)) = M x_i, identical for every output,
/// assembled with FFT / Hadamard-product formulas. Throws NumericalError if the complex
/// assembly leaves an imaginary residue above 1e-9 (1 + max |M|).
Matrix build_M(const OperatorSpec& spec);

}  // namespace n2sid
