#include "n2sid/structured_ops.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace n2sid {

// ---- elementary structured matrices ---------------------------------------

Matrix circulant(const Vector& x) {
    require(x.size() >= 1, "circulant: empty input");
    const Index q = x.size();
    Matrix C(q, q);
    for (Index c = 0; c < q; ++c)
        for (Index r = 0; r < q; ++r) C(r, c) = x((r - c + q) % q);
    return C;
}

Matrix hankel(const Vector& x, Index rows, Index cols) {
    require(rows >= 1 && cols >= 1, "hankel: dimensions must be positive");
    require(x.size() == rows + cols - 1, "hankel: vector length must equal rows + cols - 1");
    Matrix H(rows, cols);
    for (Index b = 0; b < cols; ++b)
        for (Index a = 0; a < rows; ++a) H(a, b) = x(a + b);
    return H;
}

Vector hankel_adjoint(const Matrix& Z) {
    require(Z.size() > 0, "hankel_adjoint: empty input");
    Vector out = Vector::Zero(Z.rows() + Z.cols() - 1);
    for (Index b = 0; b < Z.cols(); ++b)
        for (Index a = 0; a < Z.rows(); ++a) out(a + b) += Z(a, b);
    return out;
}

Matrix toeplitz_lower(const Vector& first_col, Index s) {
    require(s >= 1, "toeplitz_lower: size must be positive");
    const bool strict = first_col.size() == s - 1;
    require(first_col.size() == s || strict, "toeplitz_lower: first column must have length s or s-1");
    const Index shift = strict ? 1 : 0;
    Matrix T = Matrix::Zero(s, s);
    for (Index c = 0; c < s; ++c)
        for (Index r = c + shift; r < s; ++r) T(r, c) = first_col(r - c - shift);
    return T;
}

Matrix block_hankel(const Matrix& series, Index s) {
    const Index N = series.rows(), q = series.cols();
    require(s >= 1, "block_hankel: window must be positive");
    require(N > s, "block_hankel: need more samples (" + std::to_string(N) + ") than block rows (" +
                       std::to_string(s) + ")");
    const Index cols = N - s + 1;
    Matrix H(q * s, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < s; ++r) H.block(r * q, c, q, 1) = series.row(r + c).transpose();
    return H;
}

// ---- Fourier representations ---------------------------------------------

DftPlan::DftPlan(Index order) : order_(order) { require(order >= 1, "DFT order must be positive"); }

CVector DftPlan::forward(const CVector& x) const {
    require(x.size() == order_, "DFT input length mismatch");
    if (order_ == 1) return x;
    Eigen::FFT<double> fft;
    CVector out(order_);
    fft.fwd(out, x);
    return out;
}

CVector DftPlan::adjoint(const CVector& x) const {
    require(x.size() == order_, "DFT input length mismatch");
    if (order_ == 1) return x;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    CVector out(order_);
    fft.inv(out, x);
    return out;
}

CMatrix DftPlan::columns(const std::vector<Index>& cols) const {
    CMatrix F(order_, static_cast<Index>(cols.size()));
    const double step = -2.0 * std::numbers::pi / static_cast<double>(order_);
    for (Index j = 0; j < F.cols(); ++j) {
        const Index c = cols[static_cast<std::size_t>(j)];
        for (Index a = 0; a < order_; ++a) {
            // Reduce the exponent modulo the order so large products keep full accuracy.
            const double angle = step * static_cast<double>((a * c) % order_);
            F(a, j) = Complex(std::cos(angle), std::sin(angle));
        }
    }
    return F;
}

CMatrix DftPlan::matrix() const {
    std::vector<Index> all(static_cast<std::size_t>(order_));
    for (Index i = 0; i < order_; ++i) all[static_cast<std::size_t>(i)] = i;
    return columns(all);
}

HankelFourier::HankelFourier(Index rows, Index cols) : dft(rows + cols - 1) {
    for (Index a = 0; a < rows; ++a) h_cols.push_back(cols - 1 + a);
    for (Index b = 0; b < cols; ++b) g_cols.push_back(cols - 1 - b);
}

Matrix hankel_fourier(const Vector& x, Index rows, Index cols) {
    require(x.size() == rows + cols - 1, "hankel: vector length must equal rows + cols - 1");
    const HankelFourier hf(rows, cols);
    const CVector spectrum = hf.dft.forward(x.cast<Complex>());
    const CMatrix out = hf.H().adjoint() * spectrum.asDiagonal() * hf.G();
    return out.real() / static_cast<double>(hf.dft.order());
}

Vector hankel_adjoint_fourier(const Matrix& Z) {
    const HankelFourier hf(Z.rows(), Z.cols());
    const CMatrix HZ = hf.H() * Z.cast<Complex>();
    const CVector diag = HZ.cwiseProduct(hf.G().conjugate()).rowwise().sum();
    return hf.dft.adjoint(diag).real() / static_cast<double>(hf.dft.order());
}

Matrix circulant_fourier(const Vector& x) {
    const DftPlan dft(x.size());
    const CMatrix F = dft.matrix();
    const CVector spectrum = dft.forward(x.cast<Complex>());
    const CMatrix C = F.adjoint() * spectrum.asDiagonal() * F;
    return C.real() / static_cast<double>(x.size());
}

// ---- the identification operator -----------------------------------------

OperatorSpec OperatorSpec::from_data(const Matrix& u, const Matrix& y, Index s) {
    require(s >= 2, "window s must be at least 2");
    require(u.rows() == y.rows(), "input and output sample counts differ");
    require(y.cols() >= 1, "at least one output is required");
    require(y.rows() > s, "need more samples than block rows (N > s)");

    OperatorSpec spec;
    spec.N_ = y.rows();
    spec.s_ = s;
    spec.ncols_ = spec.N_ - s + 1;
    spec.p_ = y.cols();
    spec.m_ = u.cols();
    for (Index j = 0; j < spec.m_; ++j) spec.V_.push_back(-hankel(u.col(j), s, spec.ncols_));
    for (Index j = 0; j < spec.p_; ++j) spec.W_.push_back(-hankel(y.col(j), s, spec.ncols_));
    return spec;
}

DecisionVector DecisionVector::zeros(const OperatorSpec& spec) {
    const Index p = spec.outputs(), m = spec.inputs(), s = spec.window();
    return {Vector::Zero(p * spec.samples()), Vector::Zero(p * m * s), Vector::Zero(p * p * (s - 1))};
}

void DecisionVector::check(const OperatorSpec& spec) const {
    const Index p = spec.outputs(), m = spec.inputs(), s = spec.window();
    require(yhat.size() == p * spec.samples(), "decision vector: yhat block has wrong length");
    require(v.size() == p * m * s, "decision vector: v block has wrong length");
    require(w.size() == p * p * (s - 1), "decision vector: w block has wrong length");
}

Vector DecisionVector::output_block(const OperatorSpec& spec, Index i) const {
    const Index N = spec.samples(), m = spec.inputs(), p = spec.outputs(), s = spec.window();
    Vector block(spec.block_size());
    block.head(N) = yhat.segment(i * N, N);
    block.segment(N, m * s) = v.segment(i * m * s, m * s);
    block.tail(p * (s - 1)) = w.segment(i * p * (s - 1), p * (s - 1));
    return block;
}

void DecisionVector::set_output_block(const OperatorSpec& spec, Index i, const Vector& block) {
    require(block.size() == spec.block_size(), "output block has wrong length");
    const Index N = spec.samples(), m = spec.inputs(), p = spec.outputs(), s = spec.window();
    yhat.segment(i * N, N) = block.head(N);
    v.segment(i * m * s, m * s) = block.segment(N, m * s);
    w.segment(i * p * (s - 1), p * (s - 1)) = block.tail(p * (s - 1));
}

Vector DecisionVector::stacked() const {
    Vector x(yhat.size() + v.size() + w.size());
    x << yhat, v, w;
    return x;
}

DecisionVector DecisionVector::from_stacked(const OperatorSpec& spec, const Vector& x) {
    DecisionVector out = zeros(spec);
    require(x.size() == spec.decision_size(), "stacked decision vector has wrong length");
    out.yhat = x.head(out.yhat.size());
    out.v = x.segment(out.yhat.size(), out.v.size());
    out.w = x.tail(out.w.size());
    return out;
}

Matrix output_rows(const Matrix& Z, Index p, Index i) {
    const Index s = Z.rows() / p;
    Matrix Zi(s, Z.cols());
    for (Index r = 0; r < s; ++r) Zi.row(r) = Z.row(r * p + i);
    return Zi;
}

Matrix apply_operator(const DecisionVector& x, const OperatorSpec& spec) {
    x.check(spec);
    const Index p = spec.outputs(), m = spec.inputs(), s = spec.window(), n = spec.columns();
    Matrix out(p * s, n);
    for (Index i = 0; i < p; ++i) {
        Matrix Ai = hankel(x.yhat_of(spec, i), s, n);
        for (Index j = 0; j < m; ++j) Ai.noalias() += toeplitz_lower(x.v_of(spec, i, j), s) * spec.V()[j];
        for (Index j = 0; j < p; ++j) Ai.noalias() += toeplitz_lower(x.w_of(spec, i, j), s) * spec.W()[j];
        for (Index r = 0; r < s; ++r) out.row(r * p + i) = Ai.row(r);
    }
    return out;
}

DecisionVector apply_adjoint(const Matrix& Z, const OperatorSpec& spec) {
    const Index p = spec.outputs(), m = spec.inputs(), s = spec.window();
    require(Z.rows() == spec.rows() && Z.cols() == spec.columns(), "adjoint: Z has wrong shape");

    DecisionVector out = DecisionVector::zeros(spec);
    for (Index i = 0; i < p; ++i) {
        const Matrix Zi = output_rows(Z, p, i);
        out.yhat.segment(i * spec.samples(), spec.samples()) = hankel_adjoint(Zi);

        // Z_{i; s:-1:1, :}^T, shared by every Toeplitz term of this output.
        const Matrix ZrevT = Zi.colwise().reverse().transpose();
        for (Index j = 0; j < m; ++j) {
            const Vector h = hankel_adjoint(spec.V()[j] * ZrevT);
            auto v = out.v.segment((i * m + j) * s, s);
            for (Index k = 0; k < s; ++k) v(k) = h(s - 1 - k);
        }
        for (Index j = 0; j < p; ++j) {
            const Vector h = hankel_adjoint(spec.W()[j] * ZrevT);
            auto w = out.w.segment((i * p + j) * (s - 1), s - 1);
            for (Index k = 0; k + 1 < s; ++k) w(k) = h(s - 2 - k);
        }
    }
    return out;
}

namespace {

// Row-wise forward FFT followed by column-wise adjoint FFT: returns F^H X F for square X.
CMatrix dft_sandwich(const CMatrix& X, const DftPlan& dft) {
    CMatrix XF(X.rows(), X.cols());
    for (Index r = 0; r < X.rows(); ++r) XF.row(r) = dft.forward(X.row(r).transpose()).transpose();
    CMatrix out(X.rows(), X.cols());
    for (Index c = 0; c < X.cols(); ++c) out.col(c) = dft.adjoint(XF.col(c));
    return out;
}

// G_N V^T for a Hankel-sized s x n matrix V: column t is F_N applied to row t of V, reversed
// and zero-padded to length N.
CMatrix fourier_rows_reversed(const Matrix& V, const DftPlan& dft) {
    const Index N = dft.order(), n = V.cols();
    CMatrix out(N, V.rows());
    for (Index t = 0; t < V.rows(); ++t) {
        CVector z = CVector::Zero(N);
        for (Index c = 0; c < n; ++c) z(n - 1 - c) = V(t, c);
        out.col(t) = dft.forward(z);
    }
    return out;
}

struct MAssembler {
    const OperatorSpec& spec;
    Index N, n, s, kappa;
    HankelFourier full;    // order N: Hankel of yhat
    HankelFourier window;  // order 2s-1: square Toeplitz parts
    CMatrix Hn, Gk, Hr, Fv, Fw;
    CMatrix HrHrH;
    std::vector<CMatrix> GkV, GkW;  // G_kappa V_j, G_kappa W_j (kappa x n)
    double worst_imag = 0.0;

    explicit MAssembler(const OperatorSpec& sp)
        : spec(sp),
          N(sp.samples()),
          n(sp.columns()),
          s(sp.window()),
          kappa(2 * sp.window() - 1),
          full(sp.window(), sp.columns()),
          window(sp.window(), sp.window()) {
        Hn = full.H();
        Gk = window.G();
        std::vector<Index> rev_h(window.h_cols.rbegin(), window.h_cols.rend());
        Hr = window.dft.columns(rev_h);
        // Parameter-to-spectrum maps: F [v_{s:-1:1}; 0] = F_{:, s:-1:1} v, likewise for w.
        std::vector<Index> vcols, wcols;
        for (Index k = s - 1; k >= 0; --k) vcols.push_back(k);
        for (Index k = s - 2; k >= 0; --k) wcols.push_back(k);
        Fv = window.dft.columns(vcols);
        Fw = window.dft.columns(wcols);
        HrHrH = Hr * Hr.adjoint();
        for (const auto& V : sp.V()) GkV.push_back(Gk * V.cast<Complex>());
        for (const auto& W : sp.W()) GkW.push_back(Gk * W.cast<Complex>());
    }

    Matrix take_real(const CMatrix& X) {
        const double scale = 1.0 + X.real().cwiseAbs().maxCoeff();
        worst_imag = std::max(worst_imag, X.imag().cwiseAbs().maxCoeff() / scale);
        return X.real();
    }

    // (1/N^2) F^H ((H H^H) o conj(G G^H)) F. Both Gram matrices are circulant in the
    // frequency index, so their symbols come from one FFT each.
    Matrix m11() {
        const DftPlan& dft = full.dft;
        CVector hind = CVector::Zero(N), gind = CVector::Zero(N);
        for (Index c : full.h_cols) hind(c) = 1.0;
        for (Index c : full.g_cols) gind(c) = 1.0;
        const CVector hh = dft.forward(hind), gg = dft.forward(gind);
        CMatrix X(N, N);
        for (Index l = 0; l < N; ++l)
            for (Index k = 0; k < N; ++k) {
                const Index d = (k - l + N) % N;
                X(k, l) = hh(d) * std::conj(gg(d));
            }
        return take_real(dft_sandwich(X, dft) / static_cast<double>(N * N));
    }

    // (1/(N kappa)) F_N^H ((H_N Hr^H) o conj(G_N Q^H)) Fparam, Q = G_kappa Data.
    Matrix m1x(const Matrix& data, const CMatrix& Fparam) {
        const CMatrix GnDataT = fourier_rows_reversed(data, full.dft);  // N x s
        const CMatrix GnQH = GnDataT * Gk.adjoint();                   // N x kappa
        const CMatrix X = (Hn * Hr.adjoint()).cwiseProduct(GnQH.conjugate());
        CMatrix FX(N, kappa);
        for (Index c = 0; c < kappa; ++c) FX.col(c) = full.dft.adjoint(X.col(c));
        return take_real(FX * Fparam / static_cast<double>(N * kappa));
    }

    // (1/kappa^2) Fa^H ((Hr Hr^H) o conj(Qa Qb^H)) Fb.
    Matrix mxx(const CMatrix& Qa, const CMatrix& Qb, const CMatrix& Fa, const CMatrix& Fb) {
        const CMatrix X = HrHrH.cwiseProduct((Qa * Qb.adjoint()).conjugate());
        return take_real(Fa.adjoint() * X * Fb / static_cast<double>(kappa * kappa));
    }
};

}  // namespace

Matrix build_M(const OperatorSpec& spec) {
    const Index N = spec.samples(), m = spec.inputs(), p = spec.outputs(), s = spec.window();
    require(s >= 2 && N > s, "build_M: invalid operator spec");

    MAssembler as(spec);
    Matrix M = Matrix::Zero(spec.block_size(), spec.block_size());
    const auto voff = [&](Index j) { return N + j * s; };
    const auto woff = [&](Index k) { return N + m * s + k * (s - 1); };

    M.topLeftCorner(N, N) = as.m11();
    for (Index j = 0; j < m; ++j) {
        const Matrix B = as.m1x(spec.V()[j], as.Fv);
        M.block(0, voff(j), N, s) = B;
        M.block(voff(j), 0, s, N) = B.transpose();
    }
    for (Index k = 0; k < p; ++k) {
        const Matrix B = as.m1x(spec.W()[k], as.Fw);
        M.block(0, woff(k), N, s - 1) = B;
        M.block(woff(k), 0, s - 1, N) = B.transpose();
    }
    for (Index j = 0; j < m; ++j) {
        for (Index k = j; k < m; ++k) {
            const Matrix B = as.mxx(as.GkV[j], as.GkV[k], as.Fv, as.Fv);
            M.block(voff(j), voff(k), s, s) = B;
            if (k != j) M.block(voff(k), voff(j), s, s) = B.transpose();
        }
        for (Index k = 0; k < p; ++k) {
            const Matrix B = as.mxx(as.GkV[j], as.GkW[k], as.Fv, as.Fw);
            M.block(voff(j), woff(k), s, s - 1) = B;
            M.block(woff(k), voff(j), s - 1, s) = B.transpose();
        }
    }
    for (Index j = 0; j < p; ++j) {
        for (Index k = j; k < p; ++k) {
            const Matrix B = as.mxx(as.GkW[j], as.GkW[k], as.Fw, as.Fw);
            M.block(woff(j), woff(k), s - 1, s - 1) = B;
            if (k != j) M.block(woff(k), woff(j), s - 1, s - 1) = B.transpose();
        }
    }

    if (as.worst_imag > 1e-9) {
        throw NumericalError("build_M: imaginary residue " + std::to_string(as.worst_imag) +
                             " exceeds tolerance");
    }
    return M;
}

}  // namespace n2sid
