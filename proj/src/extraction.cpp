#include "n2sid/extraction.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace n2sid {

namespace {

constexpr double kLsThreshold = 1e-10;

IdentifiedModel assemble(const ObserverModel& obs, const SubspaceSvd& svd, Variant variant, int order,
                         const Vector& x0, bool deficient) {
    IdentifiedModel out;
    out.observer = obs;
    out.model = from_observer(obs);
    out.order = order;
    out.sigma = svd.sigma;
    out.variant = variant;
    out.x0 = x0;
    out.rank_deficient = deficient;
    return out;
}

void check_order(const SubspaceSvd& svd, int order) {
    require(order >= 1, "model order must be at least 1");
    require(order <= svd.U.cols(), "model order exceeds the number of singular vectors");
}

}  // namespace

SubspaceSvd lowrank_svd(const Matrix& Z) {
    require(Z.size() > 0, "cannot factor an empty matrix");
    Eigen::BDCSVD<Matrix> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD of the low-rank matrix failed");
    return {svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
}

int select_order(const Vector& sigma, int max_order) {
    require(sigma.size() >= 1, "no singular values given");
    require(max_order >= 1, "max_order must be at least 1");
    for (Index k = 1; k < sigma.size(); ++k) require(sigma(k) <= sigma(k - 1), "singular values must be descending");
    if (!(sigma(0) > 0.0) || !std::isfinite(sigma(0))) {
        throw NumericalError("all singular values are zero; no order can be selected");
    }

    Index kept = 0;
    while (kept < sigma.size() && sigma(kept) >= kSigmaFloor * sigma(0)) ++kept;
    const double target = 0.5 * (std::log(sigma(0)) + std::log(sigma(kept - 1)));
    Index best = 0;
    double best_gap = std::abs(std::log(sigma(0)) - target);
    for (Index k = 1; k < kept; ++k) {
        const double gap = std::abs(std::log(sigma(k)) - target);
        if (gap < best_gap) {
            best = k;
            best_gap = gap;
        }
    }
    return std::clamp(static_cast<int>(best) + 1, 1, max_order);
}

// ---- Toeplitz estimates -------------------------------------------------------

ToeplitzEstimates ToeplitzEstimates::from_decision(const DecisionVector& x, const OperatorSpec& spec) {
    x.check(spec);
    const Index s = spec.window(), p = spec.outputs(), m = spec.inputs();
    ToeplitzEstimates est{Matrix::Zero(p * s, m * s), Matrix::Zero(p * s, p * s), s, p};
    for (Index r = 0; r < s; ++r) {
        for (Index t = 0; t <= r; ++t) {
            for (Index i = 0; i < p; ++i) {
                for (Index j = 0; j < m; ++j) est.Tu(r * p + i, t * m + j) = x.v_of(spec, i, j)(r - t);
                if (t < r) {
                    for (Index j = 0; j < p; ++j) est.Ty(r * p + i, t * p + j) = x.w_of(spec, i, j)(r - t - 1);
                }
            }
        }
    }
    return est;
}

Matrix ToeplitzEstimates::input_block(Index k) const {
    require(k >= 0 && k < s, "block index outside the window");
    return Tu.block(k * p, 0, p, Tu.cols() / s);
}

Matrix ToeplitzEstimates::output_block(Index k) const {
    require(k >= 0 && k < s, "block index outside the window");
    return Ty.block(k * p, 0, p, p);
}

// ---- least squares --------------------------------------------------------------

LeastSquares least_squares(const Matrix& A, const Matrix& B) {
    require(A.rows() == B.rows(), "least squares: row counts differ");
    if (A.cols() == 0) return {Matrix::Zero(0, B.cols()), false};
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
    cod.setThreshold(kLsThreshold);
    cod.compute(A);
    LeastSquares out{cod.solve(B), cod.rank() < A.cols()};
    if (!out.X.allFinite()) throw NumericalError("least-squares solution is not finite");
    return out;
}

Matrix observability(const Matrix& Aobs, const Matrix& C, Index count) {
    require(Aobs.rows() == Aobs.cols() && C.cols() == Aobs.rows(), "observability: inconsistent shapes");
    const Index p = C.rows();
    Matrix O(p * count, Aobs.rows());
    Matrix block = C;
    for (Index k = 0; k < count; ++k) {
        O.middleRows(k * p, p) = block;
        block = block * Aobs;
    }
    return O;
}

// ---- M1 steps -------------------------------------------------------------------

AcEstimate estimate_AC(const Matrix& U, Index s, Index p) {
    require(s >= 2 && p >= 1 && U.rows() == s * p, "basis must have s p rows");
    require(U.cols() >= 1 && U.cols() <= (s - 1) * p, "order must lie in [1, (s - 1) p]");
    const Index top = (s - 1) * p;
    const auto ls = least_squares(U.topRows(top), U.bottomRows(top));
    return {ls.X, U.topRows(p), ls.rank_deficient};
}

GainEstimate estimate_K(const Matrix& Aobs, const Matrix& C, const Matrix& Ty) {
    const Index p = C.rows();
    require(Ty.rows() == Ty.cols() && p > 0 && Ty.rows() % p == 0, "Ty must be square with p s rows");
    const Index s = Ty.rows() / p;
    require(s >= 2, "Ty must have at least two block rows");
    const auto ls = least_squares(observability(Aobs, C, s - 1), Ty.block(p, 0, (s - 1) * p, p));
    return {ls.X, ls.rank_deficient};
}

PredictionRegression prediction_regression(const Matrix& Aobs, const Matrix& C, const Matrix& K,
                                           const IoRecord& rec) {
    rec.validate();
    const Index n = Aobs.rows(), p = C.rows(), m = rec.inputs(), N = rec.samples();
    require(Aobs.cols() == n && C.cols() == n && K.rows() == n && K.cols() == p && rec.outputs() == p,
            "prediction regression: inconsistent shapes");

    PredictionRegression out{Matrix::Zero(N * p, n * m + p * m + n), Vector::Zero(N * p)};
    Matrix sens = Matrix::Zero(n, n * m);  // d xhat(k) / d vec(Bobs)
    Matrix power = Matrix::Identity(n, n);  // Aobs^k
    Vector z = Vector::Zero(n);             // response to K y
    for (Index k = 0; k < N; ++k) {
        auto rows = out.regressor.middleRows(k * p, p);
        rows.leftCols(n * m) = C * sens;
        for (Index j = 0; j < m; ++j) rows.block(0, n * m + j * p, p, p) = rec.u(k, j) * Matrix::Identity(p, p);
        rows.rightCols(n) = C * power;
        out.offset.segment(k * p, p) = C * z;

        Matrix next = Aobs * sens;
        for (Index j = 0; j < m; ++j) next.middleCols(j * n, n).diagonal().array() += rec.u(k, j);
        sens = std::move(next);
        power = Aobs * power;
        z = Aobs * z + K * rec.y.row(k).transpose();
    }
    if (!out.regressor.allFinite() || !out.offset.allFinite()) {
        throw NumericalError("observer regression overflowed");
    }
    return out;
}

InputEstimate estimate_BDx0(const Matrix& Aobs, const Matrix& C, const Matrix& K, const IoRecord& rec) {
    const Index n = Aobs.rows(), p = C.rows(), m = rec.inputs();
    const auto reg = prediction_regression(Aobs, C, K, rec);
    const Vector target = Eigen::Map<const Vector>(Matrix(rec.y.transpose()).data(), rec.y.size()) - reg.offset;
    const auto ls = least_squares(reg.regressor, target);
    const Vector theta = ls.X.col(0);
    InputEstimate out;
    out.Bobs = Eigen::Map<const Matrix>(theta.data(), n, m);
    out.D = Eigen::Map<const Matrix>(theta.data() + n * m, p, m);
    out.x0 = theta.tail(n);
    out.rank_deficient = ls.rank_deficient;
    return out;
}

Vector estimate_x0(const ObserverModel& obs, const IoRecord& rec) {
    obs.validate();
    const Index n = obs.n(), p = obs.p();
    const Matrix free = predict_observer(obs, rec, Vector::Zero(n));
    Matrix basis(rec.samples() * p, n);
    Matrix block = obs.C;
    for (Index k = 0; k < rec.samples(); ++k) {
        basis.middleRows(k * p, p) = block;
        block = block * obs.Aobs;
    }
    const Matrix resid = (rec.y - free).transpose();
    return least_squares(basis, Eigen::Map<const Vector>(resid.data(), resid.size())).X.col(0);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::m1: return "m1";
        case Variant::m2: return "m2";
        case Variant::m3: return "m3";
    }
    return "m1";
}

Variant parse_variant(const std::string& name) {
    if (name == "m1" || name == "M1") return Variant::m1;
    if (name == "m2" || name == "M2") return Variant::m2;
    if (name == "m3" || name == "M3") return Variant::m3;
    throw DimensionError("unknown variant '" + name + "' (expected m1, m2 or m3)");
}

// ---- variants -------------------------------------------------------------------

IdentifiedModel compute_m1(const SubspaceSvd& svd, const ToeplitzEstimates& est, const IoRecord& rec, int order) {
    check_order(svd, order);
    const Index p = rec.outputs(), s = svd.U.rows() / p;
    const auto ac = estimate_AC(svd.U.leftCols(order), s, p);
    const auto gain = estimate_K(ac.Aobs, ac.C, est.Ty);
    const auto bd = estimate_BDx0(ac.Aobs, ac.C, gain.K, rec);
    const ObserverModel obs{ac.Aobs, bd.Bobs, ac.C, bd.D, gain.K};
    return assemble(obs, svd, Variant::m1, order, bd.x0,
                    ac.rank_deficient || gain.rank_deficient || bd.rank_deficient);
}

IdentifiedModel compute_m2(const SubspaceSvd& svd, const IoRecord& rec, int order, bool scaled) {
    check_order(svd, order);
    rec.validate();
    const Index n = order, m = rec.inputs(), p = rec.outputs(), cols = svd.Vt.cols();
    if (cols < n + 1) throw DimensionError("too few state samples for the requested order");
    require(cols <= rec.samples(), "state sequence is longer than the record");

    Matrix X = svd.Vt.topRows(n);
    if (scaled) X = svd.sigma.head(n).cwiseSqrt().asDiagonal() * X;

    // State rows: xhat(k+1) on [xhat(k); u(k); y(k)].
    Matrix phi(n + m + p, cols - 1);
    phi << X.leftCols(cols - 1), rec.u.topRows(cols - 1).transpose(), rec.y.topRows(cols - 1).transpose();
    const auto state = least_squares(phi.transpose(), X.rightCols(cols - 1).transpose());
    // Output rows: y(k) on [xhat(k); u(k)].
    Matrix psi(n + m, cols);
    psi << X, rec.u.topRows(cols).transpose();
    const auto output = least_squares(psi.transpose(), rec.y.topRows(cols));

    const Matrix theta = state.X.transpose();   // n x (n + m + p)
    const Matrix gamma = output.X.transpose();  // p x (n + m)
    const ObserverModel obs{theta.leftCols(n), theta.middleCols(n, m), gamma.leftCols(n), gamma.rightCols(m),
                            theta.rightCols(p)};
    return assemble(obs, svd, Variant::m2, order, X.col(0), state.rank_deficient || output.rank_deficient);
}

IdentifiedModel compute_m3(const SubspaceSvd& svd, const ToeplitzEstimates& est, const IoRecord& rec, int order) {
    check_order(svd, order);
    const Index p = rec.outputs(), m = rec.inputs(), s = svd.U.rows() / p;
    const auto ac = estimate_AC(svd.U.leftCols(order), s, p);
    const auto gain = estimate_K(ac.Aobs, ac.C, est.Ty);
    require(est.Tu.rows() == s * p && est.Tu.cols() == s * m, "Tu does not match the basis");

    const Matrix D = est.Tu.block(0, 0, p, m);
    const auto bobs = least_squares(observability(ac.Aobs, ac.C, s - 1), est.Tu.block(p, 0, (s - 1) * p, m));
    const ObserverModel obs{ac.Aobs, bobs.X, ac.C, D, gain.K};
    const Vector x0 = estimate_x0(obs, rec);
    return assemble(obs, svd, Variant::m3, order, x0,
                    ac.rank_deficient || gain.rank_deficient || bobs.rank_deficient);
}

}  // namespace n2sid
