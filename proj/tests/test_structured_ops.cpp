#include <random>

#include "doctest.h"
#include "n2sid/model.hpp"
#include "n2sid/structured_ops.hpp"
#include "oracles.hpp"

using namespace n2sid;
using oracle::max_abs;

TEST_CASE("circulant") {
    Vector x(3);
    x << 1, 2, 3;
    Matrix expected(3, 3);
    expected << 1, 3, 2, 2, 1, 3, 3, 2, 1;
    CHECK(circulant(x) == expected);

    CHECK(circulant(Vector::Unit(4, 0)) == Matrix::Identity(4, 4));

    std::mt19937_64 rng(1);
    for (Index q : {1, 2, 5, 7, 12}) {
        const Vector r = oracle::random_vector(rng, q);
        CHECK(max_abs(circulant_fourier(r) - circulant(r)) <= 1e-10);
    }
    CHECK_THROWS_AS(circulant(Vector()), DimensionError);
}

TEST_CASE("hankel") {
    Vector x(3);
    x << 1, 2, 3;
    Matrix expected(2, 2);
    expected << 1, 2, 2, 3;
    CHECK(hankel(x, 2, 2) == expected);
    CHECK(hankel(x, 1, 3) == x.transpose());
    CHECK_THROWS_AS(hankel(x, 2, 3), DimensionError);

    SUBCASE("Fourier factorization matches direct indexing") {
        std::mt19937_64 rng(2);
        const Vector r = oracle::random_vector(rng, 6);
        CHECK(max_abs(hankel_fourier(r, 3, 4) - hankel(r, 3, 4)) <= 1e-10);
        for (Index rows = 1; rows <= 9; ++rows)
            for (Index cols = 1; cols <= 13; cols += 3) {
                const Vector z = oracle::random_vector(rng, rows + cols - 1);
                CHECK(max_abs(hankel_fourier(z, rows, cols) - hankel(z, rows, cols)) <= 1e-10);
                const Matrix Z = oracle::random_matrix(rng, rows, cols);
                CHECK((hankel_adjoint_fourier(Z) - hankel_adjoint(Z)).cwiseAbs().maxCoeff() <= 1e-10);
            }
    }

    SUBCASE("lower-left corner of the column-reversed circulant") {
        std::mt19937_64 rng(3);
        for (Index rows = 1; rows <= 6; ++rows)
            for (Index cols = 1; cols <= 6; ++cols) {
                const Vector z = oracle::random_vector(rng, rows + cols - 1);
                const Matrix C = circulant(z);
                Matrix corner(rows, cols);
                for (Index a = 0; a < rows; ++a)
                    for (Index b = 0; b < cols; ++b) corner(a, b) = C(cols - 1 + a, cols - 1 - b);
                CHECK(corner == hankel(z, rows, cols));
            }
    }
}

TEST_CASE("toeplitz_lower") {
    CHECK(toeplitz_lower(Vector::Constant(1, 4.0), 1) == Matrix::Constant(1, 1, 4.0));

    Vector c(3);
    c << 1, 2, 3;
    Matrix expected(3, 3);
    expected << 1, 0, 0, 2, 1, 0, 3, 2, 1;
    CHECK(toeplitz_lower(c, 3) == expected);

    Vector z(2);
    z << 5, 7;
    Matrix strict(3, 3);
    strict << 0, 0, 0, 5, 0, 0, 7, 5, 0;
    CHECK(toeplitz_lower(z, 3) == strict);

    CHECK_THROWS_AS(toeplitz_lower(Vector::Zero(5), 3), DimensionError);
}

TEST_CASE("block_hankel") {
    Matrix series(4, 1);
    series << 1, 2, 3, 4;
    Matrix expected(2, 3);
    expected << 1, 2, 3, 2, 3, 4;
    CHECK(block_hankel(series, 2) == expected);

    Matrix two(3, 2);
    two << 1, 2, 3, 4, 5, 6;
    const Matrix H = block_hankel(two, 2);
    CHECK(H.rows() == 4);
    CHECK(H.cols() == 2);
    CHECK(H.col(0) == (Vector(4) << 1, 2, 3, 4).finished());

    CHECK_THROWS_AS(block_hankel(series, 4), DimensionError);

    std::mt19937_64 rng(4);
    const Matrix u = oracle::random_matrix(rng, 12, 2), y = oracle::random_matrix(rng, 12, 1);
    const auto spec = OperatorSpec::from_data(u, y, 4);
    for (Index j = 0; j < 2; ++j) CHECK(block_hankel(u.col(j), 4) == -spec.V()[j]);
}

TEST_CASE("OperatorSpec validation") {
    const Matrix u = Matrix::Ones(10, 1), y = Matrix::Ones(10, 1);
    CHECK_THROWS_AS(OperatorSpec::from_data(u, y, 1), DimensionError);
    CHECK_THROWS_AS(OperatorSpec::from_data(u, y, 10), DimensionError);
    CHECK_THROWS_AS(OperatorSpec::from_data(Matrix::Ones(9, 1), y, 3), DimensionError);
    const auto spec = OperatorSpec::from_data(u, y, 3);
    CHECK(spec.columns() == 8);
    CHECK(spec.block_size() == 10 + 3 + 2);

    const auto out_only = OperatorSpec::from_data(Matrix(10, 0), y, 3);
    const auto x = DecisionVector::zeros(out_only);
    CHECK(x.v.size() == 0);
    CHECK(out_only.block_size() == 10 + 2);
}

TEST_CASE("apply_operator") {
    std::mt19937_64 rng(5);

    SUBCASE("only the Hankel term survives when v = w = 0") {
        const Matrix u = oracle::random_matrix(rng, 15, 2), y = oracle::random_matrix(rng, 15, 2);
        const auto spec = OperatorSpec::from_data(u, y, 4);
        auto x = DecisionVector::zeros(spec);
        const Matrix yhat = oracle::random_matrix(rng, 15, 2);
        for (Index i = 0; i < 2; ++i) x.yhat.segment(i * 15, 15) = yhat.col(i);
        CHECK(apply_operator(x, spec) == block_hankel(yhat, 4));
    }

    SUBCASE("dense data-equation oracle") {
        for (int trial = 0; trial < 20; ++trial) {
            const Index p = 1 + trial % 2, m = trial % 3, s = 2 + trial % 5, N = s + 3 + trial;
            const Matrix u = oracle::random_matrix(rng, N, m), y = oracle::random_matrix(rng, N, p);
            const auto spec = OperatorSpec::from_data(u, y, s);
            const auto x = oracle::random_decision(rng, spec);
            const Matrix Ax = apply_operator(x, spec);
            for (Index i = 0; i < p; ++i)
                CHECK(max_abs(output_rows(Ax, p, i) - oracle::dense_operator_block(spec, u, y, x, i)) <= 1e-12);
        }
    }

    SUBCASE("SISO v = e1 gives -U_s") {
        const Matrix u = oracle::random_matrix(rng, 9, 1), y = oracle::random_matrix(rng, 9, 1);
        const auto spec = OperatorSpec::from_data(u, y, 3);
        auto x = DecisionVector::zeros(spec);
        x.v(0) = 2.5;
        CHECK(max_abs(apply_operator(x, spec) + 2.5 * block_hankel(u, 3)) <= 1e-14);
    }

    SUBCASE("true predictor parameters give a rank-n matrix") {
        const auto model = oracle::random_stable_model(rng, 2, 1, 1);
        const Index N = 40, s = 6;
        const Matrix u = oracle::random_matrix(rng, N, 1);
        const auto rec = generate_data(model, u, Vector::Zero(2), 0.0, 1);
        const auto spec = OperatorSpec::from_data(rec.u, rec.y, s);
        const auto obs = to_observer(model);
        const auto mu = markov_parameters(obs, static_cast<int>(s), MarkovChannel::input);
        const auto my = markov_parameters(obs, static_cast<int>(s), MarkovChannel::output);
        auto x = DecisionVector::zeros(spec);
        x.yhat = rec.y.col(0);
        for (Index k = 0; k < s; ++k) x.v(k) = mu[k](0, 0);
        for (Index k = 1; k < s; ++k) x.w(k - 1) = my[k](0, 0);
        const Vector sv = apply_operator(x, spec).jacobiSvd().singularValues();
        CHECK(sv(2) <= 1e-10 * sv(0));
        CHECK(sv(1) > 1e-6 * sv(0));
    }
}

TEST_CASE("apply_adjoint") {
    std::mt19937_64 rng(6);
    const auto spec0 = oracle::random_spec(rng);
    const auto z = apply_adjoint(Matrix::Zero(spec0.rows(), spec0.columns()), spec0);
    CHECK(z.stacked().isZero(0.0));
    CHECK_THROWS_AS(apply_adjoint(Matrix::Zero(spec0.rows() + 1, spec0.columns()), spec0), DimensionError);

    SUBCASE("inner-product identity over random specs") {
        for (int trial = 0; trial < 100; ++trial) {
            const auto spec = oracle::random_spec(rng);
            const auto x = oracle::random_decision(rng, spec);
            const Matrix Z = oracle::random_matrix(rng, spec.rows(), spec.columns());
            const double lhs = (apply_operator(x, spec).array() * Z.array()).sum();
            const double rhs = x.stacked().dot(apply_adjoint(Z, spec).stacked());
            CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
        }
    }

    SUBCASE("single-entry probes match the dense transpose") {
        const Matrix u = oracle::random_matrix(rng, 8, 1), y = oracle::random_matrix(rng, 8, 1);
        const auto spec = OperatorSpec::from_data(u, y, 3);
        const Index d = spec.decision_size();
        Matrix dense(spec.rows() * spec.columns(), d);
        for (Index k = 0; k < d; ++k) {
            Vector e = Vector::Zero(d);
            e(k) = 1.0;
            dense.col(k) = apply_operator(DecisionVector::from_stacked(spec, e), spec).reshaped();
        }
        for (Index a = 0; a < spec.rows(); ++a)
            for (Index b = 0; b < spec.columns(); ++b) {
                Matrix E = Matrix::Zero(spec.rows(), spec.columns());
                E(a, b) = 1.0;
                const Vector col = apply_adjoint(E, spec).stacked();
                CHECK((col - dense.row(b * spec.rows() + a).transpose()).cwiseAbs().maxCoeff() <= 1e-14);
            }
    }
}

TEST_CASE("build_M") {
    SUBCASE("Hankel-only block counts anti-diagonal occupancy") {
        Matrix u = Matrix::Zero(3, 1), y = Matrix::Zero(3, 1);
        const auto spec = OperatorSpec::from_data(u, y, 2);
        const Matrix M = build_M(spec);
        Matrix expected = Matrix::Zero(3, 3);
        expected.diagonal() << 1, 2, 1;
        CHECK(max_abs(M.topLeftCorner(3, 3) - expected) <= 1e-12);
    }

    SUBCASE("SISO s = 3, N = 8 matches the dense probe") {
        std::mt19937_64 rng(7);
        const auto spec = OperatorSpec::from_data(oracle::random_matrix(rng, 8, 1),
                                                  oracle::random_matrix(rng, 8, 1), 3);
        CHECK(max_abs(build_M(spec) - oracle::dense_M(spec)) <= 1e-8);
    }

    SUBCASE("random family: oracle equivalence, symmetry, PSD") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            const auto spec = oracle::random_spec(rng);
            const Matrix M = build_M(spec);
            for (Index i = 0; i < spec.outputs(); ++i)
                CHECK(max_abs(M - oracle::dense_M(spec, i)) <= 1e-8);
            CHECK(max_abs(M - M.transpose()) <= 1e-10);
            const Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().cwiseAbs().maxCoeff());
        }
    }

    SUBCASE("output-only operator") {
        std::mt19937_64 rng(9);
        const auto spec = OperatorSpec::from_data(Matrix(12, 0), oracle::random_matrix(rng, 12, 2), 4);
        CHECK(max_abs(build_M(spec) - oracle::dense_M(spec, 1)) <= 1e-8);
    }

    SUBCASE("MIMO coefficient matrix is block diagonal with equal blocks") {
        std::mt19937_64 rng(10);
        const auto spec = OperatorSpec::from_data(oracle::random_matrix(rng, 10, 2),
                                                  oracle::random_matrix(rng, 10, 2), 3);
        const Matrix full = oracle::dense_full_coefficient(spec);
        const Index d = spec.block_size();
        // Permute the global stacking (yhat, v, w) into per-output blocks.
        Matrix P = Matrix::Zero(spec.decision_size(), spec.decision_size());
        for (Index k = 0; k < spec.decision_size(); ++k) {
            Vector e = Vector::Zero(spec.decision_size());
            e(k) = 1.0;
            const auto x = DecisionVector::from_stacked(spec, e);
            for (Index i = 0; i < 2; ++i) P.col(k).segment(i * d, d) = x.output_block(spec, i);
        }
        const Matrix blocked = P * full * P.transpose();
        CHECK(max_abs(blocked.block(0, d, d, d)) <= 1e-10);
        CHECK(max_abs(blocked.block(0, 0, d, d) - blocked.block(d, d, d, d)) <= 1e-10);
        CHECK(max_abs(blocked.block(0, 0, d, d) - build_M(spec)) <= 1e-8);
    }
}
