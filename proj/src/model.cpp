#include "n2sid/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace n2sid {

namespace {

std::string shape(const Matrix& M) {
    std::ostringstream os;
    os << M.rows() << "x" << M.cols();
    return os.str();
}

void check_finite(const Matrix& M, const char* name) {
    if (!M.allFinite()) throw NumericalError(std::string("non-finite entries in ") + name);
}

void check_shape(const Matrix& M, Index rows, Index cols, const char* name) {
    if (M.rows() != rows || M.cols() != cols) {
        std::ostringstream os;
        os << name << " is " << shape(M) << ", expected " << rows << "x" << cols;
        throw DimensionError(os.str());
    }
}

}  // namespace

void StateSpaceModel::validate() const {
    const Index nx = A.rows(), nu = B.cols(), ny = C.rows();
    check_shape(A, nx, nx, "A");
    check_shape(B, nx, nu, "B");
    check_shape(C, ny, nx, "C");
    check_shape(D, ny, nu, "D");
    check_shape(K, nx, ny, "K");
    check_finite(A, "A");
    check_finite(B, "B");
    check_finite(C, "C");
    check_finite(D, "D");
    check_finite(K, "K");
}

StateSpaceModel StateSpaceModel::without_gain(Matrix A, Matrix B, Matrix C, Matrix D) {
    StateSpaceModel model{std::move(A), std::move(B), std::move(C), std::move(D), Matrix()};
    model.K = Matrix::Zero(model.A.rows(), model.C.rows());
    model.validate();
    return model;
}

void ObserverModel::validate() const {
    const Index nx = Aobs.rows(), nu = Bobs.cols(), ny = C.rows();
    check_shape(Aobs, nx, nx, "Aobs");
    check_shape(Bobs, nx, nu, "Bobs");
    check_shape(C, ny, nx, "C");
    check_shape(D, ny, nu, "D");
    check_shape(K, nx, ny, "K");
    check_finite(Aobs, "Aobs");
    check_finite(Bobs, "Bobs");
    check_finite(C, "C");
    check_finite(D, "D");
    check_finite(K, "K");
}

void IoRecord::validate() const {
    if (u.rows() != y.rows()) {
        throw DimensionError("input has " + std::to_string(u.rows()) + " samples, output has " +
                             std::to_string(y.rows()));
    }
    require(y.rows() >= 1, "record must contain at least one sample");
    check_finite(u, "u");
    check_finite(y, "y");
}

IoRecord IoRecord::slice(Index first, Index count) const {
    require(first >= 0 && count >= 0 && first + count <= samples(), "slice outside record");
    return {u.middleRows(first, count), y.middleRows(first, count)};
}

ObserverModel to_observer(const StateSpaceModel& model) {
    model.validate();
    return {model.A - model.K * model.C, model.B - model.K * model.D, model.C, model.D, model.K};
}

StateSpaceModel from_observer(const ObserverModel& obs) {
    obs.validate();
    return {obs.Aobs + obs.K * obs.C, obs.Bobs + obs.K * obs.D, obs.C, obs.D, obs.K};
}

Matrix simulate(const StateSpaceModel& model, const Matrix& u, const Vector& x0) {
    model.validate();
    require(u.cols() == model.m(), "input has " + std::to_string(u.cols()) +
                                       " columns, model expects " + std::to_string(model.m()));
    require(x0.size() == model.n(), "initial state has wrong length");

    const Index N = u.rows();
    Matrix yhat(N, model.p());
    Vector x = x0;
    for (Index k = 0; k < N; ++k) {
        const auto uk = u.row(k).transpose();
        yhat.row(k) = (model.C * x + model.D * uk).transpose();
        x = model.A * x + model.B * uk;
        if (!x.allFinite()) {
            throw NumericalError("simulation overflow at sample " + std::to_string(k + 1));
        }
    }
    return yhat;
}

Matrix predict_observer(const ObserverModel& obs, const IoRecord& rec, const Vector& x0) {
    obs.validate();
    rec.validate();
    require(rec.inputs() == obs.m() && rec.outputs() == obs.p(),
            "record dimensions do not match observer");
    require(x0.size() == obs.n(), "initial state has wrong length");

    const Index N = rec.samples();
    Matrix yhat(N, obs.p());
    Vector x = x0;
    for (Index k = 0; k < N; ++k) {
        const auto uk = rec.u.row(k).transpose();
        const auto yk = rec.y.row(k).transpose();
        yhat.row(k) = (obs.C * x + obs.D * uk).transpose();
        x = obs.Aobs * x + obs.Bobs * uk + obs.K * yk;
        if (!x.allFinite()) {
            throw NumericalError("observer overflow at sample " + std::to_string(k + 1));
        }
    }
    return yhat;
}

std::vector<Matrix> markov_parameters(const ObserverModel& obs, int count, MarkovChannel channel) {
    obs.validate();
    require(count >= 1, "Markov parameter count must be positive");

    const bool input = channel == MarkovChannel::input;
    const Matrix& G = input ? obs.Bobs : obs.K;
    std::vector<Matrix> blocks;
    blocks.reserve(static_cast<std::size_t>(count));
    blocks.push_back(input ? obs.D : Matrix::Zero(obs.p(), obs.p()));

    Matrix CA = obs.C;  // C Aobs^(j-1)
    for (int j = 1; j < count; ++j) {
        blocks.push_back(CA * G);
        CA = CA * obs.Aobs;
    }
    return blocks;
}

double vaf(const Matrix& y, const Matrix& yhat) {
    require(y.rows() == yhat.rows() && y.cols() == yhat.cols(), "vaf: shape mismatch");
    const double denom = y.squaredNorm();
    if (denom == 0.0) throw NumericalError("vaf: measured output is identically zero");
    return (1.0 - (y - yhat).squaredNorm() / denom) * 100.0;
}

Vector vaf_per_output(const Matrix& y, const Matrix& yhat) {
    require(y.rows() == yhat.rows() && y.cols() == yhat.cols(), "vaf: shape mismatch");
    Vector out(y.cols());
    for (Index i = 0; i < y.cols(); ++i) out(i) = vaf(y.col(i), yhat.col(i));
    return out;
}

IoRecord generate_data(const StateSpaceModel& model, const Matrix& u, const Vector& x0,
                       double noise_std, std::uint64_t seed) {
    model.validate();
    require(u.cols() == model.m(), "input column count does not match model");
    require(x0.size() == model.n(), "initial state has wrong length");
    require(noise_std >= 0.0, "noise standard deviation must be nonnegative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Index N = u.rows();
    Matrix y(N, model.p());
    Vector x = x0;
    Vector e(model.p());
    for (Index k = 0; k < N; ++k) {
        for (Index i = 0; i < e.size(); ++i) e(i) = noise_std * normal(rng);
        const auto uk = u.row(k).transpose();
        y.row(k) = (model.C * x + model.D * uk + e).transpose();
        x = model.A * x + model.B * uk + model.K * e;
        if (!x.allFinite()) throw NumericalError("data generation overflow");
    }
    return {u, y};
}

Matrix prbs_input(Index samples, Index inputs, std::uint64_t seed, Index hold) {
    require(hold >= 1, "hold must be positive");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    Matrix u(samples, inputs);
    for (Index j = 0; j < inputs; ++j) {
        double level = 1.0;
        for (Index k = 0; k < samples; ++k) {
            if (k % hold == 0) level = coin(rng) ? 1.0 : -1.0;
            u(k, j) = level;
        }
    }
    return u;
}

Matrix gaussian_input(Index samples, Index inputs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix u(samples, inputs);
    for (Index j = 0; j < inputs; ++j)
        for (Index k = 0; k < samples; ++k) u(k, j) = normal(rng);
    return u;
}

}  // namespace n2sid
