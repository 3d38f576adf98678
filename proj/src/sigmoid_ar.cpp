#include <cmath>

#include "markovopt/errors.hpp"
#include "markovopt/problems.hpp"

namespace markovopt {

namespace {

double threshold_label(const Vector& u, double flip_probability, const Vector& x, Rng& rng) {
    const double clean = u.dot(x) > 0.0 ? 1.0 : 0.0;
    return uniform01(rng) < flip_probability ? 1.0 - clean : clean;
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LossGradient sigmoid_loss_gradient(const Vector& w, const Vector& x, double label) {
    if (w.size() != x.size()) {
        throw DimensionMismatch("sigmoid loss: w and x differ in length");
    }
    const double s = sigmoid(w.dot(x));
    const double residual = s - label;
    return {0.5 * residual * residual, (residual * s * (1.0 - s)) * x};
}

Matrix randbimod(std::size_t d, double rho, Rng& rng) {
    if (d == 0 || d % 2 != 0) {
        throw OddDimension("RandBiMod needs an even, positive dimension");
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw InvalidParams("RandBiMod needs 0 < rho < 1");
    }
    const auto n = static_cast<Eigen::Index>(d);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix gaussian(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            gaussian(i, j) = normal(rng);
        }
    }
    // Fixing the signs of R's diagonal makes Q Haar distributed.
    Eigen::HouseholderQR<Matrix> qr(gaussian);
    Matrix q = qr.householderQ();
    const Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    Vector spectrum(n);
    spectrum.head(n / 2).setConstant(rho);
    spectrum.tail(n / 2).setConstant(rho / 3.0);
    Matrix a = q * spectrum.asDiagonal() * q.transpose();
    return 0.5 * (a + a.transpose());
}

SigmoidArInstance SigmoidArInstance::make(std::size_t dim, double rho, Rng& rng) {
    SigmoidArInstance inst;
    inst.dim = dim;
    inst.rho = rho;
    inst.a = randbimod(dim, rho, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    inst.u = Vector(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < inst.u.size(); ++i) {
            inst.u(i) = normal(rng);
        }
    } while (inst.u.norm() == 0.0);
    inst.u.normalize();
    return inst;
}

double ar_label(const SigmoidArInstance& inst, const Vector& x, Rng& rng) {
    return threshold_label(inst.u, inst.flip_probability, x, rng);
}

Ar1Process stationary_start(const SigmoidArInstance& inst, Rng& rng) {
    const Ar1Process cold(inst.a);
    const Matrix sigma = cold.stationary_covariance();
    const Matrix chol = Eigen::LLT<Matrix>(sigma).matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(sigma.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z(i) = normal(rng);
    }
    return Ar1Process(inst.a, cold.noise_variance(), chol * z);
}

LabeledArStream::LabeledArStream(const SigmoidArInstance& inst, Ar1Process process, std::uint64_t seed)
    : u_(inst.u), flip_probability_(inst.flip_probability), process_(std::move(process)), rng_(seed) {
    if (process_.dim() != static_cast<std::size_t>(u_.size())) {
        throw DimensionMismatch("labelling direction and process differ in dimension");
    }
}

Observation LabeledArStream::emit() {
    const Vector& x = process_.step(rng_);
    const double label = threshold_label(u_, flip_probability_, x, rng_);
    return ArSample{x, label};
}

Vector SigmoidOracle::gradient(const Vector& w, const Observation& z) const {
    const auto& sample = std::get<ArSample>(z);
    return sigmoid_loss_gradient(w, sample.x, sample.label).gradient;
}

SigmoidObjective::SigmoidObjective(const SigmoidArInstance& inst, std::size_t burn_in, std::size_t samples,
                                   std::uint64_t seed) {
    if (samples == 0) {
        throw InvalidParams("Monte Carlo objective needs at least one sample");
    }
    Rng start_rng(seed);
    LabeledArStream stream(inst, stationary_start(inst, start_rng), seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    for (std::size_t i = 0; i < burn_in; ++i) {
        stream.next();
    }
    features_.resize(static_cast<Eigen::Index>(inst.dim), static_cast<Eigen::Index>(samples));
    labels_.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        auto sample = std::get<ArSample>(stream.next());
        features_.col(static_cast<Eigen::Index>(i)) = sample.x;
        labels_.push_back(sample.label);
    }
}

double SigmoidObjective::objective(const Vector& w) const {
    const Vector margins = features_.transpose() * w;
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double r = sigmoid(margins(i)) - labels_[static_cast<std::size_t>(i)];
        total += 0.5 * r * r;
    }
    return total / static_cast<double>(labels_.size());
}

Vector SigmoidObjective::gradient(const Vector& w) const {
    const Vector margins = features_.transpose() * w;
    Vector coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double s = sigmoid(margins(i));
        coeff(i) = (s - labels_[static_cast<std::size_t>(i)]) * s * (1.0 - s);
    }
    return features_ * coeff / static_cast<double>(labels_.size());
}

}  // namespace markovopt
