#include "dklvae/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dklvae {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::string shape_string(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw Error(ErrorKind::numeric, what + ": non-finite entries");
    }
}

void require_finite(std::span<const double> v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw Error(ErrorKind::numeric, what + ": non-finite entries");
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::shape, "matmul: inner dimensions disagree (" + shape_string(a) +
                                          " x " + shape_string(b) + ")");
    }
    Matrix c(a.rows(), b.cols());
    c.noalias() = a * b;
    return c;
}

Matrix cholesky(const Matrix& a) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) {
        throw Error(ErrorKind::shape, "cholesky: matrix is not square (" + shape_string(a) + ")");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorKind::numeric, "cholesky: matrix is not symmetric");
    }

    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        Matrix l = llt.matrixL();
        if (l.allFinite()) {
            return l;
        }
    }

    // Failure path: rerun the unblocked algorithm to name the failing pivot.
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d)) {
            std::ostringstream os;
            os << "cholesky: matrix is not positive definite (pivot " << j << " = " << d << ")";
            throw Error(ErrorKind::numeric, os.str());
        }
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    // Eigen rejected the matrix but the reference factorization succeeded
    // (a borderline pivot); return the reference factor.
    return l;
}

Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    if (l.rows() != l.cols() || b.rows() != l.rows()) {
        throw Error(ErrorKind::shape, "cholesky_solve: factor " + shape_string(l) +
                                          " incompatible with right-hand side " + shape_string(b));
    }
    Matrix x = b;
    l.triangularView<Eigen::Lower>().solveInPlace(x);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(splitmix64(seed)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return splitmix64(key_ + counter_ * kGoldenGamma);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) {
        throw Error(ErrorKind::config, "Rng::uniform_index: n must be positive");
    }
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // u1 in (0, 1] keeps the logarithm finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(theta);
    has_cached_normal_ = true;
    return radius * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(seed_, splitmix64(key_ ^ splitmix64(stream + kGoldenGamma)));
}

std::vector<double> sample_standard_normal(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto& x : out) {
        x = rng.normal();
    }
    return out;
}

Matrix sample_standard_normal(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            out(i, j) = rng.normal();
        }
    }
    return out;
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) {
        perm[i] = i;
    }
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace dklvae
