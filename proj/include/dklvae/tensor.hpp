#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dklvae/error.hpp"

namespace dklvae {

/// Dense row-major matrix of 64-bit floats. Every numeric container in the
/// library is one of these or a plain std::vector<double>.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

std::string shape_string(const Matrix& m);

/// Throws ErrorKind::numeric naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const std::string& what);
void require_finite(std::span<const double> v, const std::string& what);

Matrix matmul(const Matrix& a, const Matrix& b);

/// Lower-triangular factor L with L * L^T = a. The input must be symmetric
/// (within 1e-10 relative to its largest entry) and positive definite; the
/// error for a non-positive pivot names the failing index.
Matrix cholesky(const Matrix& a);

/// Solves (L * L^T) x = b for x given the factor returned by cholesky().
Matrix cholesky_solve(const Matrix& l, const Matrix& b);

/// Counter-based pseudo-random generator.
///
/// Output i of a stream is splitmix64(key + (i + 1) * golden_gamma), where the
/// key is splitmix64(seed). Only integer arithmetic is involved, so the raw
/// stream is identical on every platform. Uniform doubles take the top 53 bits;
/// normals use the Box-Muller transform on consecutive pairs (cos branch
/// first, sin branch cached for the next call).
///
/// Independent streams for parallel or per-epoch work come from split(k),
/// which derives a fresh key from (key, k) without consuming this stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    double normal();

    Rng split(std::uint64_t stream) const;

private:
    Rng(std::uint64_t seed, std::uint64_t key);

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// n i.i.d. standard normal draws; n == 0 yields an empty vector.
std::vector<double> sample_standard_normal(Rng& rng, std::size_t n);

/// rows x cols matrix of standard normal draws, filled row by row.
Matrix sample_standard_normal(Rng& rng, std::size_t rows, std::size_t cols);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

}  // namespace dklvae
