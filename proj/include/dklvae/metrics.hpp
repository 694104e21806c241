#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dklvae/tensor.hpp"

namespace dklvae {

double rmse(std::span<const double> y, std::span<const double> yhat);

/// 1 - SS_res / SS_tot. Needs at least two points and non-constant y.
double r2(std::span<const double> y, std::span<const double> yhat);

/// Windowed structural similarity of two equally sized images with values in
/// [0, 1]: 8x8 windows at stride 1, population statistics inside each window,
/// C1 = (0.01)^2, C2 = (0.03)^2, averaged over all window positions.
double ssim(std::span<const float> a, std::span<const float> b, std::size_t width, std::size_t height);

using OneHotPair = std::pair<Matrix, Matrix>;

/// Fraction of pairs whose matrices are exactly equal.
double exact_match_rate(std::span<const OneHotPair> pairs);

/// Number of rows whose argmax differs (lowest index on ties).
std::size_t row_errors(const Matrix& a, const Matrix& b);

struct ErrorHistogram {
    std::vector<std::size_t> counts;   // counts[k] = pairs with k row errors, k = 0..rows
    std::vector<double> cumulative;    // cumulative[k] = fraction with <= k errors
    std::size_t total = 0;
};

ErrorHistogram reconstruction_error_histogram(std::span<const OneHotPair> pairs);

struct MetricRow {
    std::string metric;
    std::string group;
    double value = 0.0;
    std::size_t n = 0;
};

/// Flat list of (metric, group, value, n) rows; the overall value of a
/// metric uses group "all".
struct MetricReport {
    std::vector<MetricRow> rows;

    void add(std::string metric, std::string group, double value, std::size_t n);
    /// Throws ErrorKind::data if the row is absent.
    const MetricRow& find(const std::string& metric, const std::string& group) const;
    void write_csv(const std::filesystem::path& path) const;
    static MetricReport read_csv(const std::filesystem::path& path);
};

/// RMSE and R^2 per group label plus an "all" row for each. Groups with
/// fewer than two members or constant truth get RMSE only. A group already
/// named "all" is reported once, as the overall row.
MetricReport regression_report(std::span<const double> truth, std::span<const double> prediction,
                               std::span<const std::string> groups);

/// Linear-interpolated quantile of a sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace dklvae
