#include "dklvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dklvae/textio.hpp"

namespace dklvae {

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat, const char* who) {
    if (y.size() != yhat.size()) {
        throw Error(ErrorKind::shape, std::string(who) + ": lengths differ (" + std::to_string(y.size()) +
                                          " vs " + std::to_string(yhat.size()) + ")");
    }
    if (y.empty()) {
        throw Error(ErrorKind::shape, std::string(who) + ": empty input");
    }
}

constexpr std::size_t kSsimWindow = 8;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

constexpr const char* kReportFormat = "# dklvae-metrics v1";

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "rmse");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "r2");
    if (y.size() < 2) {
        throw Error(ErrorKind::shape, "r2: need at least two points");
    }
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) {
        throw Error(ErrorKind::data, "r2: undefined for constant targets");
    }
    return 1.0 - ss_res / ss_tot;
}

double ssim(std::span<const float> a, std::span<const float> b, std::size_t width, std::size_t height) {
    if (a.size() != width * height || b.size() != width * height) {
        throw Error(ErrorKind::shape, "ssim: images must both have " + std::to_string(width) + "x" +
                                          std::to_string(height) + " pixels");
    }
    if (width < kSsimWindow || height < kSsimWindow) {
        throw Error(ErrorKind::shape, "ssim: image smaller than the 8x8 window");
    }
    constexpr double count = static_cast<double>(kSsimWindow * kSsimWindow);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r0 = 0; r0 + kSsimWindow <= height; ++r0) {
        for (std::size_t c0 = 0; c0 + kSsimWindow <= width; ++c0) {
            double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (std::size_t r = r0; r < r0 + kSsimWindow; ++r) {
                for (std::size_t c = c0; c < c0 + kSsimWindow; ++c) {
                    const double va = a[r * width + c];
                    const double vb = b[r * width + c];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            const double ma = sa / count;
            const double mb = sb / count;
            const double var_a = saa / count - ma * ma;
            const double var_b = sbb / count - mb * mb;
            const double cov = sab / count - ma * mb;
            total += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
                     ((ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

double exact_match_rate(std::span<const OneHotPair> pairs) {
    if (pairs.empty()) {
        throw Error(ErrorKind::shape, "exact_match_rate: empty input");
    }
    std::size_t hits = 0;
    for (const auto& [a, b] : pairs) {
        if (a.rows() != b.rows() || a.cols() != b.cols()) {
            throw Error(ErrorKind::shape, "exact_match_rate: pair shapes " + shape_string(a) + " and " +
                                              shape_string(b) + " differ");
        }
        if (a == b) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

std::size_t row_errors(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::shape, "row_errors: shapes " + shape_string(a) + " and " + shape_string(b) +
                                          " differ");
    }
    std::size_t errors = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        Eigen::Index ia = 0, ib = 0;
        a.row(i).maxCoeff(&ia);
        b.row(i).maxCoeff(&ib);
        if (ia != ib) ++errors;
    }
    return errors;
}

ErrorHistogram reconstruction_error_histogram(std::span<const OneHotPair> pairs) {
    if (pairs.empty()) {
        throw Error(ErrorKind::shape, "reconstruction_error_histogram: empty input");
    }
    ErrorHistogram h;
    h.counts.assign(static_cast<std::size_t>(pairs.front().first.rows()) + 1, 0);
    for (const auto& [a, b] : pairs) {
        const std::size_t e = row_errors(a, b);
        if (e >= h.counts.size()) h.counts.resize(e + 1, 0);
        ++h.counts[e];
    }
    h.total = pairs.size();
    std::size_t running = 0;
    for (std::size_t c : h.counts) {
        running += c;
        h.cumulative.push_back(static_cast<double>(running) / static_cast<double>(h.total));
    }
    return h;
}

void MetricReport::add(std::string metric, std::string group, double value, std::size_t n) {
    rows.push_back({std::move(metric), std::move(group), value, n});
}

const MetricRow& MetricReport::find(const std::string& metric, const std::string& group) const {
    for (const auto& r : rows) {
        if (r.metric == metric && r.group == group) return r;
    }
    throw Error(ErrorKind::data, "metric report has no row " + metric + "/" + group);
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << kReportFormat << "\nmetric,group,value,n\n";
    for (const auto& r : rows) {
        out << r.metric << ',' << r.group << ',' << format_double(r.value) << ',' << r.n << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

MetricReport MetricReport::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != kReportFormat) {
        throw Error(ErrorKind::format, path.string() + ": not a metrics file (bad version line)");
    }
    std::getline(in, line);
    MetricReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) {
            throw Error(ErrorKind::format, path.string() + ": expected 4 fields in '" + line + "'");
        }
        report.add(f[0], f[1], parse_double(f[2]), parse_u64(f[3]));
    }
    return report;
}

MetricReport regression_report(std::span<const double> truth, std::span<const double> prediction,
                               std::span<const std::string> groups) {
    check_pair(truth, prediction, "regression_report");
    if (groups.size() != truth.size()) {
        throw Error(ErrorKind::shape, "regression_report: group labels do not match the data");
    }
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_group;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        by_group[groups[i]].first.push_back(truth[i]);
        by_group[groups[i]].second.push_back(prediction[i]);
    }
    MetricReport report;
    auto emit = [&report](const std::string& group, const std::vector<double>& y, const std::vector<double>& p) {
        report.add("rmse", group, rmse(y, p), y.size());
        const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
        if (y.size() >= 2 && !constant) {
            report.add("r2", group, r2(y, p), y.size());
        }
    };
    for (const auto& [g, yp] : by_group) {
        if (g != "all") emit(g, yp.first, yp.second);
    }
    emit("all", std::vector<double>(truth.begin(), truth.end()),
         std::vector<double>(prediction.begin(), prediction.end()));
    return report;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorKind::shape, "quantile: empty input");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace dklvae
