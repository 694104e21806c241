#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "dklvae/cards.hpp"
#include "dklvae/metrics.hpp"

using namespace dklvae;

TEST(Rmse, Cases) {
    const std::vector<double> y{1.0, -2.0, 3.5};
    EXPECT_EQ(rmse(y, y), 0.0);
    EXPECT_NEAR(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}), std::sqrt(12.5), 1e-15);
    EXPECT_THROW(rmse(y, std::vector<double>{1.0}), Error);
    EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(R2, Cases) {
    const std::vector<double> y{1.0, 2.0, 4.0, 8.0};
    EXPECT_EQ(r2(y, y), 1.0);
    const double mean = 15.0 / 4.0;
    EXPECT_NEAR(r2(y, std::vector<double>(4, mean)), 0.0, 1e-15);
    EXPECT_LT(r2(y, std::vector<double>{8, 4, 2, 1}), 0.0);
    EXPECT_THROW(r2(std::vector<double>{2, 2}, std::vector<double>{1, 3}), Error);
}

TEST(Ssim, IdentitySymmetryAndInversion) {
    const auto g = cards::render_suit_glyph(cards::Suit::hearts);
    const auto h = cards::affine_transform(cards::render_suit_glyph(cards::Suit::clubs), 10, 3, 0.05, 0);
    EXPECT_NEAR(ssim(g, g, 48, 48), 1.0, 1e-12);
    EXPECT_NEAR(ssim(g, h, 48, 48), ssim(h, g, 48, 48), 1e-12);
    std::vector<float> inv(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) inv[i] = 1.0f - g[i];
    EXPECT_LT(ssim(g, inv, 48, 48), 0.2);
    EXPECT_LT(ssim(g, h, 48, 48), 1.0);
    EXPECT_THROW(ssim(g, std::vector<float>(10), 48, 48), Error);
    EXPECT_THROW(ssim(std::vector<float>(16), std::vector<float>(16), 4, 4), Error);
}

TEST(ExactMatch, Cases) {
    Matrix a = Matrix::Identity(3, 3);
    Matrix b = a;
    b(1, 1) = 0;
    b(1, 2) = 1;
    const std::vector<OneHotPair> same{{a, a}, {a, a}};
    const std::vector<OneHotPair> half{{a, a}, {a, b}};
    EXPECT_EQ(exact_match_rate(same), 1.0);
    EXPECT_EQ(exact_match_rate(half), 0.5);
    EXPECT_EQ(row_errors(a, b), 1u);
}

TEST(ErrorHistogramTest, Buckets) {
    const Matrix a = Matrix::Identity(4, 4);
    Matrix two = a;
    two.row(0).swap(two.row(1));
    const std::vector<OneHotPair> pairs{{a, a}, {a, two}};
    const ErrorHistogram h = reconstruction_error_histogram(pairs);
    ASSERT_EQ(h.counts.size(), 5u);
    EXPECT_EQ(h.counts[0], 1u);
    EXPECT_EQ(h.counts[2], 1u);
    EXPECT_EQ(h.total, 2u);
    EXPECT_EQ(h.cumulative[1], 0.5);
    EXPECT_EQ(h.cumulative[4], 1.0);
}

TEST(Report, PerGroupRowsAndCsvRoundTrip) {
    const std::vector<double> y{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> p{1.1, 2, 2.9, 4, 5.2, 6, 7, 7.5};
    const std::vector<std::string> g{"clubs", "clubs", "spades", "spades", "hearts", "hearts", "diamonds", "diamonds"};
    const MetricReport r = regression_report(y, p, g);
    std::size_t rmse_rows = 0;
    for (const auto& row : r.rows) rmse_rows += row.metric == "rmse";
    EXPECT_EQ(rmse_rows, 5u);
    EXPECT_EQ(r.find("rmse", "all").n, 8u);
    EXPECT_NEAR(r.find("rmse", "clubs").value, std::sqrt(0.01 / 2.0), 1e-12);
    EXPECT_THROW(r.find("rmse", "jokers"), Error);

    const auto path = std::filesystem::temp_directory_path() / "dklvae_test_metrics.csv";
    r.write_csv(path);
    const MetricReport back = MetricReport::read_csv(path);
    ASSERT_EQ(back.rows.size(), r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].metric, r.rows[i].metric);
        EXPECT_EQ(back.rows[i].group, r.rows[i].group);
        EXPECT_EQ(back.rows[i].value, r.rows[i].value);
        EXPECT_EQ(back.rows[i].n, r.rows[i].n);
    }
    std::filesystem::remove(path);
}

TEST(Report, GroupNamedAllIsNotDuplicated) {
    const std::vector<double> y{1, 2, 3};
    const std::vector<double> p{1, 2, 4};
    const std::vector<std::string> g(3, "all");
    const MetricReport r = regression_report(y, p, g);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].metric, "rmse");
    EXPECT_EQ(r.rows[1].metric, "r2");
}

TEST(Quantile, Interpolates) {
    EXPECT_EQ(quantile({3, 1, 2}, 0.5), 2.0);
    EXPECT_EQ(quantile({0, 10}, 0.1), 1.0);
    EXPECT_EQ(quantile({5}, 0.9), 5.0);
    EXPECT_THROW(quantile({}, 0.5), Error);
}
