#include "dklvae/cards.hpp"

#include <cmath>
#include <numbers>

namespace dklvae::cards {

namespace {

struct Point {
    double x;
    double y;
};

bool in_circle(Point p, Point c, double r) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    return dx * dx + dy * dy <= r * r;
}

double edge(Point a, Point b, Point p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

bool in_triangle(Point p, Point a, Point b, Point c) {
    const double d1 = edge(a, b, p);
    const double d2 = edge(b, c, p);
    const double d3 = edge(c, a, p);
    const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(has_neg && has_pos);
}

// Shapes live on [-1, 1]^2 with y pointing up.
bool heart(Point p) {
    return in_circle(p, {-0.22, 0.20}, 0.26) || in_circle(p, {0.22, 0.20}, 0.26) ||
           in_triangle(p, {-0.47, 0.12}, {0.47, 0.12}, {0.0, -0.60});
}

bool spade(Point p) {
    const bool blade = in_circle(p, {-0.22, -0.08}, 0.26) || in_circle(p, {0.22, -0.08}, 0.26) ||
                       in_triangle(p, {-0.47, 0.0}, {0.47, 0.0}, {0.0, 0.64});
    const bool stem = in_triangle(p, {0.0, -0.10}, {-0.18, -0.60}, {0.18, -0.60});
    return blade || stem;
}

bool club(Point p) {
    const bool lobes = in_circle(p, {0.0, 0.30}, 0.21) || in_circle(p, {-0.25, -0.07}, 0.21) ||
                       in_circle(p, {0.25, -0.07}, 0.21) || in_circle(p, {0.0, 0.06}, 0.13);
    const bool stem = in_triangle(p, {0.0, 0.0}, {-0.17, -0.60}, {0.17, -0.60});
    return lobes || stem;
}

bool diamond(Point p) {
    return std::abs(p.x) / 0.40 + std::abs(p.y) / 0.60 <= 1.0;
}

float pixel(const Image& img, long r, long c) {
    constexpr long n = static_cast<long>(kImageSize);
    if (r < 0 || r >= n || c < 0 || c >= n) {
        return 0.0f;
    }
    return img[static_cast<std::size_t>(r) * kImageSize + static_cast<std::size_t>(c)];
}

}  // namespace

std::string to_string(Suit s) {
    switch (s) {
        case Suit::clubs: return "clubs";
        case Suit::spades: return "spades";
        case Suit::hearts: return "hearts";
        case Suit::diamonds: return "diamonds";
    }
    return "clubs";
}

Suit suit_from_string(const std::string& name) {
    for (Suit s : kAllSuits) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw Error(ErrorKind::data, "unknown suit '" + name + "'");
}

void CardRanges::validate() const {
    if (!(angle_lo <= angle_hi) || !(shear_lo <= shear_hi) || !(translation_lo <= translation_hi)) {
        throw Error(ErrorKind::config, "card ranges: every range needs lo <= hi");
    }
    if (std::abs(shear_lo) >= 45.0 || std::abs(shear_hi) >= 45.0) {
        throw Error(ErrorKind::config, "card ranges: shear must stay within (-45, 45) degrees");
    }
}

Image render_suit_glyph(Suit suit) {
    Image img(kPixels, 0.0f);
    const double half = static_cast<double>(kImageSize) / 2.0;
    for (std::size_t r = 0; r < kImageSize; ++r) {
        for (std::size_t c = 0; c < kImageSize; ++c) {
            const Point p{(static_cast<double>(c) + 0.5 - half) / half,
                          (half - (static_cast<double>(r) + 0.5)) / half};
            bool inside = false;
            switch (suit) {
                case Suit::clubs: inside = club(p); break;
                case Suit::spades: inside = spade(p); break;
                case Suit::hearts: inside = heart(p); break;
                case Suit::diamonds: inside = diamond(p); break;
            }
            img[r * kImageSize + c] = inside ? 1.0f : 0.0f;
        }
    }
    return img;
}

Image affine_transform(const Image& image, double angle_deg, double shear_deg, double tx, double ty) {
    if (image.size() != kPixels) {
        throw Error(ErrorKind::shape, "affine_transform: expected a 48x48 image");
    }
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double k = std::tan(shear_deg * std::numbers::pi / 180.0);

    // Forward map in centred pixel coordinates (x right, y down):
    // p' = S * R * p + t with R = [[cos, sin], [-sin, cos]], S = [[1, k], [k, 1]].
    const double m00 = cos_t - k * sin_t;
    const double m01 = sin_t + k * cos_t;
    const double m10 = k * cos_t - sin_t;
    const double m11 = k * sin_t + cos_t;
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det;
    const double i01 = -m01 / det;
    const double i10 = -m10 / det;
    const double i11 = m00 / det;

    const double centre = (static_cast<double>(kImageSize) - 1.0) / 2.0;
    const double shift_x = tx * static_cast<double>(kImageSize);
    const double shift_y = ty * static_cast<double>(kImageSize);

    Image out(kPixels, 0.0f);
    for (std::size_t r = 0; r < kImageSize; ++r) {
        for (std::size_t c = 0; c < kImageSize; ++c) {
            const double qx = static_cast<double>(c) - centre - shift_x;
            const double qy = static_cast<double>(r) - centre - shift_y;
            const double sx = i00 * qx + i01 * qy + centre;
            const double sy = i10 * qx + i11 * qy + centre;
            const double fx0 = std::floor(sx);
            const double fy0 = std::floor(sy);
            const double fx = sx - fx0;
            const double fy = sy - fy0;
            const long c0 = static_cast<long>(fx0);
            const long r0 = static_cast<long>(fy0);
            const double v = (1.0 - fy) * ((1.0 - fx) * pixel(image, r0, c0) + fx * pixel(image, r0, c0 + 1)) +
                             fy * ((1.0 - fx) * pixel(image, r0 + 1, c0) + fx * pixel(image, r0 + 1, c0 + 1));
            out[r * kImageSize + c] = v >= 0.5 ? 1.0f : 0.0f;
        }
    }
    return out;
}

std::vector<CardSample> generate_card_dataset(std::size_t n, const Rng& rng, const CardRanges& ranges) {
    if (n == 0) {
        throw Error(ErrorKind::config, "generate_card_dataset: n must be at least 1");
    }
    ranges.validate();
    std::array<Image, 4> glyphs;
    for (Suit s : kAllSuits) {
        glyphs[static_cast<std::size_t>(s)] = render_suit_glyph(s);
    }
    std::vector<CardSample> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng local = rng.split(i);
        CardSample& s = samples[i];
        s.suit = static_cast<Suit>(local.uniform_index(4));
        s.angle = local.uniform(ranges.angle_lo, ranges.angle_hi);
        s.shear = local.uniform(ranges.shear_lo, ranges.shear_hi);
        s.tx = local.uniform(ranges.translation_lo, ranges.translation_hi);
        s.ty = local.uniform(ranges.translation_lo, ranges.translation_hi);
        s.image = affine_transform(glyphs[static_cast<std::size_t>(s.suit)], s.angle, s.shear, s.tx, s.ty);
    }
    return samples;
}

CardSplit split_by_angle(const std::vector<CardSample>& samples, const AngleSplit& split) {
    std::vector<double> angles;
    angles.reserve(samples.size());
    for (const auto& s : samples) {
        angles.push_back(s.angle);
    }
    const SplitIndices idx = split_by_value(angles, split);
    CardSplit out;
    for (auto i : idx.train) out.train.push_back(samples[i]);
    for (auto i : idx.test) out.test.push_back(samples[i]);
    out.dropped = idx.dropped.size();
    return out;
}

std::array<double, 2> centroid(const Image& image) {
    double sx = 0.0, sy = 0.0, total = 0.0;
    for (std::size_t r = 0; r < kImageSize; ++r) {
        for (std::size_t c = 0; c < kImageSize; ++c) {
            const double v = image[r * kImageSize + c];
            sx += v * static_cast<double>(c);
            sy += v * static_cast<double>(r);
            total += v;
        }
    }
    if (total == 0.0) {
        return {0.0, 0.0};
    }
    return {sx / total, sy / total};
}

}  // namespace dklvae::cards
