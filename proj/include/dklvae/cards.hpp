#pragma once

#include <array>
#include <string>
#include <vector>

#include "dklvae/split.hpp"
#include "dklvae/tensor.hpp"

namespace dklvae::cards {

inline constexpr std::size_t kImageSize = 48;
inline constexpr std::size_t kPixels = kImageSize * kImageSize;

enum class Suit { clubs = 0, spades = 1, hearts = 2, diamonds = 3 };
inline constexpr std::array<Suit, 4> kAllSuits{Suit::clubs, Suit::spades, Suit::hearts, Suit::diamonds};

std::string to_string(Suit s);
Suit suit_from_string(const std::string& name);

/// 48x48 image, row-major, row 0 at the top.
using Image = std::vector<float>;

struct CardSample {
    Image image;
    Suit suit = Suit::clubs;
    double angle = 0.0;  // degrees
    double shear = 0.0;  // degrees, applied to both axes
    double tx = 0.0;     // fraction of the image width
    double ty = 0.0;     // fraction of the image height

    bool operator==(const CardSample&) const = default;
};

/// Sampling ranges of the augmentation parameters.
struct CardRanges {
    double angle_lo = -30.0, angle_hi = 30.0;
    double shear_lo = -10.0, shear_hi = 10.0;
    double translation_lo = -0.1, translation_hi = 0.1;

    bool operator==(const CardRanges&) const = default;
    void validate() const;
};

/// Procedural binary glyph, centred, foreground = 1.
Image render_suit_glyph(Suit suit);

/// Rotation (counter-clockwise on screen for positive angles), then equal
/// shear on both axes, then translation, all about the image centre. Each
/// output pixel is inverse-mapped into the source, sampled bilinearly with
/// out-of-bounds reads as 0, and thresholded at 0.5.
Image affine_transform(const Image& image, double angle_deg, double shear_deg, double tx, double ty);

/// Sample i is drawn from rng.split(i): suit, angle, shear, tx, ty in that order.
std::vector<CardSample> generate_card_dataset(std::size_t n, const Rng& rng,
                                              const CardRanges& ranges = {});

/// Angle-based train/test assignment (see RangeSplit for the boundary rules).
using AngleSplit = RangeSplit;

struct CardSplit {
    std::vector<CardSample> train;
    std::vector<CardSample> test;
    std::size_t dropped = 0;
};

CardSplit split_by_angle(const std::vector<CardSample>& samples, const AngleSplit& split);

/// Foreground centroid (x, y) in pixel coordinates.
std::array<double, 2> centroid(const Image& image);

}  // namespace dklvae::cards
