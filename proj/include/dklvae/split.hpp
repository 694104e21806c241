#pragma once

#include <optional>
#include <span>
#include <vector>

namespace dklvae {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Interval&) const = default;
};

/// Assigns scalar labels (angles, targets) to train/test.
///
/// Train intervals are half-open [lo, hi) and checked in listed order; the
/// test interval is closed [lo, hi] and checked last. Values matching
/// nothing are dropped.
struct RangeSplit {
    std::vector<Interval> train_ranges;
    std::optional<Interval> test_range;

    bool operator==(const RangeSplit&) const = default;

    /// Rejects lo > hi and intervals whose interiors overlap. Shared
    /// endpoints are allowed.
    void validate() const;
};

enum class Membership { train, test, dropped };

Membership classify(const RangeSplit& split, double value);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> dropped;
};

SplitIndices split_by_value(std::span<const double> values, const RangeSplit& split);

}  // namespace dklvae
