#include "dklvae/split.hpp"

#include <algorithm>
#include <sstream>

#include "dklvae/error.hpp"

namespace dklvae {

void RangeSplit::validate() const {
    std::vector<Interval> all = train_ranges;
    if (test_range) {
        all.push_back(*test_range);
    }
    for (const auto& r : all) {
        if (!(r.lo <= r.hi)) {
            std::ostringstream os;
            os << "split: interval [" << r.lo << ", " << r.hi << "] has lo > hi";
            throw Error(ErrorKind::config, os.str());
        }
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            if (std::max(all[i].lo, all[j].lo) < std::min(all[i].hi, all[j].hi)) {
                std::ostringstream os;
                os << "split: intervals [" << all[i].lo << ", " << all[i].hi << "] and [" << all[j].lo
                   << ", " << all[j].hi << "] overlap";
                throw Error(ErrorKind::config, os.str());
            }
        }
    }
}

Membership classify(const RangeSplit& split, double value) {
    for (const auto& r : split.train_ranges) {
        if (value >= r.lo && value < r.hi) {
            return Membership::train;
        }
    }
    if (split.test_range && value >= split.test_range->lo && value <= split.test_range->hi) {
        return Membership::test;
    }
    return Membership::dropped;
}

SplitIndices split_by_value(std::span<const double> values, const RangeSplit& split) {
    split.validate();
    SplitIndices out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        switch (classify(split, values[i])) {
            case Membership::train: out.train.push_back(i); break;
            case Membership::test: out.test.push_back(i); break;
            case Membership::dropped: out.dropped.push_back(i); break;
        }
    }
    return out;
}

}  // namespace dklvae
