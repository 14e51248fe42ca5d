#pragma once

#include <vector>

#include "batchdex/core/types.hpp"
#include "batchdex/core/wide.hpp"
#include "batchdex/demand/supply_curve.hpp"

namespace batchdex {

// Valuation-weighted surplus: an executed unit of an offer selling A for B at
// limit r earns p_A - r * p_B. Realized sums over executed units, unrealized
// over in-the-money units left resting. Scale is 2^64 * units throughout.
struct UtilityReport {
    uint256_t realized{};
    uint256_t unrealized{};
    bool infinite = false; // nothing realized but surplus left on the table

    double ratio() const;
};

UtilityReport utility_report(const MarketCurves& curves, const std::vector<Price>& prices,
                             const std::vector<uint64_t>& x_units, ApproxParams params);

// 20 * unrealized <= realized, i.e. ratio <= 5%, computed exactly.
bool ratio_within_one_twentieth(const UtilityReport& r);

} // namespace batchdex
