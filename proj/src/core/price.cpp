#include "batchdex/core/price.hpp"

#include <cmath>

namespace batchdex {

Price Price::from_double(double v) {
    if (!(v > 0) || !std::isfinite(v)) throw OverflowError("price must be positive finite");
    double scaled = v * static_cast<double>(uint64_t(1) << kKeyRadix);
    if (scaled >= static_cast<double>(uint64_t(1) << 48)) throw PriceOutOfKeyRange("price above key range");
    uint64_t key_units = static_cast<uint64_t>(scaled);
    if (key_units == 0) key_units = 1;
    return Price::from_raw(key_units << (kRadix - kKeyRadix));
}

} // namespace batchdex
