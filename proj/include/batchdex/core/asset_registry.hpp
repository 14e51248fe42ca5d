#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "batchdex/core/types.hpp"

namespace batchdex {

// Static asset list fixed at genesis. Text config: one symbol per line in
// index order; a stock declares its pricing anchor as "SYM anchor=OTHER".
// Lines starting with '#' and blank lines are ignored.
class AssetRegistry {
  public:
    struct Entry {
        std::string symbol;
        std::optional<uint16_t> anchor; // set for stocks in a decomposed market
    };

    static AssetRegistry parse(const std::string& text);
    static AssetRegistry uniform(uint16_t n_assets); // A0, A1, ...

    uint16_t count() const { return static_cast<uint16_t>(entries_.size()); }
    const Entry& entry(AssetId id) const { return entries_.at(id.id); }
    std::optional<AssetId> find(const std::string& symbol) const;
    bool has_partition() const;
    std::string to_text() const;

  private:
    std::vector<Entry> entries_;
};

} // namespace batchdex
