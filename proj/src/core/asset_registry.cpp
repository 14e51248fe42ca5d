#include "batchdex/core/asset_registry.hpp"

#include <sstream>
#include <unordered_map>

namespace batchdex {

AssetRegistry AssetRegistry::parse(const std::string& text) {
    AssetRegistry reg;
    std::unordered_map<std::string, uint16_t> index;
    std::vector<std::pair<uint16_t, std::string>> pending_anchors;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line.substr(start));
        std::string sym, attr;
        ls >> sym;
        Entry e{sym, std::nullopt};
        while (ls >> attr) {
            if (attr.rfind("anchor=", 0) == 0) {
                pending_anchors.emplace_back(static_cast<uint16_t>(reg.entries_.size()), attr.substr(7));
            } else {
                throw MalformedError("unknown asset attribute: " + attr);
            }
        }
        if (index.contains(sym)) throw MalformedError("duplicate asset symbol: " + sym);
        if (reg.entries_.size() >= UINT16_MAX) throw MalformedError("too many assets");
        index[sym] = static_cast<uint16_t>(reg.entries_.size());
        reg.entries_.push_back(std::move(e));
    }
    for (auto& [idx, anchor_sym] : pending_anchors) {
        auto it = index.find(anchor_sym);
        if (it == index.end()) throw MalformedError("unknown anchor symbol: " + anchor_sym);
        reg.entries_[idx].anchor = it->second;
    }
    return reg;
}

AssetRegistry AssetRegistry::uniform(uint16_t n_assets) {
    AssetRegistry reg;
    reg.entries_.reserve(n_assets);
    for (uint16_t i = 0; i < n_assets; i++)
        reg.entries_.push_back(Entry{"A" + std::to_string(i), std::nullopt});
    return reg;
}

std::optional<AssetId> AssetRegistry::find(const std::string& symbol) const {
    for (uint16_t i = 0; i < entries_.size(); i++)
        if (entries_[i].symbol == symbol) return AssetId{i};
    return std::nullopt;
}

bool AssetRegistry::has_partition() const {
    for (const auto& e : entries_)
        if (e.anchor) return true;
    return false;
}

std::string AssetRegistry::to_text() const {
    std::string out;
    for (const auto& e : entries_) {
        out += e.symbol;
        if (e.anchor) out += " anchor=" + entries_[*e.anchor].symbol;
        out += "\n";
    }
    return out;
}

} // namespace batchdex
