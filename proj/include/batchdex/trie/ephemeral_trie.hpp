#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "batchdex/core/errors.hpp"

namespace batchdex {

// Per-thread, per-block insertion log. Nodes live in a bump arena that is
// reset (capacity kept) at block end; the 16 potential children of a branch
// are allocated contiguously so a node holds just a base index and a bitmap.
class EphemeralTrie {
  public:
    static constexpr uint32_t kNil = UINT32_MAX;

    struct Node {
        uint32_t child_base = kNil; // branch: index of 16-slot block
        uint32_t value_idx = kNil;  // leaf: index into value pool
        uint16_t child_bitmap = 0;
        uint8_t prefix_len = 0; // nibbles
        uint8_t prefix[28];     // packed nibbles, high first

        bool is_leaf() const { return value_idx != kNil; }
        uint8_t prefix_nibble(unsigned i) const {
            uint8_t b = prefix[i / 2];
            return (i % 2 == 0) ? (b >> 4) : (b & 0xF);
        }
    };

    explicit EphemeralTrie(size_t key_len_bytes) : key_len_(key_len_bytes) {}

    size_t key_len() const { return key_len_; }
    uint64_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    // DuplicateKeyError if the key is present with a different value;
    // inserting an identical (key, value) pair is a no-op.
    void insert(std::span<const uint8_t> key, std::span<const uint8_t> value);

    // Bump-reset; arena capacity is retained for the next block.
    void clear();

    // In-order traversal of (key, value) pairs.
    template <typename F>
    void visit(F&& f) const {
        if (root_ == kNil) return;
        std::vector<uint8_t> key_nibbles;
        key_nibbles.reserve(key_len_ * 2);
        visit_node(root_, key_nibbles, f);
    }

    const Node& node(uint32_t idx) const { return nodes_[idx]; }
    uint32_t root() const { return root_; }
    std::span<const uint8_t> value(uint32_t idx) const { return values_[idx]; }

  private:
    template <typename F>
    void visit_node(uint32_t idx, std::vector<uint8_t>& key_nibbles, F&& f) const {
        const Node& n = nodes_[idx];
        size_t base = key_nibbles.size();
        for (unsigned i = 0; i < n.prefix_len; i++) key_nibbles.push_back(n.prefix_nibble(i));
        if (n.is_leaf()) {
            std::vector<uint8_t> key(key_len_);
            for (size_t i = 0; i < key_len_ * 2; i++) {
                if (i % 2 == 0) key[i / 2] = uint8_t(key_nibbles[i] << 4);
                else key[i / 2] |= key_nibbles[i];
            }
            f(std::span<const uint8_t>(key), std::span<const uint8_t>(values_[n.value_idx]));
        } else {
            for (unsigned nib = 0; nib < 16; nib++) {
                if (n.child_bitmap & (1u << nib)) {
                    key_nibbles.push_back(uint8_t(nib));
                    visit_node(n.child_base + nib, key_nibbles, f);
                    key_nibbles.pop_back();
                }
            }
        }
        key_nibbles.resize(base);
    }

    uint32_t alloc_node();
    uint32_t alloc_child_block();
    uint32_t store_value(std::span<const uint8_t> value);

    size_t key_len_;
    uint32_t root_ = kNil;
    uint64_t size_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::vector<uint8_t>> values_;
};

} // namespace batchdex
