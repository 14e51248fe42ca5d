#include "batchdex/trie/ephemeral_trie.hpp"

#include <cstring>

namespace batchdex {

namespace {

void unpack_nibbles(std::span<const uint8_t> key, std::vector<uint8_t>& out) {
    out.resize(key.size() * 2);
    for (size_t i = 0; i < key.size(); i++) {
        out[2 * i] = key[i] >> 4;
        out[2 * i + 1] = key[i] & 0xF;
    }
}

void pack_prefix(EphemeralTrie::Node& n, const uint8_t* nibbles, size_t count) {
    n.prefix_len = static_cast<uint8_t>(count);
    std::memset(n.prefix, 0, sizeof(n.prefix));
    for (size_t i = 0; i < count; i++) {
        if (i % 2 == 0) n.prefix[i / 2] = uint8_t(nibbles[i] << 4);
        else n.prefix[i / 2] |= nibbles[i];
    }
}

} // namespace

uint32_t EphemeralTrie::alloc_node() {
    nodes_.emplace_back();
    return static_cast<uint32_t>(nodes_.size() - 1);
}

uint32_t EphemeralTrie::alloc_child_block() {
    uint32_t base = static_cast<uint32_t>(nodes_.size());
    nodes_.resize(nodes_.size() + 16);
    return base;
}

uint32_t EphemeralTrie::store_value(std::span<const uint8_t> value) {
    values_.emplace_back(value.begin(), value.end());
    return static_cast<uint32_t>(values_.size() - 1);
}

void EphemeralTrie::clear() {
    nodes_.clear();
    values_.clear();
    root_ = kNil;
    size_ = 0;
}

void EphemeralTrie::insert(std::span<const uint8_t> key, std::span<const uint8_t> value) {
    if (key.size() != key_len_) throw MalformedError("key length mismatch");
    std::vector<uint8_t> nib;
    unpack_nibbles(key, nib);

    if (root_ == kNil) {
        uint32_t idx = alloc_node();
        pack_prefix(nodes_[idx], nib.data(), nib.size());
        nodes_[idx].value_idx = store_value(value);
        root_ = idx;
        size_++;
        return;
    }

    uint32_t idx = root_;
    size_t depth = 0;
    while (true) {
        // common prefix length between node prefix and the remaining key
        size_t plen = nodes_[idx].prefix_len;
        size_t c = 0;
        while (c < plen && nodes_[idx].prefix_nibble(c) == nib[depth + c]) c++;

        if (c == plen) {
            depth += c;
            if (nodes_[idx].is_leaf()) {
                auto& existing = values_[nodes_[idx].value_idx];
                if (existing.size() == value.size() &&
                    std::memcmp(existing.data(), value.data(), value.size()) == 0)
                    return; // idempotent re-insert
                throw DuplicateKeyError("key already present with different value");
            }
            uint8_t next = nib[depth];
            if (nodes_[idx].child_bitmap & (1u << next)) {
                idx = nodes_[idx].child_base + next;
                depth++;
                continue;
            }
            uint32_t slot = nodes_[idx].child_base + next;
            pack_prefix(nodes_[slot], nib.data() + depth + 1, nib.size() - depth - 1);
            nodes_[slot].value_idx = store_value(value);
            nodes_[slot].child_base = kNil;
            nodes_[slot].child_bitmap = 0;
            nodes_[idx].child_bitmap |= (1u << next);
            size_++;
            return;
        }

        // split at divergence nibble c
        uint32_t block = alloc_child_block(); // may invalidate node refs
        Node old_copy = nodes_[idx];
        uint8_t old_nib = old_copy.prefix_nibble(c);
        uint8_t new_nib = nib[depth + c];

        Node& moved = nodes_[block + old_nib];
        moved = old_copy;
        {
            // shift prefix left by c+1 nibbles
            uint8_t tmp[56];
            unsigned rem = old_copy.prefix_len - static_cast<unsigned>(c) - 1;
            for (unsigned i = 0; i < rem; i++) tmp[i] = old_copy.prefix_nibble(static_cast<unsigned>(c) + 1 + i);
            pack_prefix(moved, tmp, rem);
            moved.child_base = old_copy.child_base;
            moved.child_bitmap = old_copy.child_bitmap;
            moved.value_idx = old_copy.value_idx;
        }

        Node& leaf = nodes_[block + new_nib];
        pack_prefix(leaf, nib.data() + depth + c + 1, nib.size() - depth - c - 1);
        leaf.value_idx = store_value(value);

        Node& branch = nodes_[idx];
        uint8_t tmp[56];
        for (size_t i = 0; i < c; i++) tmp[i] = old_copy.prefix_nibble(static_cast<unsigned>(i));
        pack_prefix(branch, tmp, c);
        branch.child_base = block;
        branch.child_bitmap = uint16_t((1u << old_nib) | (1u << new_nib));
        branch.value_idx = kNil;
        size_++;
        return;
    }
}

} // namespace batchdex
