#include "batchdex/trie/merkle_trie.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstdio>
#include <cstring>

namespace batchdex {

namespace {

std::vector<uint8_t> to_nibbles(std::span<const uint8_t> key) {
    std::vector<uint8_t> nib(key.size() * 2);
    for (size_t i = 0; i < key.size(); i++) {
        nib[2 * i] = key[i] >> 4;
        nib[2 * i + 1] = key[i] & 0xF;
    }
    return nib;
}

std::vector<uint8_t> from_nibbles(const std::vector<uint8_t>& nib) {
    std::vector<uint8_t> key(nib.size() / 2);
    for (size_t i = 0; i < nib.size(); i++) {
        if (i % 2 == 0) key[i / 2] = uint8_t(nib[i] << 4);
        else key[i / 2] |= nib[i];
    }
    return key;
}

void pack_nibbles(Hasher& h, const std::vector<uint8_t>& nib) {
    uint8_t acc = 0;
    for (size_t i = 0; i < nib.size(); i++) {
        if (i % 2 == 0) acc = uint8_t(nib[i] << 4);
        else { acc |= nib[i]; h.update_u8(acc); acc = 0; }
    }
    if (nib.size() % 2) h.update_u8(acc);
}

bool span_eq(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size()) == 0);
}

} // namespace

uint64_t MerkleTrie::live_size() const {
    return root_ ? root_->live_count() : 0;
}

uint64_t MerkleTrie::physical_size() const {
    return root_ ? root_->leaf_count : 0;
}

void MerkleTrie::insert(std::span<const uint8_t> key, std::span<const uint8_t> value) {
    insert_impl(key, value, false);
}

void MerkleTrie::upsert(std::span<const uint8_t> key, std::span<const uint8_t> value) {
    insert_impl(key, value, true);
}

void MerkleTrie::insert_impl(std::span<const uint8_t> key, std::span<const uint8_t> value,
                             bool allow_replace) {
    if (key.size() != key_len_) throw MalformedError("key length mismatch");
    auto nib = to_nibbles(key);
    bool added = false;
    int64_t undeleted = 0;
    insert_node(root_, nib, 0, value, allow_replace, added, undeleted);
}

void MerkleTrie::insert_node(NodePtr& slot, const std::vector<uint8_t>& nib, size_t depth,
                             std::span<const uint8_t> value, bool allow_replace, bool& added,
                             int64_t& undeleted) {
    if (!slot) {
        auto n = std::make_unique<Node>();
        n->prefix.assign(nib.begin() + depth, nib.end());
        n->is_leaf = true;
        n->value.assign(value.begin(), value.end());
        slot = std::move(n);
        added = true;
        return;
    }
    Node& n = *slot;
    size_t plen = n.prefix.size();
    size_t c = 0;
    while (c < plen && n.prefix[c] == nib[depth + c]) c++;

    if (c == plen) {
        depth += c;
        if (n.is_leaf) {
            if (n.deleted.load(std::memory_order_relaxed)) {
                if (!allow_replace) throw DuplicateKeyError("key is delete-marked");
                n.deleted.store(false, std::memory_order_relaxed);
                n.deleted_count.fetch_sub(1, std::memory_order_relaxed);
                undeleted++;
                n.value.assign(value.begin(), value.end());
            } else if (span_eq(n.value, value)) {
                // idempotent
            } else if (allow_replace) {
                n.value.assign(value.begin(), value.end());
            } else {
                throw DuplicateKeyError("key already present with different value");
            }
            n.hash_valid.store(false, std::memory_order_relaxed);
            return;
        }
        uint8_t next = nib[depth];
        int64_t sub_undeleted = 0;
        insert_node(n.children[next], nib, depth + 1, value, allow_replace, added, sub_undeleted);
        n.child_bitmap |= uint16_t(1u << next);
        if (added) n.leaf_count++;
        if (sub_undeleted) {
            n.deleted_count.fetch_sub(sub_undeleted, std::memory_order_relaxed);
            undeleted += sub_undeleted;
        }
        n.hash_valid.store(false, std::memory_order_relaxed);
        return;
    }

    // split at divergence; the shortened node's cached hash no longer
    // matches its prefix
    auto branch = std::make_unique<Node>();
    branch->prefix.assign(n.prefix.begin(), n.prefix.begin() + c);
    branch->is_leaf = false;
    uint8_t old_nib = n.prefix[c];
    uint8_t new_nib = nib[depth + c];
    n.prefix.erase(n.prefix.begin(), n.prefix.begin() + c + 1);
    n.hash_valid.store(false, std::memory_order_relaxed);
    branch->leaf_count = n.leaf_count + 1;
    branch->deleted_count.store(n.deleted_count.load(std::memory_order_relaxed), std::memory_order_relaxed);
    branch->children[old_nib] = std::move(slot);

    auto leaf = std::make_unique<Node>();
    leaf->prefix.assign(nib.begin() + depth + c + 1, nib.end());
    leaf->is_leaf = true;
    leaf->value.assign(value.begin(), value.end());
    branch->children[new_nib] = std::move(leaf);
    branch->child_bitmap = uint16_t((1u << old_nib) | (1u << new_nib));
    slot = std::move(branch);
    added = true;
}

void MerkleTrie::update_value(std::span<const uint8_t> key, std::span<const uint8_t> value) {
    if (key.size() != key_len_) throw MalformedError("key length mismatch");
    auto nib = to_nibbles(key);
    Node* n = root_.get();
    size_t depth = 0;
    std::vector<Node*> path;
    while (n) {
        path.push_back(n);
        size_t plen = n->prefix.size();
        if (plen > nib.size() - depth || !std::equal(n->prefix.begin(), n->prefix.end(), nib.begin() + depth))
            throw NotFoundError("key not found");
        depth += plen;
        if (n->is_leaf) {
            if (n->deleted.load(std::memory_order_relaxed)) throw NotFoundError("key is delete-marked");
            n->value.assign(value.begin(), value.end());
            for (auto* p : path) p->hash_valid.store(false, std::memory_order_relaxed);
            return;
        }
        uint8_t next = nib[depth];
        if (!(n->child_bitmap & (1u << next))) throw NotFoundError("key not found");
        n = n->children[next].get();
        depth++;
    }
    throw NotFoundError("key not found");
}

const MerkleTrie::Node* MerkleTrie::find_leaf(std::span<const uint8_t> key) const {
    if (key.size() != key_len_) return nullptr;
    auto nib = to_nibbles(key);
    const Node* n = root_.get();
    size_t depth = 0;
    while (n) {
        size_t plen = n->prefix.size();
        if (plen > nib.size() - depth || !std::equal(n->prefix.begin(), n->prefix.end(), nib.begin() + depth))
            return nullptr;
        depth += plen;
        if (n->is_leaf) return depth == nib.size() ? n : nullptr;
        uint8_t next = nib[depth];
        if (!(n->child_bitmap & (1u << next))) return nullptr;
        n = n->children[next].get();
        depth++;
    }
    return nullptr;
}

std::optional<std::span<const uint8_t>> MerkleTrie::lookup(std::span<const uint8_t> key) const {
    const Node* leaf = find_leaf(key);
    if (!leaf || leaf->deleted.load(std::memory_order_relaxed)) return std::nullopt;
    return std::span<const uint8_t>(leaf->value);
}

void MerkleTrie::mark_delete(std::span<const uint8_t> key) {
    if (key.size() != key_len_) throw MalformedError("key length mismatch");
    auto nib = to_nibbles(key);
    Node* n = root_.get();
    size_t depth = 0;
    std::vector<Node*> path;
    while (n) {
        path.push_back(n);
        size_t plen = n->prefix.size();
        if (plen > nib.size() - depth || !std::equal(n->prefix.begin(), n->prefix.end(), nib.begin() + depth))
            throw NotFoundError("key not found");
        depth += plen;
        if (n->is_leaf) {
            bool expected = false;
            if (!n->deleted.compare_exchange_strong(expected, true, std::memory_order_acq_rel))
                throw AlreadyDeletedError("key already delete-marked");
            for (auto* p : path) {
                p->deleted_count.fetch_add(1, std::memory_order_relaxed);
                p->hash_valid.store(false, std::memory_order_relaxed);
            }
            return;
        }
        uint8_t next = nib[depth];
        if (!(n->child_bitmap & (1u << next))) throw NotFoundError("key not found");
        n = n->children[next].get();
        depth++;
    }
    throw NotFoundError("key not found");
}

uint64_t MerkleTrie::compact_node(NodePtr& slot) {
    Node& n = *slot;
    if (n.is_leaf) {
        if (n.deleted.load(std::memory_order_relaxed)) {
            slot.reset();
            return 1;
        }
        return 0;
    }
    if (n.deleted_count.load(std::memory_order_relaxed) == 0) return 0;

    uint64_t removed = 0;
    for (unsigned nib = 0; nib < 16; nib++) {
        if (!(n.child_bitmap & (1u << nib))) continue;
        removed += compact_node(n.children[nib]);
        if (!n.children[nib]) n.child_bitmap &= uint16_t(~(1u << nib));
    }
    assert(removed == n.deleted_count.load(std::memory_order_relaxed));
    n.leaf_count -= removed;
    n.deleted_count.store(0, std::memory_order_relaxed);
    n.hash_valid.store(false, std::memory_order_relaxed);

    if (n.leaf_count == 0) {
        slot.reset();
        return removed;
    }
    if (std::popcount(n.child_bitmap) == 1) {
        unsigned nib = static_cast<unsigned>(std::countr_zero(n.child_bitmap));
        NodePtr child = std::move(n.children[nib]);
        std::vector<uint8_t> merged = n.prefix;
        merged.push_back(uint8_t(nib));
        merged.insert(merged.end(), child->prefix.begin(), child->prefix.end());
        child->prefix = std::move(merged);
        child->hash_valid.store(false, std::memory_order_relaxed);
        slot = std::move(child);
    }
    return removed;
}

void MerkleTrie::compact() {
    if (root_) compact_node(root_);
}

MerkleTrie::NodePtr MerkleTrie::convert_enode(const EphemeralTrie& src, uint32_t src_idx, size_t skip) {
    const auto& sn = src.node(src_idx);
    auto n = std::make_unique<Node>();
    n->prefix.reserve(sn.prefix_len - skip);
    for (unsigned i = static_cast<unsigned>(skip); i < sn.prefix_len; i++)
        n->prefix.push_back(sn.prefix_nibble(i));
    if (sn.is_leaf()) {
        n->is_leaf = true;
        auto v = src.value(sn.value_idx);
        n->value.assign(v.begin(), v.end());
        n->leaf_count = 1;
    } else {
        n->is_leaf = false;
        n->leaf_count = 0;
        for (unsigned nib = 0; nib < 16; nib++) {
            if (!(sn.child_bitmap & (1u << nib))) continue;
            n->children[nib] = convert_enode(src, sn.child_base + nib, 0);
            n->child_bitmap |= uint16_t(1u << nib);
            n->leaf_count += n->children[nib]->leaf_count;
        }
    }
    return n;
}

void MerkleTrie::merge_enode(NodePtr& slot, const EphemeralTrie& src, uint32_t src_idx, size_t skip) {
    if (!slot) {
        slot = convert_enode(src, src_idx, skip);
        return;
    }
    const auto& sn = src.node(src_idx);
    Node& n = *slot;
    size_t eff_len = sn.prefix_len - skip;
    size_t plen = n.prefix.size();
    size_t c = 0;
    while (c < plen && c < eff_len && n.prefix[c] == sn.prefix_nibble(static_cast<unsigned>(skip + c))) c++;

    if (c < plen) {
        // split target at c, then retry against the shortened structure
        auto branch = std::make_unique<Node>();
        branch->prefix.assign(n.prefix.begin(), n.prefix.begin() + c);
        branch->is_leaf = false;
        uint8_t old_nib = n.prefix[c];
        n.prefix.erase(n.prefix.begin(), n.prefix.begin() + c + 1);
        n.hash_valid.store(false, std::memory_order_relaxed);
        branch->leaf_count = n.leaf_count;
        branch->deleted_count.store(n.deleted_count.load(std::memory_order_relaxed), std::memory_order_relaxed);
        branch->children[old_nib] = std::move(slot);
        branch->child_bitmap = uint16_t(1u << old_nib);
        slot = std::move(branch);
        merge_enode(slot, src, src_idx, skip);
        return;
    }

    // target prefix fully matched
    if (c == eff_len) {
        if (n.is_leaf) {
            if (n.deleted.load(std::memory_order_relaxed))
                throw DuplicateKeyError("merge onto delete-marked key");
            auto v = src.value(sn.value_idx);
            if (!span_eq(n.value, v)) throw DuplicateKeyError("merge key conflict");
            return;
        }
        uint64_t lc = 0, dc = 0;
        for (unsigned nib = 0; nib < 16; nib++) {
            if (sn.child_bitmap & (1u << nib)) {
                merge_enode(n.children[nib], src, sn.child_base + nib, 0);
                n.child_bitmap |= uint16_t(1u << nib);
            }
            if (n.child_bitmap & (1u << nib)) {
                lc += n.children[nib]->leaf_count;
                dc += n.children[nib]->deleted_count.load(std::memory_order_relaxed);
            }
        }
        n.leaf_count = lc;
        n.deleted_count.store(dc, std::memory_order_relaxed);
        n.hash_valid.store(false, std::memory_order_relaxed);
        return;
    }

    // src continues below the target node (target must be a branch)
    uint8_t next = sn.prefix_nibble(static_cast<unsigned>(skip + c));
    uint64_t before = n.children[next] ? n.children[next]->leaf_count : 0;
    merge_enode(n.children[next], src, src_idx, skip + c + 1);
    n.child_bitmap |= uint16_t(1u << next);
    n.leaf_count += n.children[next]->leaf_count - before;
    n.hash_valid.store(false, std::memory_order_relaxed);
}

void MerkleTrie::batch_merge(std::span<const EphemeralTrie* const> locals) {
    for (const auto* local : locals) {
        if (!local || local->empty()) continue;
        if (local->key_len() != key_len_) throw MalformedError("key length mismatch in merge");
        merge_enode(root_, *local, local->root(), 0);
    }
}

Digest MerkleTrie::empty_hash() {
    uint8_t tag = 0x02;
    return hash_bytes({&tag, 1});
}

Digest MerkleTrie::hash_node(Node& n) {
    if (n.hash_valid.load(std::memory_order_relaxed)) return n.hash;
    Hasher h;
    if (n.is_leaf) {
        h.update_u8(0x00);
        h.update_u8(static_cast<uint8_t>(n.prefix.size()));
        pack_nibbles(h, n.prefix);
        h.update_u32(static_cast<uint32_t>(n.value.size()));
        h.update(n.value);
    } else {
        h.update_u8(0x01);
        h.update_u8(static_cast<uint8_t>(n.prefix.size()));
        pack_nibbles(h, n.prefix);
        h.update_u16(n.child_bitmap);
        for (unsigned nib = 0; nib < 16; nib++) {
            if (!(n.child_bitmap & (1u << nib))) continue;
            Digest d = hash_node(*n.children[nib]);
            h.update(d);
        }
    }
    n.hash = h.finish();
    n.hash_valid.store(true, std::memory_order_relaxed);
    return n.hash;
}

Digest MerkleTrie::root_hash() {
    compact();
    if (!root_) return empty_hash();
    return hash_node(*root_);
}

void MerkleTrie::visit_in_order(
    const std::function<bool(std::span<const uint8_t>, std::span<const uint8_t>)>& f) const {
    if (!root_) return;
    std::vector<uint8_t> path;
    path.reserve(key_len_ * 2);
    // returns false to stop the whole traversal
    std::function<bool(const Node&)> rec = [&](const Node& n) -> bool {
        size_t base = path.size();
        path.insert(path.end(), n.prefix.begin(), n.prefix.end());
        bool keep_going = true;
        if (n.is_leaf) {
            if (!n.deleted.load(std::memory_order_relaxed)) {
                auto key = from_nibbles(path);
                keep_going = f(key, n.value);
            }
        } else {
            for (unsigned nib = 0; nib < 16 && keep_going; nib++) {
                if (!(n.child_bitmap & (1u << nib))) continue;
                if (n.children[nib]->live_count() == 0) continue;
                path.push_back(uint8_t(nib));
                keep_going = rec(*n.children[nib]);
                path.pop_back();
            }
        }
        path.resize(base);
        return keep_going;
    };
    rec(*root_);
}

uint64_t MerkleTrie::remove_keys_below(std::span<const uint8_t> bound, bool include_equal) {
    if (bound.size() != key_len_) throw MalformedError("bound length mismatch");
    if (!root_) return 0;
    auto nib = to_nibbles(bound);

    struct Removed {
        uint64_t physical = 0;
        uint64_t marked = 0;
        uint64_t live() const { return physical - marked; }
    };

    // depth = number of bound nibbles already matched exactly above this node
    std::function<Removed(NodePtr&, size_t)> rec = [&](NodePtr& slot, size_t depth) -> Removed {
        Node& n = *slot;
        size_t plen = n.prefix.size();
        for (size_t j = 0; j < plen; j++) {
            if (n.prefix[j] < nib[depth + j]) {
                Removed r{n.leaf_count, n.deleted_count.load(std::memory_order_relaxed)};
                slot.reset();
                return r;
            }
            if (n.prefix[j] > nib[depth + j]) return {};
        }
        depth += plen;
        if (n.is_leaf) {
            // full key equals the bound
            if (include_equal) {
                Removed r{1, n.deleted.load(std::memory_order_relaxed) ? uint64_t(1) : 0};
                slot.reset();
                return r;
            }
            return {};
        }
        Removed total;
        uint8_t b = nib[depth];
        for (unsigned c = 0; c < 16; c++) {
            if (!(n.child_bitmap & (1u << c))) continue;
            if (c < b) {
                total.physical += n.children[c]->leaf_count;
                total.marked += n.children[c]->deleted_count.load(std::memory_order_relaxed);
                n.children[c].reset();
                n.child_bitmap &= uint16_t(~(1u << c));
            } else if (c == b) {
                Removed r = rec(n.children[c], depth + 1);
                if (!n.children[c]) n.child_bitmap &= uint16_t(~(1u << c));
                total.physical += r.physical;
                total.marked += r.marked;
            }
        }
        n.leaf_count -= total.physical;
        n.deleted_count.fetch_sub(total.marked, std::memory_order_relaxed);
        n.hash_valid.store(false, std::memory_order_relaxed);
        if (n.leaf_count == 0) {
            slot.reset();
            return total;
        }
        if (std::popcount(n.child_bitmap) == 1) {
            unsigned only = static_cast<unsigned>(std::countr_zero(n.child_bitmap));
            NodePtr child = std::move(n.children[only]);
            std::vector<uint8_t> merged = n.prefix;
            merged.push_back(uint8_t(only));
            merged.insert(merged.end(), child->prefix.begin(), child->prefix.end());
            child->prefix = std::move(merged);
            child->hash_valid.store(false, std::memory_order_relaxed);
            slot = std::move(child);
        }
        return total;
    };

    Removed r = rec(root_, 0);
    return r.live();
}

std::vector<MerkleTrie::KeyRange> MerkleTrie::partition_work(size_t shards) const {
    if (shards == 0) throw MalformedError("shards must be >= 1");
    uint64_t live = live_size();
    std::vector<KeyRange> ranges;

    auto nth_live_key = [&](uint64_t idx) -> std::vector<uint8_t> {
        const Node* n = root_.get();
        std::vector<uint8_t> path;
        while (true) {
            path.insert(path.end(), n->prefix.begin(), n->prefix.end());
            if (n->is_leaf) return from_nibbles(path);
            for (unsigned nib = 0; nib < 16; nib++) {
                if (!(n->child_bitmap & (1u << nib))) continue;
                uint64_t lc = n->children[nib]->live_count();
                if (idx < lc) {
                    path.push_back(uint8_t(nib));
                    n = n->children[nib].get();
                    break;
                }
                idx -= lc;
            }
        }
    };

    if (live == 0) {
        KeyRange r;
        r.lo.assign(key_len_, 0);
        r.hi_unbounded = true;
        ranges.push_back(std::move(r));
        return ranges;
    }

    uint64_t prev_idx = 0;
    std::vector<uint8_t> prev_lo(key_len_, 0);
    for (size_t s = 1; s <= shards; s++) {
        uint64_t next_idx = live * s / shards;
        if (next_idx == prev_idx && s < shards) continue;
        KeyRange r;
        r.lo = prev_lo;
        if (s == shards) {
            r.hi_unbounded = true;
        } else {
            r.hi = nth_live_key(next_idx);
            prev_lo = r.hi;
        }
        ranges.push_back(std::move(r));
        prev_idx = next_idx;
    }
    return ranges;
}

uint64_t MerkleTrie::count_in_range(const KeyRange& r) const {
    uint64_t count = 0;
    visit_in_order([&](std::span<const uint8_t> key, std::span<const uint8_t>) {
        bool ge_lo = std::lexicographical_compare(key.begin(), key.end(), r.lo.begin(), r.lo.end()) == false;
        bool lt_hi = r.hi_unbounded ||
                     std::lexicographical_compare(key.begin(), key.end(), r.hi.begin(), r.hi.end());
        if (ge_lo && lt_hi) count++;
        return true;
    });
    return count;
}

std::string MerkleTrie::dump_structure(bool with_hashes) const {
    std::string out;
    std::function<void(const Node&, int)> rec = [&](const Node& n, int depth) {
        out.append(static_cast<size_t>(depth), ' ');
        out += n.is_leaf ? "leaf[" : "branch[";
        for (uint8_t nib : n.prefix) out += "0123456789abcdef"[nib];
        out += "] lc=" + std::to_string(n.leaf_count);
        out += " dc=" + std::to_string(n.deleted_count.load());
        if (n.is_leaf) {
            out += " del=" + std::to_string(n.deleted.load() ? 1 : 0);
            out += " vlen=" + std::to_string(n.value.size());
        }
        if (with_hashes && n.hash_valid.load()) {
            out += " h=";
            for (int i = 0; i < 4; i++) {
                char buf[3];
                std::snprintf(buf, 3, "%02x", n.hash[i]);
                out += buf;
            }
        }
        out += "\n";
        if (!n.is_leaf) {
            for (unsigned nib = 0; nib < 16; nib++)
                if (n.child_bitmap & (1u << nib)) rec(*n.children[nib], depth + 1);
        }
    };
    if (root_) rec(*root_, 0);
    return out;
}

size_t MerkleTrie::count_stale_hashes() const {
    size_t stale = 0;
    std::function<Digest(const Node&)> rec = [&](const Node& n) -> Digest {
        Hasher h;
        if (n.is_leaf) {
            h.update_u8(0x00);
            h.update_u8(static_cast<uint8_t>(n.prefix.size()));
            pack_nibbles(h, n.prefix);
            h.update_u32(static_cast<uint32_t>(n.value.size()));
            h.update(n.value);
        } else {
            h.update_u8(0x01);
            h.update_u8(static_cast<uint8_t>(n.prefix.size()));
            pack_nibbles(h, n.prefix);
            h.update_u16(n.child_bitmap);
            for (unsigned nib = 0; nib < 16; nib++) {
                if (!(n.child_bitmap & (1u << nib))) continue;
                Digest d = rec(*n.children[nib]);
                h.update(d);
            }
        }
        Digest fresh = h.finish();
        if (n.hash_valid.load(std::memory_order_relaxed) && fresh != n.hash) stale++;
        return fresh;
    };
    if (root_) rec(*root_);
    return stale;
}

bool MerkleTrie::validate_counts() const {
    bool ok = true;
    std::function<std::pair<uint64_t, uint64_t>(const Node&)> rec =
        [&](const Node& n) -> std::pair<uint64_t, uint64_t> {
        if (n.is_leaf) {
            uint64_t marked = n.deleted.load(std::memory_order_relaxed) ? 1 : 0;
            if (n.leaf_count != 1 || n.deleted_count.load(std::memory_order_relaxed) != marked) ok = false;
            return {1, marked};
        }
        uint64_t lc = 0, dc = 0;
        for (unsigned nib = 0; nib < 16; nib++) {
            if (!(n.child_bitmap & (1u << nib))) continue;
            auto [l, d] = rec(*n.children[nib]);
            lc += l;
            dc += d;
        }
        if (n.leaf_count != lc || n.deleted_count.load(std::memory_order_relaxed) != dc) ok = false;
        return {lc, dc};
    };
    if (root_) rec(*root_);
    return ok;
}

} // namespace batchdex
