#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "batchdex/core/errors.hpp"
#include "batchdex/trie/ephemeral_trie.hpp"
#include "batchdex/trie/hash.hpp"

namespace batchdex {

struct AlreadyDeletedError : std::runtime_error {
    explicit AlreadyDeletedError(const std::string& what) : std::runtime_error(what) {}
};

// Hashable Merkle-Patricia trie, fan-out 16, fixed key length per instance.
// Writers are phased: structural mutation is single-threaded, while delete
// marks may be set concurrently (atomic counters along the path). Hashes are
// recomputed lazily over dirty subtrees, once per block.
class MerkleTrie {
  public:
    struct KeyRange {
        std::vector<uint8_t> lo; // inclusive
        std::vector<uint8_t> hi; // exclusive; ignored when hi_unbounded
        bool hi_unbounded = false;
    };

    explicit MerkleTrie(size_t key_len_bytes) : key_len_(key_len_bytes) {}

    size_t key_len() const { return key_len_; }
    uint64_t live_size() const;
    uint64_t physical_size() const;
    bool empty() const { return live_size() == 0; }

    // Strict insert: DuplicateKeyError if present with a different value (or
    // delete-marked); identical (key, value) re-insert is a no-op.
    void insert(std::span<const uint8_t> key, std::span<const uint8_t> value);

    // Insert-or-replace; un-marks a delete-marked leaf.
    void upsert(std::span<const uint8_t> key, std::span<const uint8_t> value);

    // Replace the value of an existing live leaf (NotFoundError otherwise).
    void update_value(std::span<const uint8_t> key, std::span<const uint8_t> value);

    // Live lookup: delete-marked keys are absent.
    std::optional<std::span<const uint8_t>> lookup(std::span<const uint8_t> key) const;

    // Defers physical removal to compact(); increments deleted counters up
    // the path. Safe to call concurrently for distinct keys.
    void mark_delete(std::span<const uint8_t> key);

    // Physically removes marked leaves and collapses unary chains.
    void compact();

    // Merge per-thread insertion logs; set semantics, merge order invisible.
    void batch_merge(std::span<const EphemeralTrie* const> locals);

    // Canonical BLAKE2b-256 over node encodings. Compacts pending deletions
    // first so the digest is a pure function of the live key set.
    Digest root_hash();

    static Digest empty_hash();

    // In-order traversal over live leaves; return false from f to stop.
    void visit_in_order(const std::function<bool(std::span<const uint8_t> key,
                                                 std::span<const uint8_t> value)>& f) const;

    // Physically removes every live key < bound (or <= with include_equal).
    // Returns the number of leaves removed. Pending delete marks in the
    // removed range are discarded with it.
    uint64_t remove_keys_below(std::span<const uint8_t> bound, bool include_equal);

    // Splits the live key space into ranges with balanced live-leaf counts.
    std::vector<KeyRange> partition_work(size_t shards) const;

    uint64_t count_in_range(const KeyRange& r) const;

    // Full-walk recount of leaf/deleted counters; false if any node's cached
    // counter disagrees.
    bool validate_counts() const;

    // Structural dump for debugging and structure-equality tests.
    std::string dump_structure(bool with_hashes = false) const;

    // Debug: recompute every node hash from scratch and count cached entries
    // that disagree (stale caches).
    size_t count_stale_hashes() const;

  private:
    struct Node {
        std::vector<uint8_t> prefix; // nibbles
        std::array<std::unique_ptr<Node>, 16> children;
        uint16_t child_bitmap = 0;
        bool is_leaf = false;
        std::vector<uint8_t> value;
        std::atomic<bool> deleted{false};
        uint64_t leaf_count = 1;
        std::atomic<uint64_t> deleted_count{0};
        Digest hash{};
        std::atomic<bool> hash_valid{false};

        uint64_t live_count() const { return leaf_count - deleted_count.load(std::memory_order_relaxed); }
    };
    using NodePtr = std::unique_ptr<Node>;

    void insert_impl(std::span<const uint8_t> key, std::span<const uint8_t> value, bool allow_replace);
    static void insert_node(NodePtr& slot, const std::vector<uint8_t>& nib, size_t depth,
                            std::span<const uint8_t> value, bool allow_replace, bool& added,
                            int64_t& undeleted);
    static uint64_t compact_node(NodePtr& slot);
    static void merge_enode(NodePtr& slot, const EphemeralTrie& src, uint32_t src_idx, size_t skip);
    static NodePtr convert_enode(const EphemeralTrie& src, uint32_t src_idx, size_t skip);
    static Digest hash_node(Node& n);
    const Node* find_leaf(std::span<const uint8_t> key) const;

    size_t key_len_;
    NodePtr root_;
};

} // namespace batchdex
