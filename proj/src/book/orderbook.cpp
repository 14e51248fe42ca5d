#include "batchdex/book/orderbook.hpp"

#include <cstring>

namespace batchdex {

namespace {

OfferKey key_from_span(std::span<const uint8_t> s) {
    OfferKey k;
    std::memcpy(k.data(), s.data(), k.size());
    return k;
}

} // namespace

ClearPairResult clear_pair(MerkleTrie& book, Price rate, Amount x, ApproxParams params) {
    ClearPairResult result;
    if (x.units == 0) return result;

    uint64_t remaining = x.units;
    book.visit_in_order([&](std::span<const uint8_t> key_span, std::span<const uint8_t> value) {
        OfferKey key = key_from_span(key_span);
        Price mp = price_from_key(key);
        if (mp > rate)
            throw InsufficientSupplyError("trade amount exceeds in-the-money endowment");
        Amount endowment = decode_endowment(value);
        Execution e;
        e.key = key;
        e.owner = offer_id_from_key(key);
        if (endowment.units <= remaining) {
            e.sold = endowment;
            e.partial = false;
        } else {
            e.sold = Amount{remaining};
            e.partial = true;
        }
        e.paid = execution_payout(e.sold, rate, params);
        remaining -= e.sold.units;
        result.executions.push_back(e);
        return remaining > 0;
    });

    if (remaining > 0)
        throw InsufficientSupplyError("trade amount exceeds available endowment");

    result.any_executed = !result.executions.empty();
    if (result.any_executed) {
        const Execution& last = result.executions.back();
        result.marginal_key = last.key;
        result.marginal_sold = last.sold;
        if (last.partial) {
            book.remove_keys_below(result.marginal_key, false);
            Amount rest = decode_endowment(*book.lookup(result.marginal_key)).checked_sub(last.sold);
            book.update_value(result.marginal_key, encode_endowment(rest));
        } else {
            book.remove_keys_below(result.marginal_key, true);
        }
    }
    return result;
}

ClearPairResult execute_from_marginal_key(MerkleTrie& book, const OfferKey& marginal_key,
                                          Amount marginal_sold, bool any_executed, Price rate,
                                          Amount x_expected, ApproxParams params) {
    ClearPairResult result;
    if (!any_executed) {
        if (x_expected.units != 0)
            throw MarginalKeyMismatch("header claims trade volume without a marginal key");
        return result;
    }

    // The marginal key is a bound: everything strictly below it trades in
    // full, the offer at the key (if present) trades marginal_sold, and a
    // zero partial amount leaves that offer resting.
    uint64_t total = 0;
    bool marginal_partial = false;
    bool executed_at_marginal = false;
    book.visit_in_order([&](std::span<const uint8_t> key_span, std::span<const uint8_t> value) {
        OfferKey key = key_from_span(key_span);
        if (key > marginal_key) return false;
        Amount endowment = decode_endowment(value);
        Execution e;
        e.key = key;
        e.owner = offer_id_from_key(key);
        if (key == marginal_key) {
            if (marginal_sold.units == 0) return false;
            if (marginal_sold > endowment)
                throw MarginalKeyMismatch("partial amount exceeds marginal endowment");
            e.sold = marginal_sold;
            e.partial = marginal_sold < endowment;
            marginal_partial = e.partial;
            executed_at_marginal = true;
        } else {
            e.sold = endowment;
            e.partial = false;
        }
        if (price_from_key(key) > rate)
            throw MarginalKeyMismatch("executed offer above the exchange rate");
        e.paid = execution_payout(e.sold, rate, params);
        total += e.sold.units;
        result.executions.push_back(e);
        return key != marginal_key;
    });

    if (total != x_expected.units)
        throw MarginalKeyMismatch("implied trade amount disagrees with header");

    result.any_executed = !result.executions.empty();
    result.marginal_key = marginal_key;
    result.marginal_sold = marginal_sold;
    if (marginal_partial) {
        book.remove_keys_below(marginal_key, false);
        Amount rest = decode_endowment(*book.lookup(marginal_key)).checked_sub(marginal_sold);
        book.update_value(marginal_key, encode_endowment(rest));
    } else {
        book.remove_keys_below(marginal_key, executed_at_marginal);
    }
    return result;
}

Amount cancel_offer(MerkleTrie& book, const OfferKey& key) {
    auto value = book.lookup(key);
    if (!value) {
        // raises NotFoundError (never present) or AlreadyDeletedError
        book.mark_delete(key);
        throw std::logic_error("cancel_offer: unreachable");
    }
    Amount refund = decode_endowment(*value);
    book.mark_delete(key);
    return refund;
}

OrderbookSet::OrderbookSet(uint16_t n_assets) : n_assets_(n_assets) {
    books_.reserve(pair_count());
    for (uint32_t i = 0; i < pair_count(); i++)
        books_.push_back(std::make_unique<MerkleTrie>(sizeof(OfferKey)));
}

uint64_t OrderbookSet::total_open_offers() const {
    uint64_t total = 0;
    for (const auto& b : books_) total += b->live_size();
    return total;
}

std::vector<Digest> OrderbookSet::root_hashes() {
    std::vector<Digest> roots;
    roots.reserve(books_.size());
    for (auto& b : books_) roots.push_back(b->root_hash());
    return roots;
}

} // namespace batchdex
