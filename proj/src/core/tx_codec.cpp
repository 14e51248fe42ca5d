#include "batchdex/core/tx.hpp"

namespace batchdex {

namespace {

struct Writer {
    std::vector<uint8_t> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) { buf.push_back(uint8_t(v >> 8)); buf.push_back(uint8_t(v)); }
    void u32(uint32_t v) { for (int i = 3; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void u64(uint64_t v) { for (int i = 7; i >= 0; i--) buf.push_back(uint8_t(v >> (8 * i))); }
    void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct Reader {
    std::span<const uint8_t> buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw MalformedError("truncated transaction");
    }
    uint8_t u8() { need(1); return buf[pos++]; }
    uint16_t u16() { need(2); uint16_t v = (uint16_t(buf[pos]) << 8) | buf[pos + 1]; pos += 2; return v; }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v = (v << 8) | buf[pos + i];
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++) v = (v << 8) | buf[pos + i];
        pos += 8;
        return v;
    }
    void bytes(uint8_t* p, size_t n) { need(n); memcpy(p, buf.data() + pos, n); pos += n; }
    bool done() const { return pos == buf.size(); }
};

constexpr uint16_t kMaxSigLen = 512;

void write_body(Writer& w, const Transaction& tx) {
    w.u64(tx.account);
    w.u64(tx.seq);
    w.u64(tx.fee.units);
    if (const auto* op = std::get_if<CreateAccountOp>(&tx.op)) {
        w.u8(0);
        w.u64(op->new_id);
        w.bytes(op->key.data(), op->key.size());
    } else if (const auto* op = std::get_if<CreateOfferOp>(&tx.op)) {
        w.u8(1);
        w.u16(op->sell.id);
        w.u16(op->buy.id);
        w.u64(op->endowment.units);
        w.u64(op->limit_price.raw());
    } else if (const auto* op = std::get_if<CancelOfferOp>(&tx.op)) {
        w.u8(2);
        w.u64(op->target.account);
        w.u64(op->target.seq);
    } else {
        const auto& pay = std::get<PaymentOp>(tx.op);
        w.u8(3);
        w.u64(pay.dest);
        w.u16(pay.asset.id);
        w.u64(pay.amount.units);
    }
    if (tx.signature.size() > kMaxSigLen) throw MalformedError("signature too long");
    w.u16(static_cast<uint16_t>(tx.signature.size()));
    w.bytes(tx.signature.data(), tx.signature.size());
}

Transaction read_body(Reader& r) {
    Transaction tx;
    tx.account = r.u64();
    tx.seq = r.u64();
    tx.fee = Amount{r.u64()};
    uint8_t tag = r.u8();
    switch (tag) {
    case 0: {
        CreateAccountOp op;
        op.new_id = r.u64();
        r.bytes(op.key.data(), op.key.size());
        tx.op = op;
        break;
    }
    case 1: {
        CreateOfferOp op;
        op.sell = AssetId{r.u16()};
        op.buy = AssetId{r.u16()};
        op.endowment = Amount{r.u64()};
        op.limit_price = Price::from_raw(r.u64());
        tx.op = op;
        break;
    }
    case 2: {
        CancelOfferOp op;
        op.target.account = r.u64();
        op.target.seq = r.u64();
        tx.op = op;
        break;
    }
    case 3: {
        PaymentOp op;
        op.dest = r.u64();
        op.asset = AssetId{r.u16()};
        op.amount = Amount{r.u64()};
        tx.op = op;
        break;
    }
    default:
        throw MalformedError("unknown op tag");
    }
    uint16_t sig_len = r.u16();
    if (sig_len > kMaxSigLen) throw MalformedError("signature too long");
    tx.signature.resize(sig_len);
    r.bytes(tx.signature.data(), sig_len);
    return tx;
}

} // namespace

std::vector<uint8_t> serialize_tx(const Transaction& tx) {
    Writer w;
    write_body(w, tx);
    return std::move(w.buf);
}

Transaction deserialize_tx(std::span<const uint8_t> bytes) {
    Reader r{bytes};
    Transaction tx = read_body(r);
    if (!r.done()) throw MalformedError("trailing bytes after transaction");
    return tx;
}

std::vector<uint8_t> serialize_tx_batch(const std::vector<Transaction>& txs) {
    Writer w;
    w.u32(static_cast<uint32_t>(txs.size()));
    for (const auto& tx : txs) {
        auto rec = serialize_tx(tx);
        w.u32(static_cast<uint32_t>(rec.size()));
        w.bytes(rec.data(), rec.size());
    }
    return std::move(w.buf);
}

std::vector<Transaction> deserialize_tx_batch(std::span<const uint8_t> bytes) {
    Reader r{bytes};
    uint32_t count = r.u32();
    std::vector<Transaction> txs;
    txs.reserve(count);
    for (uint32_t i = 0; i < count; i++) {
        uint32_t len = r.u32();
        r.need(len);
        txs.push_back(deserialize_tx(bytes.subspan(r.pos, len)));
        r.pos += len;
    }
    if (!r.done()) throw MalformedError("trailing bytes after batch");
    return txs;
}

} // namespace batchdex
