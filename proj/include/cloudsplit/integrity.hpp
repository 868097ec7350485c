#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/field.hpp"
#include "cloudsplit/shamir.hpp"

// Systematic parity encoding plus precomputed challenge tokens.
//
// A file becomes m data columns of `rows` elements; kp parity columns are
// data x G with G the Vandermonde matrix G[i][j] = (i+1)^j, and are then
// blinded by adding a keyed element stream. For every round i and column j
// a token is precomputed over r sampled rows; later the provider is sent
// the rows and coefficients and must return the same combination.
namespace cloudsplit::integrity {

using field::Element;
using field::FieldSpec;
using Column = std::vector<Element>;

class GeneratorMatrix {
public:
    GeneratorMatrix() = default;

    static GeneratorMatrix vandermonde(std::size_t m, std::size_t kp, const FieldSpec& f) {
        if (m >= f.order()) fail(ErrorCode::InvalidShape, "too many data columns for " + f.describe());
        GeneratorMatrix g;
        g.m_ = m;
        g.kp_ = kp;
        g.entries_.resize(m * kp);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < kp; ++j) g.entries_[i * kp + j] = f.pow(static_cast<Element>(i + 1), j);
        return g;
    }

    std::size_t data_columns() const { return m_; }
    std::size_t parity_columns() const { return kp_; }
    Element at(std::size_t data_col, std::size_t parity_col) const { return entries_[data_col * kp_ + parity_col]; }

private:
    std::size_t m_ = 0;
    std::size_t kp_ = 0;
    std::vector<Element> entries_;
};

inline std::vector<Column> parity_of(const std::vector<Column>& data, const GeneratorMatrix& g, const FieldSpec& f) {
    const std::size_t rows = data.empty() ? 0 : data.front().size();
    std::vector<Column> parity(g.parity_columns(), Column(rows, 0));
    for (std::size_t j = 0; j < g.parity_columns(); ++j)
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Element coeff = g.at(i, j);
            for (std::size_t r = 0; r < rows; ++r) parity[j][r] = f.add(parity[j][r], f.mul(coeff, data[i][r]));
        }
    return parity;
}

// Keyed element stream that masks parity column `parity_index`.
inline Column blinding_stream(ByteView master_key, std::size_t parity_index, std::size_t rows, const FieldSpec& f) {
    const auto key = derive_key(master_key, "cloudsplit.blind");
    DeterministicRng rng(key, "cloudsplit.blind/" + std::to_string(parity_index));
    Column out(rows);
    for (auto& e : out) e = static_cast<Element>(rng.uniform(f.order()));
    return out;
}

struct EncodedFile {
    FieldSpec field = FieldSpec::binary8();
    std::size_t rows = 0;
    std::vector<Column> data_columns;
    std::vector<Column> parity_columns;  // as stored remotely, i.e. blinded
    GeneratorMatrix generator;
    std::size_t original_length = 0;
    std::size_t padding = 0;

    std::size_t column_count() const { return data_columns.size() + parity_columns.size(); }
    const Column& column(std::size_t j) const {
        if (j >= column_count()) fail(ErrorCode::OutOfRange, "column " + std::to_string(j) + " out of range");
        return j < data_columns.size() ? data_columns[j] : parity_columns[j - data_columns.size()];
    }
};

inline EncodedFile encode_columns(std::vector<Column> data, std::size_t kp, const FieldSpec& f, ByteView master_key) {
    if (data.empty()) fail(ErrorCode::InvalidShape, "at least one data column is required");
    const std::size_t rows = data.front().size();
    if (rows == 0) fail(ErrorCode::InvalidShape, "columns must be nonempty");
    for (const auto& c : data) {
        if (c.size() != rows) fail(ErrorCode::InvalidShape, "columns differ in length");
        for (auto e : c)
            if (!f.contains(e)) fail(ErrorCode::InvalidShape, "element outside " + f.describe());
    }
    EncodedFile enc;
    enc.field = f;
    enc.rows = rows;
    enc.generator = GeneratorMatrix::vandermonde(data.size(), kp, f);
    enc.parity_columns = parity_of(data, enc.generator, f);
    for (std::size_t j = 0; j < kp; ++j) {
        const auto mask = blinding_stream(master_key, j, rows, f);
        for (std::size_t r = 0; r < rows; ++r) enc.parity_columns[j][r] = f.add(enc.parity_columns[j][r], mask[r]);
    }
    enc.data_columns = std::move(data);
    enc.original_length = rows * enc.data_columns.size();
    return enc;
}

// Column-major reshape of the file into m columns, zero padded.
inline EncodedFile encode(ByteView file, std::size_t m, std::size_t kp, const FieldSpec& f, ByteView master_key) {
    if (m < 1) fail(ErrorCode::InvalidShape, "m must be at least 1");
    const std::size_t rows = std::max<std::size_t>(1, (file.size() + m - 1) / m);
    std::vector<Column> data(m, Column(rows, 0));
    for (std::size_t i = 0; i < file.size(); ++i) {
        if (!f.contains(file[i])) fail(ErrorCode::InvalidShape, "byte value outside " + f.describe());
        data[i / rows][i % rows] = file[i];
    }
    auto enc = encode_columns(std::move(data), kp, f, master_key);
    enc.original_length = file.size();
    enc.padding = m * rows - file.size();
    return enc;
}

inline Bytes decode(const EncodedFile& enc) {
    Bytes out;
    out.reserve(enc.original_length);
    for (const auto& c : enc.data_columns)
        for (auto e : c) {
            if (out.size() == enc.original_length) return out;
            out.push_back(static_cast<std::uint8_t>(e));
        }
    return out;
}

inline std::vector<Column> unblinded_parity(const EncodedFile& enc, ByteView master_key) {
    std::vector<Column> out = enc.parity_columns;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const auto mask = blinding_stream(master_key, j, enc.rows, enc.field);
        for (std::size_t r = 0; r < enc.rows; ++r) out[j][r] = enc.field.sub(out[j][r], mask[r]);
    }
    return out;
}

// Recovers every data column from survivors. `columns` holds m data
// columns followed by kp unblinded parity columns; erased ones are nullopt.
inline std::vector<Column> recover_data(const std::vector<std::optional<Column>>& columns, const GeneratorMatrix& g,
                                        const FieldSpec& f) {
    const std::size_t m = g.data_columns();
    const std::size_t kp = g.parity_columns();
    if (columns.size() != m + kp) fail(ErrorCode::InvalidShape, "expected m + kp column slots");

    std::vector<std::size_t> missing;
    std::vector<std::size_t> parity_avail;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < m + kp; ++i) {
        if (!columns[i]) {
            if (i < m) missing.push_back(i);
            continue;
        }
        rows = columns[i]->size();
        if (i >= m) parity_avail.push_back(i - m);
    }
    std::vector<Column> data(m);
    for (std::size_t i = 0; i < m; ++i)
        if (columns[i]) data[i] = *columns[i];
    if (missing.empty()) return data;
    if (parity_avail.size() < missing.size())
        fail(ErrorCode::ReconstructionFailed, "more erasures than surviving parity columns");

    // Gauss-Jordan on [A | I] with A[e][u] = G[missing[u]][parity_avail[e]],
    // choosing |missing| independent parity equations.
    const std::size_t u = missing.size();
    std::vector<std::vector<Element>> a(parity_avail.size(), std::vector<Element>(u + parity_avail.size(), 0));
    for (std::size_t e = 0; e < parity_avail.size(); ++e) {
        for (std::size_t c = 0; c < u; ++c) a[e][c] = g.at(missing[c], parity_avail[e]);
        a[e][u + e] = 1;
    }
    std::vector<std::size_t> pivot_row(u);
    std::size_t next = 0;
    for (std::size_t c = 0; c < u; ++c) {
        std::size_t p = next;
        while (p < a.size() && a[p][c] == 0) ++p;
        if (p == a.size()) fail(ErrorCode::ReconstructionFailed, "erasure pattern is not recoverable");
        std::swap(a[p], a[next]);
        const Element scale = f.inv(a[next][c]);
        for (auto& v : a[next]) v = f.mul(v, scale);
        for (std::size_t r = 0; r < a.size(); ++r) {
            if (r == next || a[r][c] == 0) continue;
            const Element factor = a[r][c];
            for (std::size_t k = 0; k < a[r].size(); ++k) a[r][k] = f.sub(a[r][k], f.mul(factor, a[next][k]));
        }
        pivot_row[c] = next++;
    }

    // Right-hand side per parity equation: parity minus known data terms.
    std::vector<Column> rhs(parity_avail.size(), Column(rows, 0));
    for (std::size_t e = 0; e < parity_avail.size(); ++e) {
        const std::size_t j = parity_avail[e];
        rhs[e] = *columns[m + j];
        for (std::size_t i = 0; i < m; ++i) {
            if (!columns[i]) continue;
            const Element coeff = g.at(i, j);
            for (std::size_t r = 0; r < rows; ++r) rhs[e][r] = f.sub(rhs[e][r], f.mul(coeff, data[i][r]));
        }
    }
    for (std::size_t c = 0; c < u; ++c) {
        Column out(rows, 0);
        const auto& comb = a[pivot_row[c]];
        for (std::size_t e = 0; e < parity_avail.size(); ++e) {
            const Element w = comb[u + e];
            if (w == 0) continue;
            for (std::size_t r = 0; r < rows; ++r) out[r] = f.add(out[r], f.mul(w, rhs[e][r]));
        }
        data[missing[c]] = std::move(out);
    }
    return data;
}

// Changes one data block and folds the delta into the blinded parity; the
// blinding is additive so no key is needed.
inline void update_block(EncodedFile& enc, std::size_t column, std::size_t row, Element value) {
    if (column >= enc.data_columns.size() || row >= enc.rows)
        fail(ErrorCode::OutOfRange, "block (" + std::to_string(column) + ", " + std::to_string(row) + ") out of range");
    if (!enc.field.contains(value)) fail(ErrorCode::OutOfRange, "value outside field");
    const auto& f = enc.field;
    const Element delta = f.sub(value, enc.data_columns[column][row]);
    enc.data_columns[column][row] = value;
    for (std::size_t j = 0; j < enc.parity_columns.size(); ++j)
        enc.parity_columns[j][row] = f.add(enc.parity_columns[j][row], f.mul(enc.generator.at(column, j), delta));
}

// --- challenge schedule ---------------------------------------------------

struct ChallengeSchedule {
    std::vector<std::uint32_t> rows;
    std::vector<Element> coefficients;
};

// seed(i) = HMAC-SHA256(master_key, "cloudsplit.round" || u32le(i))
inline Bytes round_seed(ByteView master_key, std::uint32_t round) {
    ByteWriter msg;
    msg.magic("cloudsplit.round");
    msg.u32(round);
    auto d = hmac_sha256(master_key, msg.bytes());
    return Bytes(d.begin(), d.end());
}

// From DeterministicRng(seed, "cloudsplit.challenge"): r row draws as a
// partial Fisher-Yates over 0..rows-1 (draw q picks q + uniform(rows - q)),
// then r coefficients 1 + uniform(order - 1). Unit mode skips the
// coefficient draws and uses 1.
inline ChallengeSchedule challenge_schedule(ByteView seed, std::size_t rows, std::size_t r, const FieldSpec& f,
                                            bool unit_coefficients = false) {
    if (r < 1 || r > rows)
        fail(ErrorCode::InvalidChallenge, "blocks per challenge " + std::to_string(r) + " not in 1.." +
                                              std::to_string(rows));
    DeterministicRng rng(seed, "cloudsplit.challenge");
    std::vector<std::uint32_t> idx(rows);
    for (std::size_t i = 0; i < rows; ++i) idx[i] = static_cast<std::uint32_t>(i);
    for (std::size_t q = 0; q < r; ++q) {
        const auto j = q + static_cast<std::size_t>(rng.uniform(rows - q));
        std::swap(idx[q], idx[j]);
    }
    ChallengeSchedule s;
    s.rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(r));
    s.coefficients.resize(r, 1);
    if (!unit_coefficients)
        for (auto& c : s.coefficients) c = static_cast<Element>(1 + rng.uniform(f.order() - 1));
    return s;
}

inline Element combine(const ChallengeSchedule& s, std::span<const Element> column, const FieldSpec& f) {
    Element acc = 0;
    for (std::size_t q = 0; q < s.rows.size(); ++q) {
        if (s.rows[q] >= column.size()) fail(ErrorCode::OutOfRange, "challenged row beyond column length");
        acc = f.add(acc, f.mul(s.coefficients[q], column[s.rows[q]]));
    }
    return acc;
}

struct TokenOptions {
    bool unit_coefficients = false;  // test hook: every coefficient is 1
};

enum class RoundState : std::uint8_t { Fresh = 0, Issued = 1, Verified = 2 };

// Local-only audit state. Tokens are indexed (column, round).
struct TokenTable {
    FieldSpec field = FieldSpec::binary8();
    std::size_t columns = 0;
    std::size_t rows = 0;
    std::size_t rounds = 0;
    std::size_t blocks_per_challenge = 0;
    bool unit_coefficients = false;
    Bytes master_key;
    std::vector<Bytes> round_seeds;
    std::vector<Element> tokens;
    std::vector<RoundState> state;

    std::size_t token_count() const { return tokens.size(); }

    std::size_t index(std::size_t round, std::size_t column) const {
        if (round >= rounds || column >= columns)
            fail(ErrorCode::OutOfRange, "round " + std::to_string(round) + " column " + std::to_string(column) +
                                            " outside " + std::to_string(rounds) + "x" + std::to_string(columns));
        return column * rounds + round;
    }

    Element token(std::size_t round, std::size_t column) const { return tokens[index(round, column)]; }

    // First round not yet issued for every column, if any.
    std::optional<std::size_t> next_fresh_round() const {
        for (std::size_t i = 0; i < rounds; ++i) {
            bool fresh = true;
            for (std::size_t j = 0; j < columns && fresh; ++j) fresh = state[index(i, j)] == RoundState::Fresh;
            if (fresh) return i;
        }
        return std::nullopt;
    }
};

inline TokenTable precompute_columns(const std::vector<const Column*>& columns, const FieldSpec& f, std::size_t t,
                                     std::size_t r, ByteView master_key, TokenOptions opts = {}) {
    if (t < 1) fail(ErrorCode::InvalidChallenge, "at least one round is required");
    if (columns.empty()) fail(ErrorCode::InvalidShape, "no columns to protect");
    TokenTable table;
    table.field = f;
    table.columns = columns.size();
    table.rows = columns.front()->size();
    table.rounds = t;
    table.blocks_per_challenge = r;
    table.unit_coefficients = opts.unit_coefficients;
    table.master_key.assign(master_key.begin(), master_key.end());
    table.tokens.resize(table.columns * t);
    table.state.assign(table.columns * t, RoundState::Fresh);
    for (const auto* c : columns)
        if (c->size() != table.rows) fail(ErrorCode::InvalidShape, "columns differ in length");
    for (std::size_t i = 0; i < t; ++i) {
        table.round_seeds.push_back(round_seed(master_key, static_cast<std::uint32_t>(i)));
        const auto sched = challenge_schedule(table.round_seeds.back(), table.rows, r, f, opts.unit_coefficients);
        for (std::size_t j = 0; j < table.columns; ++j) table.tokens[table.index(i, j)] = combine(sched, *columns[j], f);
    }
    return table;
}

inline TokenTable precompute_tokens(const EncodedFile& enc, std::size_t t, std::size_t r, ByteView master_key,
                                    TokenOptions opts = {}) {
    std::vector<const Column*> cols;
    for (std::size_t j = 0; j < enc.column_count(); ++j) cols.push_back(&enc.column(j));
    return precompute_columns(cols, enc.field, t, r, master_key, opts);
}

struct ChallengeMessage {
    std::uint32_t round = 0;
    std::uint32_t column = 0;
    FieldSpec field = FieldSpec::binary8();
    ChallengeSchedule schedule;
};

struct ChallengeResponse {
    std::uint32_t round = 0;
    std::uint32_t column = 0;
    Element value = 0;
};

inline ChallengeMessage challenge(TokenTable& table, std::size_t round, std::size_t column) {
    auto& st = table.state[table.index(round, column)];
    if (st != RoundState::Fresh)
        fail(ErrorCode::RoundExhausted, "round " + std::to_string(round) + " already used for column " +
                                            std::to_string(column));
    st = RoundState::Issued;
    ChallengeMessage msg;
    msg.round = static_cast<std::uint32_t>(round);
    msg.column = static_cast<std::uint32_t>(column);
    msg.field = table.field;
    msg.schedule = challenge_schedule(table.round_seeds[round], table.rows, table.blocks_per_challenge, table.field,
                                      table.unit_coefficients);
    return msg;
}

// Provider side: only needs the stored column.
inline ChallengeResponse respond(const ChallengeMessage& msg, std::span<const Element> column) {
    return {msg.round, msg.column, combine(msg.schedule, column, msg.field)};
}

enum class Verdict : std::uint8_t { Intact, Corrupted };

struct VerifyResult {
    Verdict verdict = Verdict::Intact;
    std::size_t column = 0;
};

inline VerifyResult verify(TokenTable& table, std::size_t round, std::size_t column, Element response) {
    auto& st = table.state[table.index(round, column)];
    if (st != RoundState::Issued)
        fail(ErrorCode::NoSuchChallenge, "no outstanding challenge for round " + std::to_string(round) + " column " +
                                             std::to_string(column));
    st = RoundState::Verified;
    return {response == table.token(round, column) ? Verdict::Intact : Verdict::Corrupted, column};
}

// --- wire formats ---------------------------------------------------------
//   "CIT1" | kind u8 (1 challenge, 2 response) | body length u32 | body
// challenge body: round u32 | column u32 | field tag | r u32 | r x row u32 |
//                 r x coefficient element
// response body:  round u32 | column u32 | field tag | value element

inline Bytes frame(std::uint8_t kind, const Bytes& body) {
    ByteWriter w;
    w.magic("CIT1");
    w.u8(kind);
    w.blob(body);
    return std::move(w).take();
}

inline Bytes unframe(ByteView data, std::uint8_t kind) {
    ByteReader r(data);
    r.expect_magic("CIT1");
    if (r.u8() != kind) fail(ErrorCode::MalformedData, "unexpected CIT1 message kind");
    auto body = r.blob();
    r.expect_done();
    return body;
}

inline Bytes encode_challenge(const ChallengeMessage& msg) {
    ByteWriter w;
    w.u32(msg.round);
    w.u32(msg.column);
    field::write_field(w, msg.field);
    w.u32(static_cast<std::uint32_t>(msg.schedule.rows.size()));
    for (auto row : msg.schedule.rows) w.u32(row);
    field::write_elements(w, msg.field, msg.schedule.coefficients);
    return frame(1, w.bytes());
}

inline ChallengeMessage decode_challenge(ByteView data) {
    const auto body = unframe(data, 1);
    ByteReader r(body);
    ChallengeMessage msg;
    msg.round = r.u32();
    msg.column = r.u32();
    msg.field = field::read_field(r);
    const auto count = r.u32();
    if (count > r.remaining() / 4) fail(ErrorCode::MalformedData, "challenge row count exceeds message");
    msg.schedule.rows.resize(count);
    for (auto& row : msg.schedule.rows) row = r.u32();
    msg.schedule.coefficients = field::read_elements(r, msg.field, count);
    r.expect_done();
    return msg;
}

inline Bytes encode_response(const ChallengeResponse& resp, const FieldSpec& f) {
    ByteWriter w;
    w.u32(resp.round);
    w.u32(resp.column);
    field::write_field(w, f);
    field::write_elements(w, f, std::span<const Element>(&resp.value, 1));
    return frame(2, w.bytes());
}

inline ChallengeResponse decode_response(ByteView data) {
    const auto body = unframe(data, 2);
    ByteReader r(body);
    ChallengeResponse resp;
    resp.round = r.u32();
    resp.column = r.u32();
    const auto f = field::read_field(r);
    resp.value = field::read_elements(r, f, 1).front();
    r.expect_done();
    return resp;
}

// Parity column blob as stored remotely:
//   "CCL1" | field tag | count u32 | elements
inline Bytes column_blob(const Column& column, const FieldSpec& f) {
    ByteWriter w;
    w.magic("CCL1");
    field::write_field(w, f);
    w.u32(static_cast<std::uint32_t>(column.size()));
    field::write_elements(w, f, column);
    return std::move(w).take();
}

// Interprets a stored blob as an auditable column: a share's payload or a
// parity column.
inline Column column_from_blob(ByteView blob) {
    if (shamir::looks_like_share(blob)) return shamir::deserialize(blob).payload;
    ByteReader r(blob);
    r.expect_magic("CCL1");
    const auto f = field::read_field(r);
    const auto count = r.u32();
    auto out = field::read_elements(r, f, count);
    r.expect_done();
    return out;
}

// Provider-side handler for a framed challenge against a stored blob.
inline Bytes answer_challenge(ByteView wire_challenge, ByteView blob) {
    const auto msg = decode_challenge(wire_challenge);
    const auto column = column_from_blob(blob);
    return encode_response(respond(msg, column), msg.field);
}

// Local keystore form of a token table.
inline Bytes serialize(const TokenTable& t) {
    ByteWriter w;
    w.magic("CTT1");
    field::write_field(w, t.field);
    w.u64(t.columns);
    w.u64(t.rows);
    w.u64(t.rounds);
    w.u64(t.blocks_per_challenge);
    w.u8(t.unit_coefficients ? 1 : 0);
    w.blob(t.master_key);
    for (const auto& s : t.round_seeds) w.blob(s);
    field::write_elements(w, t.field, t.tokens);
    for (auto s : t.state) w.u8(static_cast<std::uint8_t>(s));
    return std::move(w).take();
}

inline TokenTable deserialize_tokens(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CTT1");
    TokenTable t;
    t.field = field::read_field(r);
    t.columns = r.u64();
    t.rows = r.u64();
    t.rounds = r.u64();
    t.blocks_per_challenge = r.u64();
    t.unit_coefficients = r.u8() != 0;
    t.master_key = r.blob();
    const auto n = t.columns * t.rounds;
    if (t.rounds > r.remaining() || n > r.remaining()) fail(ErrorCode::MalformedData, "token table dimensions");
    for (std::size_t i = 0; i < t.rounds; ++i) t.round_seeds.push_back(r.blob());
    t.tokens = field::read_elements(r, t.field, n);
    t.state.resize(n);
    for (auto& s : t.state) {
        auto v = r.u8();
        if (v > 2) fail(ErrorCode::MalformedData, "bad round state");
        s = static_cast<RoundState>(v);
    }
    r.expect_done();
    return t;
}

}  // namespace cloudsplit::integrity
