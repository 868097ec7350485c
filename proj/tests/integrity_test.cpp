#include <gtest/gtest.h>

#include "cloudsplit/crypto.hpp"
#include "cloudsplit/integrity.hpp"
#include "oracles.hpp"

using namespace cloudsplit;
using namespace cloudsplit::integrity;
using field::Element;
using field::FieldSpec;

namespace {

const Bytes kKey = to_bytes("integrity test master key");

Bytes random_bytes(DeterministicRng& rng, std::size_t n) {
    Bytes out(n);
    rng.fill(out);
    return out;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

}  // namespace

TEST(Encode, NoParityIsReshape) {
    DeterministicRng rng(1);
    const auto file = random_bytes(rng, 100);
    const auto enc = encode(file, 4, 0, FieldSpec::binary8(), kKey);
    EXPECT_EQ(enc.rows, 25u);
    EXPECT_TRUE(enc.parity_columns.empty());
    for (std::size_t i = 0; i < file.size(); ++i) EXPECT_EQ(enc.data_columns[i / 25][i % 25], file[i]);
    EXPECT_EQ(decode(enc), file);
}

TEST(Encode, PaddingRoundTrip) {
    DeterministicRng rng(2);
    const auto file = random_bytes(rng, 101);
    const auto enc = encode(file, 4, 2, FieldSpec::binary8(), kKey);
    EXPECT_EQ(enc.rows, 26u);
    EXPECT_EQ(enc.padding, 3u);
    EXPECT_EQ(decode(enc), file);
}

TEST(Encode, ParityMatchesMatrixProduct) {
    const auto f = FieldSpec::prime(13);
    const auto enc = encode_columns({{3}, {5}}, 1, f, kKey);
    const auto parity = unblinded_parity(enc, kKey);
    // G = [[1],[1]] for the first parity column: 3*1 + 5*1 = 8
    EXPECT_EQ(parity[0][0], 8u);

    DeterministicRng rng(3);
    const std::size_t m = 4, kp = 3, rows = 10;
    std::vector<Column> data(m, Column(rows));
    for (auto& c : data)
        for (auto& e : c) e = static_cast<Element>(rng.uniform(256));
    const auto e2 = encode_columns(data, kp, FieldSpec::binary8(), kKey);
    const auto p2 = unblinded_parity(e2, kKey);
    for (std::size_t j = 0; j < kp; ++j)
        for (std::size_t r = 0; r < rows; ++r) {
            unsigned acc = 0;
            for (std::size_t i = 0; i < m; ++i) {
                unsigned g = 1;
                for (std::size_t e = 0; e < j; ++e) g = oracle::gf256_mul(g, static_cast<unsigned>(i + 1));
                acc ^= oracle::gf256_mul(g, data[i][r]);
            }
            ASSERT_EQ(p2[j][r], acc);
        }
    // stored parity is masked
    EXPECT_NE(e2.parity_columns, p2);
}

TEST(Encode, RecoversErasedColumns) {
    DeterministicRng rng(4);
    const auto file = random_bytes(rng, 400);
    const auto enc = encode(file, 4, 2, FieldSpec::binary8(), kKey);
    const auto parity = unblinded_parity(enc, kKey);
    std::vector<std::optional<Column>> slots;
    for (const auto& c : enc.data_columns) slots.emplace_back(c);
    for (const auto& c : parity) slots.emplace_back(c);
    slots[1].reset();
    slots[3].reset();
    EXPECT_EQ(recover_data(slots, enc.generator, enc.field), enc.data_columns);
    slots[0].reset();
    EXPECT_EQ(code_of([&] { recover_data(slots, enc.generator, enc.field); }), ErrorCode::ReconstructionFailed);
}

TEST(Encode, UpdateBlockKeepsParityConsistent) {
    DeterministicRng rng(5);
    auto enc = encode(random_bytes(rng, 60), 3, 2, FieldSpec::binary8(), kKey);
    update_block(enc, 1, 7, 0x42);
    EXPECT_EQ(enc.data_columns[1][7], 0x42u);
    const auto fresh = encode_columns(enc.data_columns, 2, enc.field, kKey);
    EXPECT_EQ(enc.parity_columns, fresh.parity_columns);
}

TEST(Encode, ShapeErrors) {
    EXPECT_EQ(code_of([] { encode_columns({}, 1, FieldSpec::binary8(), kKey); }), ErrorCode::InvalidShape);
    EXPECT_EQ(code_of([] { encode_columns({{1, 2}, {3}}, 1, FieldSpec::binary8(), kKey); }), ErrorCode::InvalidShape);
    EXPECT_EQ(code_of([] { GeneratorMatrix::vandermonde(13, 1, FieldSpec::prime(13)); }), ErrorCode::InvalidShape);
}

TEST(Tokens, CountIsColumnsTimesRounds) {
    DeterministicRng rng(6);
    const auto enc = encode(random_bytes(rng, 300), 3, 2, FieldSpec::binary8(), kKey);
    const auto table = precompute_tokens(enc, 4, 10, kKey);
    EXPECT_EQ(table.token_count(), 20u);
}

TEST(Tokens, FullUnitChallengeIsColumnSum) {
    DeterministicRng rng(7);
    const auto enc = encode(random_bytes(rng, 90), 3, 1, FieldSpec::binary8(), kKey);
    const auto table = precompute_tokens(enc, 2, enc.rows, kKey, {.unit_coefficients = true});
    for (std::size_t j = 0; j < enc.column_count(); ++j) {
        Element sum = 0;
        for (auto e : enc.column(j)) sum ^= e;
        EXPECT_EQ(table.token(0, j), sum);
        EXPECT_EQ(table.token(1, j), sum);
    }
}

TEST(Tokens, MatchReimplementedSchedule) {
    DeterministicRng rng(8);
    for (auto f : {FieldSpec::binary8(), FieldSpec::prime(251)}) {
        auto data = random_bytes(rng, 250);
        for (auto& b : data) b = static_cast<std::uint8_t>(b % f.order());
        const auto enc = encode(data, 5, 2, f, kKey);
        const std::size_t t = 6, r = 7;
        auto table = precompute_tokens(enc, t, r, kKey);
        for (std::uint32_t i = 0; i < t; ++i) {
            const auto sched = oracle::challenge(kKey, i, enc.rows, r, f.order());
            for (std::size_t j = 0; j < enc.column_count(); ++j) {
                std::uint64_t acc = 0;
                for (std::size_t q = 0; q < r; ++q) {
                    const auto v = enc.column(j)[sched.rows[q]];
                    if (f.is_binary()) acc ^= oracle::gf256_mul(sched.coefficients[q], v);
                    else acc = (acc + std::uint64_t{sched.coefficients[q]} * v) % f.order();
                }
                ASSERT_EQ(table.token(i, j), acc) << "round " << i << " column " << j;
                const auto msg = challenge(table, i, j);
                EXPECT_EQ(msg.schedule.rows, sched.rows);
                EXPECT_EQ(std::vector<Element>(msg.schedule.coefficients.begin(), msg.schedule.coefficients.end()),
                          std::vector<Element>(sched.coefficients.begin(), sched.coefficients.end()));
            }
        }
    }
}

TEST(Tokens, SameInputsSameTable) {
    DeterministicRng rng(9);
    const auto enc = encode(random_bytes(rng, 128), 4, 1, FieldSpec::binary8(), kKey);
    EXPECT_EQ(precompute_tokens(enc, 3, 5, kKey).tokens, precompute_tokens(enc, 3, 5, kKey).tokens);
    EXPECT_NE(precompute_tokens(enc, 3, 5, kKey).tokens, precompute_tokens(enc, 3, 5, to_bytes("other")).tokens);
    EXPECT_EQ(code_of([&] { precompute_tokens(enc, 3, enc.rows + 1, kKey); }), ErrorCode::InvalidChallenge);
    EXPECT_EQ(code_of([&] { precompute_tokens(enc, 3, 0, kKey); }), ErrorCode::InvalidChallenge);
}

TEST(Challenge, HonestIntactCorruptedDetected) {
    DeterministicRng rng(10);
    const auto enc = encode(random_bytes(rng, 64 * 3), 3, 1, FieldSpec::binary8(), kKey);
    auto table = precompute_tokens(enc, 3, enc.rows, kKey);
    for (std::size_t j = 0; j < enc.column_count(); ++j) {
        const auto msg = challenge(table, 0, j);
        EXPECT_EQ(verify(table, 0, j, respond(msg, enc.column(j)).value).verdict, Verdict::Intact);
    }
    auto bad = enc.column(2);
    bad[17] ^= 0x01;
    const auto msg = challenge(table, 1, 2);
    const auto v = verify(table, 1, 2, respond(msg, bad).value);
    EXPECT_EQ(v.verdict, Verdict::Corrupted);
    EXPECT_EQ(v.column, 2u);
}

TEST(Challenge, OneTimeRounds) {
    DeterministicRng rng(11);
    const auto enc = encode(random_bytes(rng, 40), 2, 0, FieldSpec::binary8(), kKey);
    auto table = precompute_tokens(enc, 2, 4, kKey);
    EXPECT_EQ(code_of([&] { verify(table, 0, 0, 0); }), ErrorCode::NoSuchChallenge);
    const auto msg = challenge(table, 0, 0);
    EXPECT_EQ(code_of([&] { challenge(table, 0, 0); }), ErrorCode::RoundExhausted);
    verify(table, 0, 0, respond(msg, enc.column(0)).value);
    EXPECT_EQ(code_of([&] { verify(table, 0, 0, 0); }), ErrorCode::NoSuchChallenge);
    EXPECT_EQ(code_of([&] { challenge(table, 2, 0); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([&] { challenge(table, 0, 5); }), ErrorCode::OutOfRange);
    EXPECT_EQ(*table.next_fresh_round(), 1u);
}

TEST(Challenge, DetectionRateTracksSampledFraction) {
    // one corrupted row out of 64; with r rows sampled per round the
    // corruption shows up in about r/64 of the rounds
    DeterministicRng rng(12);
    const std::size_t rows = 64, rounds = 4000;
    Column col(rows);
    for (auto& e : col) e = static_cast<Element>(rng.uniform(256));
    auto bad = col;
    bad[23] ^= 0x80;
    for (std::size_t r : {8u, 32u}) {
        auto table = precompute_columns({&col}, FieldSpec::binary8(), rounds, r, kKey);
        std::size_t detected = 0;
        for (std::size_t i = 0; i < rounds; ++i) {
            const auto msg = challenge(table, i, 0);
            if (verify(table, i, 0, respond(msg, bad).value).verdict == Verdict::Corrupted) ++detected;
        }
        const double p = static_cast<double>(r) / rows;
        const double se = std::sqrt(p * (1 - p) / rounds);
        EXPECT_NEAR(static_cast<double>(detected) / rounds, p, 3 * se) << "r=" << r;
    }
}

TEST(Wire, MessagesRoundTrip) {
    DeterministicRng rng(13);
    const auto enc = encode(random_bytes(rng, 100), 2, 1, FieldSpec::prime(257), kKey);
    auto table = precompute_tokens(enc, 2, 9, kKey);
    const auto msg = challenge(table, 1, 2);
    const auto back = decode_challenge(encode_challenge(msg));
    EXPECT_EQ(back.round, 1u);
    EXPECT_EQ(back.column, 2u);
    EXPECT_EQ(back.schedule.rows, msg.schedule.rows);
    EXPECT_EQ(back.schedule.coefficients, msg.schedule.coefficients);

    const auto blob = column_blob(enc.column(2), enc.field);
    EXPECT_EQ(column_from_blob(blob), enc.column(2));
    const auto resp = decode_response(answer_challenge(encode_challenge(msg), blob));
    EXPECT_EQ(verify(table, 1, 2, resp.value).verdict, Verdict::Intact);

    auto restored = deserialize_tokens(serialize(table));
    EXPECT_EQ(restored.tokens, table.tokens);
    EXPECT_EQ(restored.state, table.state);
    EXPECT_EQ(restored.round_seeds, table.round_seeds);

    EXPECT_THROW(decode_challenge(to_bytes("CIT1")), Error);
    auto framed = encode_challenge(msg);
    EXPECT_THROW(decode_response(framed), Error);
}
