#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "cloudsplit/crypto.hpp"
#include "cloudsplit/router.hpp"
#include "cloudsplit/scenario.hpp"

using namespace cloudsplit;
using namespace cloudsplit::router;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

ranking::ProviderProfile profile(const std::string& id, double score) {
    ranking::ProviderProfile p;
    p.id = id;
    p.time = p.cost = p.security = p.privacy = score;
    p.p_hier_access = {1.0, 1.0};
    return p;
}

class World {
public:
    explicit World(std::size_t providers = 5, config::Policy policy = {}, std::string credential = "sim")
        : dir_(fs::temp_directory_path() / ("cloudsplit-rt-" + to_hex(random_key(8)))) {
        fs::create_directories(dir_);
        for (std::size_t i = 0; i < providers; ++i) {
            const auto id = std::string(1, static_cast<char>('a' + i));
            cloud.add(std::make_shared<simcloud::SimProvider>(id, std::vector<std::uint32_t>{1, 2}));
            profiles.push_back(profile(id, 0.9 - 0.1 * static_cast<double>(i)));
        }
        manifest = std::make_unique<persistence::ManifestStore>(dir_ / "m.cmf");
        keystore = std::make_unique<persistence::KeyStore>(dir_ / "k.cks");
        router = std::make_unique<Router>(policy, cloud.endpoints(), profiles, *manifest, *keystore, 99, credential);
    }
    ~World() {
        router.reset();
        fs::remove_all(dir_);
    }

    simcloud::SimCloud cloud;
    std::vector<ranking::ProviderProfile> profiles;
    std::unique_ptr<persistence::ManifestStore> manifest;
    std::unique_ptr<persistence::KeyStore> keystore;
    std::unique_ptr<Router> router;

private:
    fs::path dir_;
};

Bytes random_payload(std::uint64_t seed, std::size_t n) {
    DeterministicRng rng(seed);
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng.uniform(16) * 16 + rng.uniform(3));
    return out;
}

DataObject secret(const std::string& id, std::size_t n = 30000, OperationClass ops = OperationClass::NoOperations) {
    return DataObject::binary(id, random_payload(std::hash<std::string>{}(id), n), SecretLevel::Secret, ops);
}

anonymize::Table people(std::size_t rows) {
    anonymize::Table t;
    t.columns = {"name", "zip", "income"};
    for (std::size_t r = 0; r < rows; ++r)
        t.rows.push_back({std::string("person-") + std::to_string(r * 7919), static_cast<std::int64_t>(10000 + r),
                          static_cast<std::int64_t>(r * 1000)});
    return t;
}

}  // namespace

TEST(Route, PolicyMatrix) {
    World w;
    const config::Policy policy;
    struct Row {
        SecretLevel level;
        OperationClass ops;
        Pipeline want;
    };
    const std::vector<Row> golden{
        {SecretLevel::TopSecret, OperationClass::NoOperations, Pipeline::LocalOnly},
        {SecretLevel::TopSecret, OperationClass::BasicOperations, Pipeline::LocalOnly},
        {SecretLevel::TopSecret, OperationClass::AdvancedAnalytics, Pipeline::LocalOnly},
        {SecretLevel::Secret, OperationClass::NoOperations, Pipeline::SplitShareDisperse},
        {SecretLevel::Secret, OperationClass::BasicOperations, Pipeline::HomomorphicStore},
        {SecretLevel::Secret, OperationClass::AdvancedAnalytics, Pipeline::Rejected},
        {SecretLevel::Unclassified, OperationClass::NoOperations, Pipeline::PlainSingleCloud},
        {SecretLevel::Unclassified, OperationClass::BasicOperations, Pipeline::PlainSingleCloud},
        {SecretLevel::Unclassified, OperationClass::AdvancedAnalytics, Pipeline::PlainSingleCloud},
    };
    for (const auto& row : golden) {
        const auto obj = DataObject::binary("x", Bytes(5000, 1), row.level, row.ops);
        const auto d = route(obj, policy, w.profiles);
        EXPECT_EQ(d.pipeline, row.want) << to_string(row.level) << "/" << to_string(row.ops);
        if (d.pipeline == Pipeline::Rejected) {
            EXPECT_EQ(d.reason, "advanced analytics tier not implemented");
        }
    }
}

TEST(Route, ProtectionNeverDropsAsLevelRises) {
    World w;
    for (auto ops : {OperationClass::NoOperations, OperationClass::BasicOperations, OperationClass::AdvancedAnalytics}) {
        int prev = -1;
        for (auto level : {SecretLevel::Unclassified, SecretLevel::Secret, SecretLevel::TopSecret}) {
            const int rank = confidentiality_rank(route(DataObject::binary("x", Bytes(5000, 1), level, ops), {}, w.profiles).pipeline);
            EXPECT_GE(rank, prev);
            prev = rank;
        }
    }
}

TEST(Route, DefaultsAndProviders) {
    World w;
    const auto d = route(secret("x"), {}, w.profiles);
    EXPECT_EQ(d.n, 5u);
    EXPECT_EQ(d.k, 3u);
    EXPECT_EQ(d.chunks, 5u);
    EXPECT_EQ(d.providers, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
    EXPECT_EQ(route(DataObject::binary("x", Bytes(10, 1), SecretLevel::Unclassified, {}), {}, w.profiles).providers,
              std::vector<std::string>{"a"});
    EXPECT_EQ(default_threshold(1), 1u);
    EXPECT_EQ(default_threshold(4), 3u);
    EXPECT_EQ(default_threshold(6), 4u);

    EXPECT_EQ(code_of([&] { route(secret("x"), {}, {}); }), ErrorCode::NoProviders);
    EXPECT_EQ(route(DataObject::binary("x", Bytes(5, 1), SecretLevel::TopSecret, {}), {}, {}).pipeline,
              Pipeline::LocalOnly);
    config::Policy bad;
    bad.n = 9;
    EXPECT_EQ(code_of([&] { route(secret("x"), bad, w.profiles); }), ErrorCode::InvalidScheme);
}

TEST(Router, RoundTripEveryPipeline) {
    World w;
    const std::vector<DataObject> objects{
        secret("dispersed"),
        secret("encrypted", 1001, OperationClass::BasicOperations),
        DataObject::binary("plain", to_bytes("public notice"), SecretLevel::Unclassified, {}),
        DataObject::binary("local", to_bytes("launch codes"), SecretLevel::TopSecret, {}),
        DataObject::tabular("people", people(40), {"name"}, {{"zip"}, {"income"}}, SecretLevel::Secret, {}),
    };
    for (const auto& obj : objects) {
        w.router->put(obj);
        const auto got = w.router->get(obj.object_id);
        if (obj.kind == ObjectKind::Binary) EXPECT_EQ(got.payload, obj.payload) << obj.object_id;
        else EXPECT_EQ(got.table, obj.table);
    }
    EXPECT_EQ(code_of([&] { w.router->put(objects[0]); }), ErrorCode::DuplicateObject);
    EXPECT_EQ(code_of([&] { w.router->get("missing"); }), ErrorCode::NotFound);
    EXPECT_EQ(code_of([&] {
                  w.router->put(DataObject::binary("adv", Bytes(10, 1), SecretLevel::Secret, OperationClass::AdvancedAnalytics));
              }),
              ErrorCode::Unsupported);
    // nothing of the top secret object left the machine
    for (const auto& p : w.cloud.providers())
        for (const auto& b : p->insider_dump()) EXPECT_FALSE(scenario::contains_bytes(b.data, to_bytes("launch codes")));
}

TEST(Router, SurvivesAnyTwoProvidersDown) {
    World w;
    const auto obj = secret("obj");
    w.router->put(obj);
    const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) {
            w.cloud.provider(ids[i]).set_unavailable(true);
            w.cloud.provider(ids[j]).set_unavailable(true);
            EXPECT_EQ(w.router->get("obj").payload, obj.payload);
            for (std::size_t k = 0; k < 5; ++k) {
                if (k == i || k == j) continue;
                w.cloud.provider(ids[k]).set_unavailable(true);
                EXPECT_EQ(code_of([&] { w.router->get("obj"); }), ErrorCode::ReconstructionFailed);
                w.cloud.provider(ids[k]).set_unavailable(false);
            }
            w.cloud.clear_all();
        }
}

TEST(Router, CorruptShareSkippedOnGetAndLocatedByAudit) {
    config::Policy policy;
    policy.audit_blocks = 0;  // every row in every round
    World w(5, policy);
    const auto obj = secret("obj", 20000);
    const auto rec = w.router->put(obj);
    const auto& loc = rec.chunks[1].shares[3];
    w.cloud.inject(simcloud::Fault::corrupt_blob(loc.provider, loc.node, loc.blob_id, 60, 0x10));
    EXPECT_EQ(w.router->get("obj").payload, obj.payload);
    const auto report = w.router->audit("obj", 1);
    const auto bad = report.corrupted();
    ASSERT_EQ(bad.size(), 1u);
    EXPECT_EQ(bad[0].slot, 1u);
    EXPECT_EQ(bad[0].column, 3u);
    EXPECT_EQ(bad[0].provider, loc.provider);
    EXPECT_EQ(bad[0].blob_id, loc.blob_id);
    w.cloud.clear_all();
    EXPECT_TRUE(w.router->audit("obj", 1).intact());
}

TEST(Router, AuditUsesFreshRoundsUntilExhausted) {
    config::Policy policy;
    policy.audit_rounds = 3;
    World w(3, policy);
    w.router->put(secret("obj", 5000));
    EXPECT_EQ(w.router->audit("obj", 2).entries.size(), 2u * 3u * w.manifest->lookup("obj").chunk_count);
    EXPECT_TRUE(w.router->audit("obj", 1).intact());
    EXPECT_EQ(code_of([&] { w.router->audit("obj", 1); }), ErrorCode::RoundExhausted);
    w.router->put(DataObject::binary("p", Bytes(9, 1), SecretLevel::Unclassified, {}));
    EXPECT_EQ(code_of([&] { w.router->audit("p", 1); }), ErrorCode::Unsupported);
}

TEST(Router, UnreachableColumnsReported) {
    World w;
    w.router->put(secret("obj", 8000));
    w.cloud.provider("c").set_unavailable(true);
    const auto report = w.router->audit("obj", 1);
    EXPECT_FALSE(report.intact());
    EXPECT_TRUE(report.corrupted().empty());
    for (const auto& e : report.entries) EXPECT_EQ(e.verdict == AuditVerdict::Unreachable, e.provider == "c");
}

TEST(Router, ParityColumnsAudited) {
    config::Policy policy;
    policy.parity = 2;
    policy.audit_blocks = 0;
    World w(4, policy);
    const auto obj = secret("obj", 9000);
    const auto rec = w.router->put(obj);
    ASSERT_EQ(rec.chunks[0].parity.size(), 2u);
    const auto& loc = rec.chunks[0].parity[1];
    w.cloud.inject(simcloud::Fault::corrupt_blob(loc.provider, loc.node, loc.blob_id, 20, 0x01));
    const auto bad = w.router->audit("obj", 1).corrupted();
    ASSERT_EQ(bad.size(), 1u);
    EXPECT_EQ(bad[0].column, rec.n + 1);
    EXPECT_EQ(w.router->get("obj").payload, obj.payload);
}

TEST(Router, NoProviderHoldsThresholdOfAnyChunk) {
    World w;
    w.router->put(secret("obj", 40000));
    for (const auto& p : w.cloud.providers()) {
        const auto a = scenario::assess_insider_dump(p->id(), p->insider_dump(), *w.manifest, *w.keystore);
        EXPECT_TRUE(a.secure()) << p->id();
        EXPECT_EQ(a.max_shares_of_chunk, 1u);
        EXPECT_EQ(a.min_threshold, 3u);
    }
}

TEST(Router, HomomorphicSum) {
    World w;
    ByteWriter words;
    std::int64_t expected = 0;
    for (std::int64_t v : {5, -12, 1000000, 77, -3}) {
        words.i64(v);
        expected += v;
    }
    w.router->put(DataObject::binary("ledger", words.bytes(), SecretLevel::Secret, OperationClass::BasicOperations));
    EXPECT_EQ(w.router->homomorphic_sum("ledger"), expected);
    w.router->put(secret("other", 100));
    EXPECT_EQ(code_of([&] { w.router->homomorphic_sum("other"); }), ErrorCode::Unsupported);
}

TEST(Router, WrongCredentialRejected) {
    World w(3, {}, "wrong");
    EXPECT_EQ(code_of([&] { w.router->put(secret("obj", 100)); }), ErrorCode::Unauthorized);
}

TEST(Router, FixedSizeChunks) {
    config::Policy policy;
    policy.fixed_chunk_size = 1000;
    World w(3, policy);
    const auto obj = secret("obj", 4500);
    const auto rec = w.router->put(obj);
    EXPECT_EQ(rec.chunk_count, 5u);
    EXPECT_EQ(rec.split_mode, entropy::SplitMode::FixedSize);
    EXPECT_EQ(w.router->get("obj").payload, obj.payload);
}

TEST(Router, LargeFileRaisesGranularity) {
    config::Policy policy;
    policy.granularity = 16;
    policy.max_blocks = 64;
    World w(5, policy);
    const auto obj = secret("big", 100000);
    const auto d = w.router->route(obj);
    EXPECT_EQ(d.granularity, (100000 + 63) / 64);
    const auto rec = w.router->put(obj);
    EXPECT_EQ(w.router->get("big").payload, obj.payload);
    EXPECT_EQ(rec.chunk_count, 5u);
}

TEST(Router, TinyPayloadGetsOneChunk) {
    World w;
    const auto obj = DataObject::binary("tiny", to_bytes("hi"), SecretLevel::Secret, {});
    EXPECT_EQ(w.router->put(obj).chunk_count, 1u);
    EXPECT_EQ(w.router->get("tiny").payload, obj.payload);
    EXPECT_EQ(code_of([&] { w.router->put(DataObject::binary("empty", {}, SecretLevel::Secret, {})); }),
              ErrorCode::EmptyInput);
}

TEST(Router, ConcurrentPutsOfDistinctObjects) {
    World w;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 3; ++i) w.router->put(secret("o" + std::to_string(t) + "-" + std::to_string(i), 6000));
        });
    for (auto& t : threads) t.join();
    EXPECT_EQ(w.manifest->object_ids().size(), 12u);
    for (const auto& id : w.manifest->object_ids()) EXPECT_EQ(w.router->get(id).payload, secret(id, 6000).payload);
}

TEST(Router, AnonymizedTableKeepsIdentifiersLocal) {
    World w;
    const auto t = people(30);
    w.router->put(DataObject::tabular("people", t, {"name"}, {}, SecretLevel::Secret, {}));
    for (const auto& p : w.cloud.providers())
        for (const auto& b : p->insider_dump())
            for (const auto& row : t.rows)
                EXPECT_FALSE(scenario::contains_bytes(b.data, as_bytes(std::get<std::string>(row[0]))));
    w.cloud.provider("b").set_unavailable(true);
    EXPECT_EQ(code_of([&] { w.router->get("people"); }), ErrorCode::MissingGroup);
}

TEST(Router, TamperedDispersedBlobsBeyondToleranceFail) {
    World w;
    const auto rec = w.router->put(secret("obj", 3000));
    for (std::size_t x = 0; x < 3; ++x) {
        const auto& loc = rec.chunks[0].shares[x];
        w.cloud.inject(simcloud::Fault::corrupt_blob(loc.provider, loc.node, loc.blob_id, 50, 0xff));
    }
    EXPECT_EQ(code_of([&] { w.router->get("obj"); }), ErrorCode::ReconstructionFailed);
}

TEST(Router, TamperedPlainBlobDetected) {
    World w;
    const auto rec = w.router->put(DataObject::binary("p", to_bytes("public but intact"), SecretLevel::Unclassified, {}));
    const auto& loc = rec.blobs[0];
    w.cloud.inject(simcloud::Fault::corrupt_blob(loc.provider, loc.node, loc.blob_id, 2, 0x01));
    EXPECT_EQ(code_of([&] { w.router->get("p"); }), ErrorCode::IntegrityViolation);
}
