#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "cloudsplit/crypto.hpp"
#include "cloudsplit/simcloud.hpp"

using namespace cloudsplit;
using namespace cloudsplit::simcloud;

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

}  // namespace

TEST(SimProvider, FaithfulStore) {
    SimProvider p("p", {1, 2, 3});
    DeterministicRng rng(1);
    std::vector<std::tuple<std::uint32_t, std::string, Bytes>> stored;
    for (int i = 0; i < 1000; ++i) {
        Bytes data(rng.uniform(200) + 1);
        rng.fill(data);
        const auto node = static_cast<std::uint32_t>(rng.uniform(3));
        const auto id = "b" + std::to_string(i);
        p.store_blob(node, id, data);
        stored.emplace_back(node, id, data);
    }
    for (const auto& [node, id, data] : stored) ASSERT_EQ(p.fetch_blob(node, id), data);
    EXPECT_EQ(p.blob_count(), 1000u);
}

TEST(SimProvider, UnavailableAndClear) {
    SimProvider p("p", {1, 1});
    p.store_blob(1, "x", to_bytes("hello"));
    const auto f = Fault::node_unavailable("p", 1);
    p.inject(f);
    p.inject(f);
    EXPECT_EQ(p.faults().size(), 1u);
    EXPECT_EQ(code_of([&] { p.fetch_blob(1, "x"); }), ErrorCode::Unavailable);
    EXPECT_EQ(code_of([&] { p.store_blob(1, "y", to_bytes("z")); }), ErrorCode::Unavailable);
    p.clear(f);
    EXPECT_EQ(p.fetch_blob(1, "x"), to_bytes("hello"));
    EXPECT_EQ(code_of([&] { p.fetch_blob(0, "x"); }), ErrorCode::UnknownBlob);
    EXPECT_EQ(code_of([&] { p.fetch_blob(2, "x"); }), ErrorCode::UnknownTarget);
}

TEST(SimProvider, CorruptionIsXorAtOffset) {
    SimProvider p("p", {1});
    const auto data = to_bytes("abcdefgh");
    p.store_blob(0, "x", data);
    p.inject(Fault::corrupt_blob("p", 0, "x", 3, 0x21));
    const auto got = p.fetch_blob(0, "x");
    for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(got[i], i == 3 ? data[i] ^ 0x21 : data[i]);
    p.clear_all();
    EXPECT_EQ(p.fetch_blob(0, "x"), data);
    EXPECT_EQ(code_of([&] { p.inject(Fault::corrupt_blob("p", 0, "nope", 0, 1)); }), ErrorCode::UnknownTarget);
    EXPECT_EQ(code_of([&] { p.inject(Fault::corrupt_blob("p", 0, "x", 99, 1)); }), ErrorCode::UnknownTarget);
    EXPECT_EQ(code_of([&] { p.inject(Fault::node_unavailable("q", 0)); }), ErrorCode::UnknownTarget);
}

TEST(SimProvider, InsiderDumpSeesEverythingInOrder) {
    SimProvider p("p", {1, 3});
    p.store_blob(1, "b", to_bytes("2"));
    p.store_blob(0, "z", to_bytes("1"));
    p.store_blob(1, "a", to_bytes("3"));
    const auto dump = p.insider_dump();
    ASSERT_EQ(dump.size(), 3u);
    EXPECT_EQ(dump[0].blob_id, "z");
    EXPECT_EQ(dump[1].blob_id, "a");
    EXPECT_EQ(dump[1].depth, 3u);
    EXPECT_EQ(dump[2].blob_id, "b");
    EXPECT_FALSE(p.compromised());
    p.inject(Fault::insider_dump("p"));
    EXPECT_TRUE(p.compromised());
}

TEST(SimCloud, FaultsStayWithTheirProvider) {
    SimCloud cloud;
    cloud.add(std::make_shared<SimProvider>("a", std::vector<std::uint32_t>{1}));
    cloud.add(std::make_shared<SimProvider>("b", std::vector<std::uint32_t>{1}));
    EXPECT_THROW(cloud.add(std::make_shared<SimProvider>("a", std::vector<std::uint32_t>{1})), Error);
    cloud.provider("a").store_blob(0, "x", to_bytes("A"));
    cloud.provider("b").store_blob(0, "x", to_bytes("B"));
    cloud.inject(Fault::node_unavailable("a", 0));
    cloud.inject(Fault::corrupt_blob("b", 0, "x", 0, 1));
    EXPECT_THROW(cloud.provider("a").fetch_blob(0, "x"), Error);
    EXPECT_EQ(cloud.provider("b").fetch_blob(0, "x"), Bytes{'B' ^ 1});
    cloud.clear_all();
    EXPECT_EQ(cloud.provider("a").fetch_blob(0, "x"), to_bytes("A"));
    EXPECT_EQ(code_of([&] { cloud.inject(Fault::node_unavailable("zz", 0)); }), ErrorCode::UnknownTarget);
}

TEST(SimCloud, ConcurrentProviders) {
    SimCloud cloud;
    for (int i = 0; i < 4; ++i) cloud.add(std::make_shared<SimProvider>("p" + std::to_string(i), std::vector<std::uint32_t>{1, 1}));
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
            auto& p = cloud.provider("p" + std::to_string(t % 4));
            for (int i = 0; i < 200; ++i) {
                const auto id = "t" + std::to_string(t) + "-" + std::to_string(i);
                p.store_blob(static_cast<std::uint32_t>(i % 2), id, to_bytes(id));
                EXPECT_EQ(p.fetch_blob(static_cast<std::uint32_t>(i % 2), id), to_bytes(id));
            }
        });
    for (auto& t : threads) t.join();
    std::size_t total = 0;
    for (const auto& p : cloud.providers()) total += p->blob_count();
    EXPECT_EQ(total, 1600u);
}

TEST(SimProvider, MirrorsToDisk) {
    const auto dir = std::filesystem::temp_directory_path() / ("cloudsplit-simtest-" + to_hex(random_key(6)));
    {
        SimProvider p("p", {1, 1}, dir);
        p.store_blob(1, "keep", to_bytes("persisted"));
    }
    SimProvider again("p", {1, 1}, dir);
    EXPECT_EQ(again.fetch_blob(1, "keep"), to_bytes("persisted"));
    std::filesystem::remove_all(dir);
}

TEST(SimProvider, Authentication) {
    SimProvider p("p", {1}, std::nullopt, "s3cret");
    EXPECT_TRUE(p.authenticate("s3cret"));
    EXPECT_FALSE(p.authenticate("sim"));
}
