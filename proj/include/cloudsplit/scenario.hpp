#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cloudsplit/config.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/persistence.hpp"
#include "cloudsplit/report.hpp"
#include "cloudsplit/router.hpp"
#include "cloudsplit/simcloud.hpp"

namespace cloudsplit::scenario {

// Simulated providers for a config. With `persistent` each provider mirrors
// its blobs under its configured store directory, or <default_root>/<id>.
inline simcloud::SimCloud make_cloud(const config::Config& cfg, bool persistent,
                                     const std::filesystem::path& default_root = {}) {
    simcloud::SimCloud cloud;
    for (const auto& p : cfg.providers) {
        std::optional<std::filesystem::path> root;
        if (persistent) root = p.store.value_or(default_root / p.id);
        cloud.add(std::make_shared<simcloud::SimProvider>(p.id, p.depths, root, p.credential));
    }
    return cloud;
}

struct InsiderAssessment {
    std::string provider;
    std::size_t blobs = 0;
    std::size_t chunks_examined = 0;
    std::uint32_t max_shares_of_chunk = 0;  // most shares of one chunk this provider holds
    std::uint32_t min_threshold = 0;        // smallest k among the examined objects
    bool reconstructible = false;           // some chunk has >= k co-resident shares
    bool secrets_exposed = false;           // a keystore value appears in a dumped blob
    bool plaintext_exposed = false;         // a known secret chunk appears verbatim

    bool secure() const { return !reconstructible && !secrets_exposed && !plaintext_exposed; }
};

inline bool contains_bytes(ByteView hay, ByteView needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// Judges what one provider learns from everything it stores, against the
// Secret-level dispersed objects of the manifest. `known_plaintexts` maps
// object ids to payloads whose chunks must never appear in the dump.
inline InsiderAssessment assess_insider_dump(const std::string& provider_id,
                                             const std::vector<simcloud::DumpedBlob>& dump,
                                             const persistence::ManifestStore& manifest,
                                             const persistence::KeyStore& keystore,
                                             const std::map<std::string, Bytes>& known_plaintexts = {}) {
    InsiderAssessment a;
    a.provider = provider_id;
    a.blobs = dump.size();
    std::map<std::pair<std::uint32_t, std::string>, const Bytes*> held;
    for (const auto& b : dump) held[{b.node, b.blob_id}] = &b.data;

    for (const auto& id : manifest.object_ids()) {
        const auto rec = manifest.lookup(id);
        if (rec.level != SecretLevel::Secret || rec.pipeline != Pipeline::SplitShareDisperse) continue;
        if (a.min_threshold == 0 || rec.k < a.min_threshold) a.min_threshold = rec.k;
        const auto known = known_plaintexts.find(id);
        for (std::size_t slot = 0; slot < rec.chunks.size(); ++slot) {
            const auto& chunk = rec.chunks[slot];
            ++a.chunks_examined;
            std::vector<shamir::Share> shares;
            for (const auto& loc : chunk.shares) {
                if (loc.provider != provider_id) continue;
                auto it = held.find({loc.node, loc.blob_id});
                if (it == held.end()) continue;
                try {
                    shares.push_back(shamir::deserialize(*it->second));
                } catch (const Error&) {
                }
            }
            a.max_shares_of_chunk = std::max<std::uint32_t>(a.max_shares_of_chunk, static_cast<std::uint32_t>(shares.size()));
            if (shares.size() >= rec.k) a.reconstructible = true;
            if (known != known_plaintexts.end()) {
                const auto true_index = rec.sequence_permutation[slot];
                const std::uint64_t begin = true_index == 0 ? 0 : rec.cut_points.at(true_index - 1);
                const ByteView plain = ByteView(known->second).subspan(begin, chunk.length);
                for (const auto& b : dump)
                    if (plain.size() >= 8 && contains_bytes(b.data, plain)) a.plaintext_exposed = true;
            }
        }
    }
    for (const auto& secret : keystore.all_values()) {
        if (secret.size() < 16) continue;
        for (const auto& b : dump)
            if (contains_bytes(b.data, secret)) a.secrets_exposed = true;
    }
    return a;
}

inline std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

// Every location of an object in manifest order: per slot the shares then
// the parity columns, then whole-object blobs.
inline std::vector<persistence::BlobLocation> locations(const persistence::ManifestRecord& rec) {
    std::vector<persistence::BlobLocation> out;
    for (const auto& c : rec.chunks) {
        out.insert(out.end(), c.shares.begin(), c.shares.end());
        out.insert(out.end(), c.parity.begin(), c.parity.end());
    }
    out.insert(out.end(), rec.blobs.begin(), rec.blobs.end());
    return out;
}

struct ScenarioResult {
    report::Report report;
    bool passed = true;
};

// Runs the config's `step` lines against in-memory providers, a scratch
// manifest and keystore. Step grammar:
//   put <id> <level> <ops> random <bytes> | text <words...> | file <path> | table <rows>
//   fault unavailable <provider> [node] | fault corrupt <id> <blob#> [offset] [mask] | fault insider <provider>
//   clear unavailable <provider> [node] | clear all
//   expect get <id> ok|<ErrorCode>
//   expect audit <id> <rounds> intact|corrupted|<ErrorCode>
//   expect insider <provider>|all secure|exposed
//   expect route <level> <ops> <Pipeline> [binary|table]
class Runner {
public:
    Runner(const config::Config& cfg, std::uint64_t seed)
        : cfg_(cfg),
          seed_(seed),
          scratch_(std::filesystem::temp_directory_path() /
                   ("cloudsplit-sim-" + to_hex(random_key(8)))),
          cloud_(make_cloud(cfg, false)) {
        std::filesystem::create_directories(scratch_);
        manifest_ = std::make_unique<persistence::ManifestStore>(scratch_ / "manifest.cmf");
        keystore_ = std::make_unique<persistence::KeyStore>(scratch_ / "keys.cks");
        router_ = std::make_unique<router::Router>(cfg.policy, cloud_.endpoints(), config::provider_profiles(cfg),
                                                   *manifest_, *keystore_, seed, cfg.credential);
    }

    ~Runner() {
        std::error_code ec;
        router_.reset();
        manifest_.reset();
        keystore_.reset();
        std::filesystem::remove_all(scratch_, ec);
    }

    Runner(const Runner&) = delete;
    Runner& operator=(const Runner&) = delete;

    ScenarioResult run() {
        ScenarioResult result;
        if (cfg_.steps.empty()) fail(ErrorCode::ConfigError, "scenario has no steps");
        for (std::size_t i = 0; i < cfg_.steps.size(); ++i) {
            const auto key = "step." + std::to_string(i + 1);
            std::string detail;
            bool ok = false;
            try {
                ok = step(words(cfg_.steps[i]), detail);
            } catch (const Error& e) {
                detail = "unexpected " + std::string(to_string(e.code())) + ": " + e.what();
            }
            result.passed = result.passed && ok;
            result.report.add(key, std::string(ok ? "pass " : "fail ") + cfg_.steps[i]);
            if (!detail.empty()) result.report.add(key + ".detail", detail);
        }
        result.report.add("scenario", result.passed ? "pass" : "fail");
        return result;
    }

    router::Router& router() { return *router_; }
    simcloud::SimCloud& cloud() { return cloud_; }
    const persistence::ManifestStore& manifest() const { return *manifest_; }
    const persistence::KeyStore& keystore() const { return *keystore_; }

private:
    static std::string code_of(const Error& e) { return std::string(to_string(e.code())); }

    static void need(const std::vector<std::string>& w, std::size_t n) {
        if (w.size() < n) fail(ErrorCode::ConfigError, "step '" + (w.empty() ? "" : w[0]) + "' needs more arguments");
    }

    bool step(const std::vector<std::string>& w, std::string& detail) {
        need(w, 1);
        if (w[0] == "put") return put(w, detail);
        if (w[0] == "fault" || w[0] == "clear") return fault(w, detail);
        if (w[0] == "expect") return expect(w, detail);
        fail(ErrorCode::ConfigError, "unknown step '" + w[0] + "'");
    }

    router::DataObject make_object(const std::vector<std::string>& w) {
        need(w, 6);
        const auto level = parse_level(w[2]);
        const auto ops = parse_ops(w[3]);
        DeterministicRng rng(seed_ + ++puts_);
        if (w[4] == "table") {
            const auto rows = config::parse_uint(w[5], "rows");
            anonymize::Table t;
            t.columns = {"ssn", "name", "age", "balance"};
            for (std::uint64_t r = 0; r < rows; ++r) {
                t.rows.push_back({std::string("ssn-") + std::to_string(100000000 + rng.uniform(900000000)),
                                  "name-" + to_hex(random_bytes(rng, 4)), static_cast<std::int64_t>(rng.uniform(100)),
                                  static_cast<std::int64_t>(rng.uniform(1000000))});
            }
            return router::DataObject::tabular(w[1], std::move(t), {"ssn"}, {}, level, ops);
        }
        Bytes payload;
        if (w[4] == "random") {
            payload = random_bytes(rng, config::parse_uint(w[5], "bytes"));
        } else if (w[4] == "text") {
            std::string text;
            for (std::size_t i = 5; i < w.size(); ++i) text += (i > 5 ? " " : "") + w[i];
            payload = to_bytes(text);
        } else if (w[4] == "file") {
            std::filesystem::path p(w[5]);
            if (!p.is_absolute()) p = cfg_.base_dir / p;
            std::ifstream in(p, std::ios::binary);
            if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
            payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        } else {
            fail(ErrorCode::ConfigError, "unknown payload source '" + w[4] + "'");
        }
        return router::DataObject::binary(w[1], std::move(payload), level, ops);
    }

    template <class Rng>
    static Bytes random_bytes(Rng& rng, std::size_t n) {
        Bytes out(n);
        for (auto& b : out) b = static_cast<std::uint8_t>(rng.uniform(256));
        return out;
    }

    bool put(const std::vector<std::string>& w, std::string& detail) {
        auto obj = make_object(w);
        const auto rec = router_->put(obj);
        objects_[obj.object_id] = obj;
        if (obj.kind == ObjectKind::Binary && obj.level == SecretLevel::Secret) secrets_[obj.object_id] = obj.payload;
        detail = "pipeline=" + std::string(to_string(rec.pipeline));
        if (rec.pipeline == Pipeline::SplitShareDisperse)
            detail += " k=" + std::to_string(rec.k) + " n=" + std::to_string(rec.n) + " C=" + std::to_string(rec.chunk_count);
        return true;
    }

    bool fault(const std::vector<std::string>& w, std::string& detail) {
        need(w, 2);
        const bool inject = w[0] == "fault";
        if (w[1] == "all" && !inject) {
            cloud_.clear_all();
            return true;
        }
        if (w[1] == "unavailable") {
            need(w, 3);
            auto& p = cloud_.provider(w[2]);
            if (w.size() > 3) {
                const auto f = simcloud::Fault::node_unavailable(w[2], static_cast<std::uint32_t>(config::parse_uint(w[3], "node")));
                inject ? p.inject(f) : p.clear(f);
            } else {
                p.set_unavailable(inject);
            }
            return true;
        }
        if (w[1] == "insider") {
            need(w, 3);
            const auto f = simcloud::Fault::insider_dump(w[2]);
            inject ? cloud_.inject(f) : cloud_.clear(f);
            return true;
        }
        if (w[1] == "corrupt") {
            need(w, 4);
            const auto all = locations(manifest_->lookup(w[2]));
            const auto ordinal = config::parse_uint(w[3], "blob ordinal");
            if (ordinal >= all.size())
                fail(ErrorCode::UnknownTarget, w[2] + " has only " + std::to_string(all.size()) + " blobs");
            const auto& loc = all[ordinal];
            const std::size_t offset = w.size() > 4 ? config::parse_uint(w[4], "offset") : 0;
            const auto mask = static_cast<std::uint8_t>(w.size() > 5 ? config::parse_uint(w[5], "mask") : 0xff);
            if (mask == 0) fail(ErrorCode::ConfigError, "corruption mask must be nonzero");
            const auto f = simcloud::Fault::corrupt_blob(loc.provider, loc.node, loc.blob_id, offset, mask);
            inject ? cloud_.inject(f) : cloud_.clear(f);
            detail = "provider=" + loc.provider + " node=" + std::to_string(loc.node) + " blob=" + loc.blob_id;
            return true;
        }
        fail(ErrorCode::ConfigError, "unknown fault '" + w[1] + "'");
    }

    bool expect(const std::vector<std::string>& w, std::string& detail) {
        need(w, 2);
        if (w[1] == "get") {
            need(w, 4);
            try {
                const auto got = router_->get(w[2]);
                const auto& want = objects_.at(w[2]);
                const bool same = got.kind == ObjectKind::Binary ? got.payload == want.payload
                                                                  : anonymize::serialize_table(got.table) ==
                                                                        anonymize::serialize_table(want.table);
                detail = same ? "ok" : "content differs";
                return w[3] == "ok" && same;
            } catch (const Error& e) {
                detail = code_of(e);
                return w[3] == code_of(e);
            }
        }
        if (w[1] == "audit") {
            need(w, 5);
            try {
                const auto rep = router_->audit(w[2], config::parse_uint(w[3], "rounds"));
                const auto bad = rep.corrupted();
                detail = rep.intact() ? "intact" : "corrupted=" + std::to_string(bad.size());
                for (const auto& e : bad) detail += " " + e.provider + "/" + std::to_string(e.node) + "/col" + std::to_string(e.column);
                if (w[4] == "intact") return rep.intact();
                if (w[4] == "corrupted") return !bad.empty();
                return false;
            } catch (const Error& e) {
                detail = code_of(e);
                return w[4] == code_of(e);
            }
        }
        if (w[1] == "insider") {
            need(w, 4);
            std::vector<std::string> targets;
            if (w[2] == "all")
                for (const auto& p : cloud_.providers()) targets.push_back(p->id());
            else
                targets.push_back(w[2]);
            bool all_secure = true;
            for (const auto& id : targets) {
                const auto a = assess_insider_dump(id, cloud_.provider(id).insider_dump(), *manifest_, *keystore_, secrets_);
                all_secure = all_secure && a.secure();
                detail += (detail.empty() ? "" : " ") + id + ":shares=" + std::to_string(a.max_shares_of_chunk) + "/k=" +
                          std::to_string(a.min_threshold) + (a.secure() ? ":secure" : ":exposed");
            }
            if (w[3] == "secure") return all_secure;
            if (w[3] == "exposed") return !all_secure;
            fail(ErrorCode::ConfigError, "expect insider takes secure|exposed");
        }
        if (w[1] == "route") {
            need(w, 5);
            router::DataObject obj;
            obj.object_id = "route-probe";
            obj.level = parse_level(w[2]);
            obj.ops = parse_ops(w[3]);
            obj.payload = Bytes(4096, 0x5a);
            if (w.size() > 5 && w[5] == "table") obj.kind = ObjectKind::Table;
            const auto d = router::route(obj, cfg_.policy, router_->profiles());
            detail = std::string(to_string(d.pipeline));
            return detail == w[4];
        }
        fail(ErrorCode::ConfigError, "unknown expectation '" + w[1] + "'");
    }

    const config::Config& cfg_;
    std::uint64_t seed_;
    std::filesystem::path scratch_;
    simcloud::SimCloud cloud_;
    std::unique_ptr<persistence::ManifestStore> manifest_;
    std::unique_ptr<persistence::KeyStore> keystore_;
    std::unique_ptr<router::Router> router_;
    std::map<std::string, router::DataObject> objects_;
    std::map<std::string, Bytes> secrets_;
    std::uint64_t puts_ = 0;
};

inline ScenarioResult run_scenario(const config::Config& cfg, std::uint64_t seed) {
    Runner runner(cfg, seed);
    return runner.run();
}

}  // namespace cloudsplit::scenario
