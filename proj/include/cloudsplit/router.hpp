#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cloudsplit/anonymize.hpp"
#include "cloudsplit/bytes.hpp"
#include "cloudsplit/config.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/entropy_split.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/homomorphic.hpp"
#include "cloudsplit/integrity.hpp"
#include "cloudsplit/persistence.hpp"
#include "cloudsplit/ranking.hpp"
#include "cloudsplit/shamir.hpp"
#include "cloudsplit/simcloud.hpp"
#include "cloudsplit/types.hpp"

namespace cloudsplit::router {

using config::Policy;
using persistence::BlobLocation;
using persistence::ManifestRecord;

struct DataObject {
    std::string object_id;
    ObjectKind kind = ObjectKind::Binary;
    Bytes payload;
    anonymize::Table table;
    std::vector<std::string> id_columns;
    std::vector<std::vector<std::string>> groups;  // empty: one group per non-identifier column
    SecretLevel level = SecretLevel::Unclassified;
    OperationClass ops = OperationClass::NoOperations;

    static DataObject binary(std::string id, Bytes payload, SecretLevel level, OperationClass ops) {
        DataObject o;
        o.object_id = std::move(id);
        o.payload = std::move(payload);
        o.level = level;
        o.ops = ops;
        return o;
    }

    static DataObject tabular(std::string id, anonymize::Table table, std::vector<std::string> id_columns,
                              std::vector<std::vector<std::string>> groups, SecretLevel level, OperationClass ops) {
        DataObject o;
        o.object_id = std::move(id);
        o.kind = ObjectKind::Table;
        o.table = std::move(table);
        o.id_columns = std::move(id_columns);
        o.groups = std::move(groups);
        o.level = level;
        o.ops = ops;
        return o;
    }
};

struct RoutingDecision {
    Pipeline pipeline = Pipeline::LocalOnly;
    std::string reason;
    std::uint32_t k = 0;
    std::uint32_t n = 0;
    std::size_t chunks = 0;
    std::size_t granularity = 0;
    entropy::SplitMode split_mode = entropy::SplitMode::EntropyDP;
    std::vector<std::string> providers;  // in rank order
};

inline std::uint32_t default_threshold(std::uint32_t n) { return (n + 2) / 2; }  // ceil((n + 1) / 2)

// Pure dispatch on (level, operation class, kind).
inline RoutingDecision route(const DataObject& obj, const Policy& policy,
                             const std::vector<ranking::ProviderProfile>& providers) {
    RoutingDecision d;
    if (obj.level == SecretLevel::TopSecret) {
        d.pipeline = Pipeline::LocalOnly;
        d.reason = "top secret data stays local";
        return d;
    }
    if (providers.empty()) fail(ErrorCode::NoProviders, "no cloud providers configured");
    const auto ranked = ranking::rank_providers(providers, policy.weights);

    if (obj.level == SecretLevel::Unclassified) {
        d.pipeline = Pipeline::PlainSingleCloud;
        d.reason = "unclassified data goes to one cloud unencrypted";
        d.providers = {ranked.front().id};
        return d;
    }
    if (obj.ops == OperationClass::AdvancedAnalytics) {
        d.pipeline = Pipeline::Rejected;
        d.reason = "advanced analytics tier not implemented";
        return d;
    }
    if (obj.kind == ObjectKind::Table) {
        d.pipeline = Pipeline::AnonymizedPartition;
        d.reason = "secret table: hashed identifiers, columns split across providers";
        for (const auto& p : ranked) d.providers.push_back(p.id);
        return d;
    }
    if (obj.ops == OperationClass::BasicOperations) {
        d.pipeline = Pipeline::HomomorphicStore;
        d.reason = "secret data needing basic operations: additive homomorphic encryption";
        d.providers = {ranked.front().id};
        return d;
    }

    d.pipeline = Pipeline::SplitShareDisperse;
    d.reason = "secret data without operations: split, share and disperse";
    const auto count = static_cast<std::uint32_t>(ranked.size());
    d.n = policy.n.value_or(count);
    if (d.n < 1 || d.n > count)
        fail(ErrorCode::InvalidScheme, "n=" + std::to_string(d.n) + " but " + std::to_string(count) + " providers");
    d.k = policy.k.value_or(default_threshold(d.n));
    shamir::ShareScheme{d.k, d.n}.validate();
    for (std::uint32_t i = 0; i < d.n; ++i) d.providers.push_back(ranked[i].id);

    const std::size_t length = obj.payload.size();
    if (length == 0) fail(ErrorCode::EmptyInput, "cannot disperse an empty payload");
    if (policy.fixed_chunk_size > 0) {
        d.split_mode = entropy::SplitMode::FixedSize;
        d.granularity = policy.fixed_chunk_size;
        d.chunks = (length + policy.fixed_chunk_size - 1) / policy.fixed_chunk_size;
        return d;
    }
    std::size_t granularity = std::max<std::size_t>(1, std::min(policy.granularity, length));
    if (policy.max_blocks > 0 && (length + granularity - 1) / granularity > policy.max_blocks)
        granularity = (length + policy.max_blocks - 1) / policy.max_blocks;
    d.granularity = granularity;
    d.chunks = std::max<std::size_t>(1, std::min({policy.max_chunks, ranked.size(), length / granularity}));
    return d;
}

enum class AuditVerdict : std::uint8_t { Intact, Corrupted, Unreachable };

inline std::string_view to_string(AuditVerdict v) {
    switch (v) {
        case AuditVerdict::Intact: return "Intact";
        case AuditVerdict::Corrupted: return "Corrupted";
        case AuditVerdict::Unreachable: return "Unreachable";
    }
    return "?";
}

struct AuditEntry {
    std::size_t slot = 0;
    std::size_t round = 0;
    std::size_t column = 0;
    std::string provider;
    std::uint32_t node = 0;
    std::string blob_id;
    AuditVerdict verdict = AuditVerdict::Intact;
};

struct AuditReport {
    std::string object_id;
    std::size_t rounds = 0;
    std::vector<AuditEntry> entries;

    bool intact() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const auto& e) { return e.verdict == AuditVerdict::Intact; });
    }

    std::vector<AuditEntry> corrupted() const {
        std::vector<AuditEntry> out;
        for (const auto& e : entries)
            if (e.verdict == AuditVerdict::Corrupted) out.push_back(e);
        return out;
    }
};

class Router {
public:
    // With a seed every key, nonce and placement is derived from it
    // (reproducible runs); without one they come from the system RNG.
    Router(Policy policy, std::vector<std::shared_ptr<simcloud::CloudProvider>> providers,
           std::vector<ranking::ProviderProfile> profiles, persistence::ManifestStore& manifest,
           persistence::KeyStore& keystore, std::optional<std::uint64_t> seed = std::nullopt,
           std::string credential = "sim")
        : policy_(std::move(policy)),
          providers_(std::move(providers)),
          profiles_(std::move(profiles)),
          manifest_(manifest),
          keystore_(keystore),
          seed_(seed),
          credential_(std::move(credential)) {
        for (const auto& p : profiles_) {
            p.validate();
            provider(p.id);
        }
        if (profiles_.size() != providers_.size())
            fail(ErrorCode::ConfigError, "every provider needs exactly one profile");
    }

    const Policy& policy() const { return policy_; }
    const std::vector<ranking::ProviderProfile>& profiles() const { return profiles_; }

    RoutingDecision route(const DataObject& obj) const {
        if (manifest_.contains(obj.object_id))
            fail(ErrorCode::DuplicateObject, "object '" + obj.object_id + "' already stored");
        return router::route(obj, policy_, profiles_);
    }

    ManifestRecord put(const DataObject& obj) {
        if (obj.object_id.empty()) fail(ErrorCode::InvalidArgument, "object id must not be empty");
        InFlight guard(*this, obj.object_id);
        const auto decision = route(obj);
        manifest_.require_clean();
        keystore_.require_clean();

        ManifestRecord rec;
        rec.object_id = obj.object_id;
        rec.pipeline = decision.pipeline;
        rec.kind = obj.kind;
        rec.level = obj.level;
        rec.ops = obj.ops;

        const Bytes key = object_key(obj.object_id);
        switch (decision.pipeline) {
            case Pipeline::Rejected:
                fail(ErrorCode::Unsupported, decision.reason);
            case Pipeline::LocalOnly:
                put_local(obj, rec);
                break;
            case Pipeline::PlainSingleCloud:
                put_plain(obj, decision, key, rec);
                break;
            case Pipeline::SplitShareDisperse:
                put_dispersed(obj, decision, key, rec);
                break;
            case Pipeline::HomomorphicStore:
                put_homomorphic(obj, decision, key, rec);
                break;
            case Pipeline::AnonymizedPartition:
                put_anonymized(obj, decision, key, rec);
                break;
        }
        check_locations(rec);
        rec.version = manifest_.commit(rec);
        return rec;
    }

    DataObject get(const std::string& object_id) const {
        const auto rec = manifest_.lookup(object_id);
        DataObject out;
        out.object_id = rec.object_id;
        out.kind = rec.kind;
        out.level = rec.level;
        out.ops = rec.ops;
        switch (rec.pipeline) {
            case Pipeline::LocalOnly:
            case Pipeline::PlainSingleCloud: {
                const Bytes data = rec.pipeline == Pipeline::LocalOnly
                                       ? keystore_.get(rec.key_ref, persistence::SecretKind::LocalObject)
                                       : fetch_verified(rec.blobs.at(0));
                if (rec.kind == ObjectKind::Table) out.table = anonymize::parse_table(data);
                else out.payload = data;
                break;
            }
            case Pipeline::SplitShareDisperse:
                out.payload = get_dispersed(rec);
                break;
            case Pipeline::HomomorphicStore:
                out.payload = get_homomorphic(rec);
                break;
            case Pipeline::AnonymizedPartition:
                out.table = get_anonymized(rec);
                break;
            case Pipeline::Rejected:
                fail(ErrorCode::NotFound, "rejected objects are never stored");
        }
        if (rec.kind == ObjectKind::Binary && sha256(out.payload) != rec.payload_digest)
            fail(ErrorCode::IntegrityViolation, "payload digest mismatch for '" + object_id + "'");
        return out;
    }

    // Runs `rounds` unused challenge rounds against every stored column of a
    // dispersed object and attributes failures to the provider holding it.
    AuditReport audit(const std::string& object_id, std::size_t rounds) {
        const auto rec = manifest_.lookup(object_id);
        if (rec.pipeline != Pipeline::SplitShareDisperse)
            fail(ErrorCode::Unsupported, "audit needs precomputed tokens; pipeline " +
                                             std::string(cloudsplit::to_string(rec.pipeline)) + " has none");
        AuditReport report;
        report.object_id = object_id;
        report.rounds = rounds;
        for (std::size_t slot = 0; slot < rec.chunks.size(); ++slot) {
            const auto& chunk = rec.chunks[slot];
            const auto table_id = rec.integrity_ref + "/" + std::to_string(slot);
            auto table = integrity::deserialize_tokens(keystore_.get(table_id, persistence::SecretKind::TokenTable));
            std::vector<const BlobLocation*> columns;
            for (const auto& l : chunk.shares) columns.push_back(&l);
            for (const auto& l : chunk.parity) columns.push_back(&l);
            for (std::size_t i = 0; i < rounds; ++i) {
                const auto round = table.next_fresh_round();
                if (!round) fail(ErrorCode::RoundExhausted, "all precomputed rounds used for '" + object_id + "'");
                for (std::size_t j = 0; j < columns.size(); ++j) {
                    const auto& loc = *columns[j];
                    AuditEntry e{slot, *round, j, loc.provider, loc.node, loc.blob_id, AuditVerdict::Intact};
                    const auto msg = integrity::challenge(table, *round, j);
                    try {
                        const auto wire =
                            provider(loc.provider).answer_challenge(loc.node, loc.blob_id, integrity::encode_challenge(msg));
                        const auto resp = integrity::decode_response(wire);
                        if (resp.round != *round || resp.column != j) fail(ErrorCode::MalformedData, "mismatched response");
                        e.verdict = integrity::verify(table, *round, j, resp.value).verdict == integrity::Verdict::Intact
                                        ? AuditVerdict::Intact
                                        : AuditVerdict::Corrupted;
                    } catch (const Error& err) {
                        if (err.code() == ErrorCode::Unavailable) e.verdict = AuditVerdict::Unreachable;
                        else e.verdict = AuditVerdict::Corrupted;  // garbled or missing answer
                    }
                    report.entries.push_back(std::move(e));
                }
            }
            keystore_.put(table_id, persistence::SecretKind::TokenTable, integrity::serialize(table));
        }
        return report;
    }

    // Sums the stored 64-bit words on ciphertexts, decrypting only the total.
    std::int64_t homomorphic_sum(const std::string& object_id) const {
        const auto rec = manifest_.lookup(object_id);
        if (rec.pipeline != Pipeline::HomomorphicStore)
            fail(ErrorCode::Unsupported, "object '" + object_id + "' is not homomorphically stored");
        const auto kp = homomorphic::deserialize_keypair(keystore_.get(rec.key_ref, persistence::SecretKind::HomomorphicKey));
        const auto cts = parse_ciphertexts(fetch_verified(rec.blobs.at(0)));
        if (cts.empty()) return 0;
        auto acc = cts.front();
        for (std::size_t i = 1; i < cts.size(); ++i) acc = homomorphic::he_add(kp.pub, acc, cts[i]);
        return homomorphic::decode_signed(kp.pub, homomorphic::decrypt(kp, acc));
    }

    simcloud::CloudProvider& provider(const std::string& id) const {
        for (const auto& p : providers_)
            if (p->id() == id) return *p;
        fail(ErrorCode::UnknownTarget, "unknown provider '" + id + "'");
    }

private:
    // Serializes puts of the same object id; different ids proceed in parallel.
    class InFlight {
    public:
        InFlight(Router& r, std::string id) : r_(r), id_(std::move(id)) {
            std::lock_guard lock(r_.mu_);
            if (!r_.in_flight_.insert(id_).second)
                fail(ErrorCode::DuplicateObject, "object '" + id_ + "' is being stored concurrently");
        }
        ~InFlight() {
            std::lock_guard lock(r_.mu_);
            r_.in_flight_.erase(id_);
        }

    private:
        Router& r_;
        std::string id_;
    };

    Bytes object_key(const std::string& object_id) const {
        if (!seed_) return random_key();
        ByteWriter w;
        w.u64(*seed_);
        return derive_key(w.bytes(), "cloudsplit.object/" + object_id);
    }

    static std::string label_id(ByteView key, const std::string& label, std::size_t hex_chars) {
        return to_hex(hmac_sha256(key, as_bytes(label))).substr(0, hex_chars);
    }

    void authenticate(const std::string& id) const {
        if (!provider(id).authenticate(credential_))
            fail(ErrorCode::Unauthorized, "provider '" + id + "' rejected our credential");
    }

    std::vector<simcloud::NodeInfo> nodes_of(const std::string& id) const { return provider(id).nodes(); }

    BlobLocation store(const std::string& provider_id, std::uint32_t node, const std::string& blob_id, ByteView data,
                       std::uint32_t x = 0) const {
        provider(provider_id).store_blob(node, blob_id, data);
        return {provider_id, node, blob_id, x, sha256(data)};
    }

    Bytes fetch_verified(const BlobLocation& loc) const {
        auto data = provider(loc.provider).fetch_blob(loc.node, loc.blob_id);
        if (sha256(data) != loc.digest)
            fail(ErrorCode::IntegrityViolation, "blob " + loc.blob_id + " on " + loc.provider + " was modified");
        return data;
    }

    void check_locations(const ManifestRecord& rec) const {
        auto check = [this](const BlobLocation& l) {
            const auto nodes = nodes_of(l.provider);
            if (l.node >= nodes.size()) fail(ErrorCode::UnknownTarget, "provider " + l.provider + " has no such node");
        };
        for (const auto& c : rec.chunks) {
            for (const auto& l : c.shares) check(l);
            for (const auto& l : c.parity) check(l);
        }
        for (const auto& l : rec.blobs) check(l);
    }

    void put_local(const DataObject& obj, ManifestRecord& rec) {
        const Bytes data = obj.kind == ObjectKind::Table ? anonymize::serialize_table(obj.table) : obj.payload;
        rec.key_ref = "local/" + obj.object_id;
        rec.length = data.size();
        rec.payload_digest = sha256(obj.payload);
        keystore_.put(rec.key_ref, persistence::SecretKind::LocalObject, data);
    }

    void put_plain(const DataObject& obj, const RoutingDecision& d, ByteView key, ManifestRecord& rec) {
        const auto& target = d.providers.front();
        authenticate(target);
        const Bytes data = obj.kind == ObjectKind::Table ? anonymize::serialize_table(obj.table) : obj.payload;
        rec.length = data.size();
        rec.payload_digest = sha256(obj.payload);
        rec.blobs.push_back(store(target, 0, label_id(key, "whole/0", 32), data));
    }

    void put_dispersed(const DataObject& obj, const RoutingDecision& d, const Bytes& key, ManifestRecord& rec) {
        const ByteView payload = obj.payload;
        for (const auto& p : d.providers) authenticate(p);
        DeterministicRng rng(key, "cloudsplit.put");

        const auto plan = d.split_mode == entropy::SplitMode::FixedSize
                              ? entropy::plan_fixed_size(payload, d.granularity)
                              : entropy::plan_split(payload, d.chunks, d.granularity);
        std::vector<entropy::NodeRef> nodes;
        for (const auto& p : d.providers)
            for (const auto& n : nodes_of(p)) nodes.push_back({p, n.index});
        const auto dist = entropy::plan_distribution(plan, nodes, rng);
        const auto chunks = plan.chunks();

        rec.k = d.k;
        rec.n = d.n;
        rec.parity = policy_.parity;
        rec.split_mode = plan.mode;
        rec.cut_points.assign(plan.cut_points.begin(), plan.cut_points.end());
        rec.chunk_count = static_cast<std::uint32_t>(plan.chunk_count);
        rec.objective = plan.objective;
        rec.granularity = plan.granularity;
        rec.length = payload.size();
        rec.payload_digest = sha256(payload);
        rec.integrity_ref = "tokens/" + obj.object_id;
        rec.key_ref = "key/" + obj.object_id;
        keystore_.put(rec.key_ref, persistence::SecretKind::MasterKey, key);

        const shamir::ShareScheme scheme{d.k, d.n, field::FieldSpec::binary8()};
        std::map<std::string, std::vector<std::pair<BlobLocation, Bytes>>> writes;  // per provider
        for (std::size_t slot = 0; slot < plan.chunk_count; ++slot) {
            const auto true_index = dist.sequence_permutation[slot];
            const auto& c = chunks[true_index];
            const auto chunk = payload.subspan(c.offset, c.length);
            rec.sequence_permutation.push_back(static_cast<std::uint32_t>(true_index));

            persistence::ChunkRecord cr;
            cr.length = c.length;
            cr.digest = sha256(chunk);
            cr.share_object_id = label_id(key, "chunk/" + std::to_string(slot), 16);

            const auto& primary = dist.assignment[slot];
            const auto base = static_cast<std::size_t>(
                std::find(d.providers.begin(), d.providers.end(), primary.provider) - d.providers.begin());
            auto place = [&](std::size_t offset, bool first) -> std::pair<std::string, std::uint32_t> {
                const auto& pid = d.providers[(base + offset) % d.n];
                if (first) return {pid, primary.node};
                const auto count = nodes_of(pid).size();
                return {pid, static_cast<std::uint32_t>(rng.uniform(count))};
            };

            const auto shares = shamir::split(cr.share_object_id, chunk, scheme, rng);
            std::vector<integrity::Column> columns;
            for (const auto& s : shares) {
                const auto [pid, node] = place(s.x - 1, s.x == 1);
                const auto blob = shamir::serialize(s);
                const auto id = label_id(key, "blob/" + std::to_string(slot) + "/" + std::to_string(s.x), 32);
                BlobLocation loc{pid, node, id, s.x, sha256(blob)};
                cr.shares.push_back(loc);
                writes[pid].emplace_back(loc, blob);
                columns.push_back(s.payload);
            }
            const auto enc = integrity::encode_columns(std::move(columns), policy_.parity, scheme.field, key);
            for (std::size_t j = 0; j < enc.parity_columns.size(); ++j) {
                const auto [pid, node] = place(d.n + j, false);
                const auto blob = integrity::column_blob(enc.parity_columns[j], scheme.field);
                const auto id = label_id(key, "parity/" + std::to_string(slot) + "/" + std::to_string(j), 32);
                BlobLocation loc{pid, node, id, 0, sha256(blob)};
                cr.parity.push_back(loc);
                writes[pid].emplace_back(loc, blob);
            }
            const std::size_t r = policy_.audit_blocks == 0 ? enc.rows : std::min(policy_.audit_blocks, enc.rows);
            const auto table = integrity::precompute_tokens(enc, policy_.audit_rounds, r, key);
            keystore_.put(rec.integrity_ref + "/" + std::to_string(slot), persistence::SecretKind::TokenTable,
                          integrity::serialize(table));
            rec.chunks.push_back(std::move(cr));
        }

        // one writer per provider, joined before the manifest is committed
        std::vector<std::future<void>> pending;
        for (auto& [pid, items] : writes)
            pending.push_back(std::async(std::launch::async, [this, &pid, &items] {
                for (const auto& [loc, blob] : items) provider(pid).store_blob(loc.node, loc.blob_id, blob);
            }));
        for (auto& f : pending) f.get();
    }

    Bytes get_dispersed(const ManifestRecord& rec) const {
        std::vector<Bytes> by_slot;
        for (const auto& chunk : rec.chunks) {
            std::vector<shamir::Share> valid;
            for (const auto& loc : chunk.shares) {
                if (valid.size() == rec.k) break;
                try {
                    valid.push_back(shamir::deserialize(fetch_verified(loc)));
                } catch (const Error& e) {
                    // unreachable, missing or tampered shares are skipped
                    if (e.code() != ErrorCode::Unavailable && e.code() != ErrorCode::UnknownBlob &&
                        e.code() != ErrorCode::IntegrityViolation && e.code() != ErrorCode::MalformedData)
                        throw;
                }
            }
            if (valid.size() < rec.k)
                fail(ErrorCode::ReconstructionFailed, "only " + std::to_string(valid.size()) + " of " +
                                                          std::to_string(rec.k) + " shares available for a chunk");
            auto data = shamir::reconstruct(valid);
            if (sha256(data) != chunk.digest) fail(ErrorCode::IntegrityViolation, "chunk digest mismatch");
            by_slot.push_back(std::move(data));
        }
        std::vector<std::size_t> perm(rec.sequence_permutation.begin(), rec.sequence_permutation.end());
        return entropy::reassemble(by_slot, perm);
    }

    void put_homomorphic(const DataObject& obj, const RoutingDecision& d, const Bytes& key, ManifestRecord& rec) {
        const auto& target = d.providers.front();
        authenticate(target);
        if (policy_.he_bits < 72) fail(ErrorCode::ConfigError, "he_bits must be at least 72 to hold 64-bit words");
        DeterministicRng rng(key, "cloudsplit.he");
        const auto kp = homomorphic::keygen(policy_.he_bits, rng);
        rec.key_ref = "hekey/" + obj.object_id;
        keystore_.put(rec.key_ref, persistence::SecretKind::HomomorphicKey, homomorphic::serialize(kp));

        // payload as little-endian signed 64-bit words, zero padded
        Bytes padded = obj.payload;
        rec.padding = (8 - padded.size() % 8) % 8;
        padded.resize(padded.size() + rec.padding, 0);
        ByteWriter blob;
        blob.magic("CHV1");
        blob.u32(static_cast<std::uint32_t>(padded.size() / 8));
        ByteReader words(padded);
        while (!words.done()) {
            const auto ct = homomorphic::encrypt(kp.pub, homomorphic::encode_signed(kp.pub, words.i64()), rng);
            blob.raw(homomorphic::serialize(ct));
        }
        rec.length = obj.payload.size();
        rec.payload_digest = sha256(obj.payload);
        rec.blobs.push_back(store(target, 0, label_id(key, "whole/0", 32), blob.bytes()));
    }

    static std::vector<homomorphic::Ciphertext> parse_ciphertexts(ByteView data) {
        ByteReader r(data);
        r.expect_magic("CHV1");
        const auto count = r.u32();
        std::vector<homomorphic::Ciphertext> out;
        for (std::uint32_t i = 0; i < count; ++i) out.push_back(homomorphic::deserialize(r));
        r.expect_done();
        return out;
    }

    Bytes get_homomorphic(const ManifestRecord& rec) const {
        const auto kp = homomorphic::deserialize_keypair(keystore_.get(rec.key_ref, persistence::SecretKind::HomomorphicKey));
        ByteWriter w;
        for (const auto& ct : parse_ciphertexts(fetch_verified(rec.blobs.at(0))))
            w.i64(homomorphic::decode_signed(kp.pub, homomorphic::decrypt(kp, ct)));
        Bytes out = std::move(w).take();
        if (out.size() < rec.padding) fail(ErrorCode::IntegrityViolation, "ciphertext count too small");
        out.resize(out.size() - rec.padding);
        return out;
    }

    void put_anonymized(const DataObject& obj, const RoutingDecision& d, const Bytes& key, ManifestRecord& rec) {
        for (const auto& p : d.providers) authenticate(p);
        auto groups = obj.groups;
        if (groups.empty())
            for (const auto& c : obj.table.columns)
                if (std::find(obj.id_columns.begin(), obj.id_columns.end(), c) == obj.id_columns.end())
                    groups.push_back({c});
        const Bytes salt = derive_key(key, "cloudsplit.salt");
        const auto anon = anonymize::anonymize_table(obj.table, obj.id_columns, groups, salt);
        rec.key_ref = "salt/" + obj.object_id;
        keystore_.put(rec.key_ref, persistence::SecretKind::Salt, salt);
        rec.mapping_ref = "mapping/" + obj.object_id;
        keystore_.put(rec.mapping_ref, persistence::SecretKind::AnonymizationMapping, anonymize::serialize_local(anon));

        DeterministicRng rng(key, "cloudsplit.anon");
        for (const auto& g : anon.groups) {
            const auto& pid = d.providers[g.slot % d.providers.size()];
            const auto node = static_cast<std::uint32_t>(rng.uniform(nodes_of(pid).size()));
            rec.blobs.push_back(
                store(pid, node, label_id(key, "group/" + std::to_string(g.slot), 32), anonymize::serialize_group(g)));
        }
        rec.length = anon.row_digests.size();
    }

    anonymize::Table get_anonymized(const ManifestRecord& rec) const {
        const auto local = anonymize::deserialize_local(
            keystore_.get(rec.mapping_ref, persistence::SecretKind::AnonymizationMapping));
        std::vector<anonymize::ColumnGroup> fetched;
        for (const auto& loc : rec.blobs) {
            try {
                fetched.push_back(anonymize::parse_group(fetch_verified(loc)));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::Unavailable && e.code() != ErrorCode::UnknownBlob) throw;
            }
        }
        return anonymize::rejoin(local, fetched);
    }

    Policy policy_;
    std::vector<std::shared_ptr<simcloud::CloudProvider>> providers_;
    std::vector<ranking::ProviderProfile> profiles_;
    persistence::ManifestStore& manifest_;
    persistence::KeyStore& keystore_;
    std::optional<std::uint64_t> seed_;
    std::string credential_;
    std::mutex mu_;
    std::set<std::string> in_flight_;
};

}  // namespace cloudsplit::router
