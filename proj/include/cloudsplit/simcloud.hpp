#pragma once

#include <algorithm>
#include <compare>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/integrity.hpp"

namespace cloudsplit::simcloud {

struct NodeInfo {
    std::uint32_t index = 0;
    std::uint32_t depth = 1;  // hierarchy level, 1 = top
};

// What the router sees of a provider, remote or simulated.
class CloudProvider {
public:
    virtual ~CloudProvider() = default;

    virtual const std::string& id() const = 0;
    virtual std::vector<NodeInfo> nodes() const = 0;
    virtual bool authenticate(std::string_view credential) const = 0;
    virtual void store_blob(std::uint32_t node, const std::string& blob_id, ByteView data) = 0;
    virtual Bytes fetch_blob(std::uint32_t node, const std::string& blob_id) const = 0;
    // Computes a CIT1 response over the stored blob; the blob never leaves.
    virtual Bytes answer_challenge(std::uint32_t node, const std::string& blob_id, ByteView challenge) const = 0;
};

enum class FaultKind : std::uint8_t { NodeUnavailable, CorruptBlob, InsiderDump };

struct Fault {
    FaultKind kind = FaultKind::NodeUnavailable;
    std::string provider;
    std::uint32_t node = 0;
    std::string blob_id;
    std::size_t offset = 0;
    std::uint8_t mask = 0;

    static Fault node_unavailable(std::string provider, std::uint32_t node) {
        return {FaultKind::NodeUnavailable, std::move(provider), node, {}, 0, 0};
    }
    static Fault corrupt_blob(std::string provider, std::uint32_t node, std::string blob_id, std::size_t offset,
                              std::uint8_t mask) {
        return {FaultKind::CorruptBlob, std::move(provider), node, std::move(blob_id), offset, mask};
    }
    static Fault insider_dump(std::string provider) { return {FaultKind::InsiderDump, std::move(provider), 0, {}, 0, 0}; }

    friend auto operator<=>(const Fault&, const Fault&) = default;
};

struct DumpedBlob {
    std::uint32_t node = 0;
    std::uint32_t depth = 1;
    std::string blob_id;
    Bytes data;
};

// In-process provider. Blobs are kept pristine; corruption faults are
// applied on the way out so clearing a fault restores the original bytes.
// With a root directory the blobs are also mirrored to disk
// (<root>/node<i>/<blob_id>) so a store survives across processes.
class SimProvider final : public CloudProvider {
public:
    SimProvider(std::string id, std::vector<std::uint32_t> node_depths,
                std::optional<std::filesystem::path> root = std::nullopt, std::string credential = "sim")
        : id_(std::move(id)), root_(std::move(root)), credential_(std::move(credential)) {
        if (node_depths.empty()) fail(ErrorCode::InvalidArgument, "provider " + id_ + " needs at least one node");
        for (std::uint32_t i = 0; i < node_depths.size(); ++i) {
            if (node_depths[i] < 1) fail(ErrorCode::InvalidArgument, "node depth must be >= 1");
            nodes_.push_back({i, node_depths[i]});
        }
        blobs_.resize(nodes_.size());
        if (root_) load();
    }

    const std::string& id() const override { return id_; }
    std::vector<NodeInfo> nodes() const override { return nodes_; }
    bool authenticate(std::string_view credential) const override { return credential == credential_; }

    void store_blob(std::uint32_t node, const std::string& blob_id, ByteView data) override {
        std::lock_guard lock(mu_);
        check_available(node);
        if (root_) {
            const auto dir = *root_ / ("node" + std::to_string(node));
            std::filesystem::create_directories(dir);
            std::ofstream out(dir / blob_id, std::ios::binary | std::ios::trunc);
            out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
            if (!out) fail(ErrorCode::IoError, "cannot write blob " + blob_id);
        }
        blobs_[node][blob_id] = Bytes(data.begin(), data.end());
    }

    Bytes fetch_blob(std::uint32_t node, const std::string& blob_id) const override {
        std::lock_guard lock(mu_);
        check_available(node);
        return visible(node, blob_id);
    }

    Bytes answer_challenge(std::uint32_t node, const std::string& blob_id, ByteView challenge) const override {
        return integrity::answer_challenge(challenge, fetch_blob(node, blob_id));
    }

    void inject(const Fault& fault) {
        std::lock_guard lock(mu_);
        check_target(fault);
        faults_.insert(fault);
    }

    void clear(const Fault& fault) {
        std::lock_guard lock(mu_);
        check_target(fault);
        faults_.erase(fault);
    }

    void clear_all() {
        std::lock_guard lock(mu_);
        faults_.clear();
    }

    // Takes every node of this provider offline.
    void set_unavailable(bool down) {
        for (const auto& n : nodes_) {
            auto f = Fault::node_unavailable(id_, n.index);
            down ? inject(f) : clear(f);
        }
    }

    std::set<Fault> faults() const {
        std::lock_guard lock(mu_);
        return faults_;
    }

    bool compromised() const {
        std::lock_guard lock(mu_);
        return faults_.count(Fault::insider_dump(id_)) > 0;
    }

    // The provider's complete view, ordered by (node, blob id). Needs no fault.
    std::vector<DumpedBlob> insider_dump() const {
        std::lock_guard lock(mu_);
        std::vector<DumpedBlob> out;
        for (const auto& n : nodes_)
            for (const auto& [blob_id, data] : blobs_[n.index]) out.push_back({n.index, n.depth, blob_id, visible(n.index, blob_id)});
        return out;
    }

    std::size_t blob_count() const {
        std::lock_guard lock(mu_);
        std::size_t total = 0;
        for (const auto& m : blobs_) total += m.size();
        return total;
    }

private:
    void check_node(std::uint32_t node) const {
        if (node >= nodes_.size())
            fail(ErrorCode::UnknownTarget, "provider " + id_ + " has no node " + std::to_string(node));
    }

    void check_available(std::uint32_t node) const {
        check_node(node);
        if (faults_.count(Fault::node_unavailable(id_, node)))
            fail(ErrorCode::Unavailable, "provider " + id_ + " node " + std::to_string(node) + " is unavailable");
    }

    void check_target(const Fault& fault) const {
        if (fault.provider != id_) fail(ErrorCode::UnknownTarget, "fault targets " + fault.provider + ", not " + id_);
        if (fault.kind == FaultKind::InsiderDump) return;
        check_node(fault.node);
        if (fault.kind == FaultKind::CorruptBlob) {
            auto it = blobs_[fault.node].find(fault.blob_id);
            if (it == blobs_[fault.node].end()) fail(ErrorCode::UnknownTarget, "no blob " + fault.blob_id);
            if (fault.offset >= it->second.size()) fail(ErrorCode::UnknownTarget, "corruption offset beyond blob");
        }
    }

    Bytes visible(std::uint32_t node, const std::string& blob_id) const {
        auto it = blobs_[node].find(blob_id);
        if (it == blobs_[node].end()) fail(ErrorCode::UnknownBlob, "provider " + id_ + " has no blob " + blob_id);
        Bytes data = it->second;
        for (const auto& f : faults_)
            if (f.kind == FaultKind::CorruptBlob && f.node == node && f.blob_id == blob_id) data[f.offset] ^= f.mask;
        return data;
    }

    void load() {
        for (const auto& n : nodes_) {
            const auto dir = *root_ / ("node" + std::to_string(n.index));
            if (!std::filesystem::is_directory(dir)) continue;
            for (const auto& entry : std::filesystem::directory_iterator(dir)) {
                if (!entry.is_regular_file()) continue;
                std::ifstream in(entry.path(), std::ios::binary);
                Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                blobs_[n.index][entry.path().filename().string()] = std::move(data);
            }
        }
    }

    std::string id_;
    std::vector<NodeInfo> nodes_;
    std::optional<std::filesystem::path> root_;
    std::string credential_;
    mutable std::mutex mu_;
    std::vector<std::map<std::string, Bytes>> blobs_;
    std::set<Fault> faults_;
};

// A set of simulated providers addressed by id.
class SimCloud {
public:
    std::shared_ptr<SimProvider> add(std::shared_ptr<SimProvider> p) {
        for (const auto& q : providers_)
            if (q->id() == p->id()) fail(ErrorCode::InvalidArgument, "duplicate provider id " + p->id());
        providers_.push_back(p);
        return p;
    }

    const std::vector<std::shared_ptr<SimProvider>>& providers() const { return providers_; }

    std::vector<std::shared_ptr<CloudProvider>> endpoints() const {
        return {providers_.begin(), providers_.end()};
    }

    SimProvider& provider(const std::string& id) const {
        for (const auto& p : providers_)
            if (p->id() == id) return *p;
        fail(ErrorCode::UnknownTarget, "no provider " + id);
    }

    void inject(const Fault& f) { provider(f.provider).inject(f); }
    void clear(const Fault& f) { provider(f.provider).clear(f); }
    void clear_all() {
        for (const auto& p : providers_) p->clear_all();
    }

private:
    std::vector<std::shared_ptr<SimProvider>> providers_;
};

}  // namespace cloudsplit::simcloud
