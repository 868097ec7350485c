#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/entropy_split.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/types.hpp"

namespace cloudsplit::persistence {

inline std::uint32_t crc32_of(ByteView data) {
    return static_cast<std::uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

// Append-only log of checksummed records:
//   magic (4 bytes) | { length u32 | crc32 u32 | payload } ...
// A record counts only if it is complete and its checksum matches; reading
// stops at the first one that is not, and the store is flagged corrupt.
class RecordLog {
public:
    RecordLog(std::filesystem::path path, std::string magic) : path_(std::move(path)), magic_(std::move(magic)) {
        if (magic_.size() != 4) fail(ErrorCode::InvalidArgument, "record log magic must be 4 bytes");
        load();
    }

    const std::filesystem::path& path() const { return path_; }
    const std::vector<Bytes>& records() const { return records_; }
    bool corrupt_tail() const { return corrupt_; }
    const std::string& corruption() const { return corruption_; }

    void require_clean() const {
        if (corrupt_) fail(ErrorCode::CorruptStore, path_.string() + ": " + corruption_);
    }

    // Durable once this returns: written and fsync'ed under an exclusive
    // advisory lock.
    void append(ByteView payload) {
        std::lock_guard lock(mu_);
        require_clean();
        const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
        if (fd < 0) fail(ErrorCode::IoError, "open " + path_.string() + ": " + std::strerror(errno));
        struct Closer {
            int fd;
            ~Closer() {
                ::flock(fd, LOCK_UN);
                ::close(fd);
            }
        } closer{fd};
        if (::flock(fd, LOCK_EX) != 0) fail(ErrorCode::IoError, "lock " + path_.string());

        ByteWriter w;
        if (::lseek(fd, 0, SEEK_END) == 0) w.magic(magic_);
        w.u32(static_cast<std::uint32_t>(payload.size()));
        w.u32(crc32_of(payload));
        w.raw(payload);
        write_all(fd, w.bytes());
        if (::fsync(fd) != 0) fail(ErrorCode::IoError, "fsync " + path_.string());
        records_.emplace_back(payload.begin(), payload.end());
    }

    // Drops an incomplete tail so the log can be appended to again.
    void truncate_corrupt_tail() {
        std::lock_guard lock(mu_);
        if (!corrupt_) return;
        std::filesystem::resize_file(path_, valid_bytes_);
        corrupt_ = false;
        corruption_.clear();
    }

private:
    static void write_all(int fd, const Bytes& data) {
        std::size_t done = 0;
        while (done < data.size()) {
            const auto n = ::write(fd, data.data() + done, data.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail(ErrorCode::IoError, std::string("write: ") + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
    }

    void mark_corrupt(std::string why) {
        corrupt_ = true;
        corruption_ = std::move(why);
    }

    void load() {
        if (!std::filesystem::exists(path_)) return;
        std::ifstream in(path_, std::ios::binary);
        if (!in) fail(ErrorCode::IoError, "cannot read " + path_.string());
        const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (data.empty()) return;
        if (data.size() < 4) {
            mark_corrupt("truncated header");
            return;
        }
        if (!std::equal(magic_.begin(), magic_.end(), data.begin()))
            fail(ErrorCode::CorruptStore, path_.string() + ": not a " + magic_ + " store");
        std::size_t pos = 4;
        valid_bytes_ = pos;
        while (pos < data.size()) {
            if (data.size() - pos < 8) {
                mark_corrupt("truncated record header at offset " + std::to_string(pos));
                return;
            }
            ByteReader r(ByteView(data).subspan(pos, 8));
            const auto len = r.u32();
            const auto crc = r.u32();
            if (data.size() - pos - 8 < len) {
                mark_corrupt("truncated record at offset " + std::to_string(pos));
                return;
            }
            const ByteView payload = ByteView(data).subspan(pos + 8, len);
            if (crc32_of(payload) != crc) {
                mark_corrupt("checksum mismatch at offset " + std::to_string(pos));
                return;
            }
            records_.emplace_back(payload.begin(), payload.end());
            pos += 8 + len;
            valid_bytes_ = pos;
        }
    }

    std::filesystem::path path_;
    std::string magic_;
    std::vector<Bytes> records_;
    bool corrupt_ = false;
    std::string corruption_;
    std::size_t valid_bytes_ = 0;
    std::mutex mu_;
};

struct BlobLocation {
    std::string provider;
    std::uint32_t node = 0;
    std::string blob_id;
    std::uint32_t x = 0;  // share evaluation point; 0 for whole blobs
    Digest32 digest{};    // of the stored bytes

    friend bool operator==(const BlobLocation&, const BlobLocation&) = default;
};

struct ChunkRecord {
    std::uint64_t length = 0;
    std::string share_object_id;
    Digest32 digest{};  // of the plaintext chunk
    std::vector<BlobLocation> shares;
    std::vector<BlobLocation> parity;

    friend bool operator==(const ChunkRecord&, const ChunkRecord&) = default;
};

struct ManifestRecord {
    std::string object_id;
    Pipeline pipeline = Pipeline::LocalOnly;
    ObjectKind kind = ObjectKind::Binary;
    SecretLevel level = SecretLevel::Unclassified;
    OperationClass ops = OperationClass::NoOperations;
    std::uint32_t k = 0;
    std::uint32_t n = 0;
    std::uint32_t parity = 0;
    entropy::SplitMode split_mode = entropy::SplitMode::EntropyDP;
    std::vector<std::uint64_t> cut_points;
    std::uint32_t chunk_count = 0;
    double objective = 0.0;
    std::uint64_t granularity = 0;
    std::vector<std::uint32_t> sequence_permutation;
    std::vector<ChunkRecord> chunks;  // indexed by storage slot
    std::vector<BlobLocation> blobs;  // whole-object blobs (plain, ciphertexts, column groups)
    std::string integrity_ref;
    std::string key_ref;
    std::string mapping_ref;
    std::uint64_t length = 0;
    std::uint64_t padding = 0;
    Digest32 payload_digest{};
    std::uint64_t version = 0;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline void write_location(ByteWriter& w, const BlobLocation& l) {
    w.str(l.provider);
    w.u32(l.node);
    w.str(l.blob_id);
    w.u32(l.x);
    w.raw(l.digest);
}

inline BlobLocation read_location(ByteReader& r) {
    BlobLocation l;
    l.provider = r.str();
    l.node = r.u32();
    l.blob_id = r.str();
    l.x = r.u32();
    auto d = r.raw(32);
    std::copy(d.begin(), d.end(), l.digest.begin());
    return l;
}

inline Bytes serialize(const ManifestRecord& m) {
    ByteWriter w;
    w.str(m.object_id);
    w.u8(static_cast<std::uint8_t>(m.pipeline));
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u8(static_cast<std::uint8_t>(m.level));
    w.u8(static_cast<std::uint8_t>(m.ops));
    w.u32(m.k);
    w.u32(m.n);
    w.u32(m.parity);
    w.u8(static_cast<std::uint8_t>(m.split_mode));
    w.u32(static_cast<std::uint32_t>(m.cut_points.size()));
    for (auto c : m.cut_points) w.u64(c);
    w.u32(m.chunk_count);
    w.f64(m.objective);
    w.u64(m.granularity);
    w.u32(static_cast<std::uint32_t>(m.sequence_permutation.size()));
    for (auto p : m.sequence_permutation) w.u32(p);
    w.u32(static_cast<std::uint32_t>(m.chunks.size()));
    for (const auto& c : m.chunks) {
        w.u64(c.length);
        w.str(c.share_object_id);
        w.raw(c.digest);
        w.u32(static_cast<std::uint32_t>(c.shares.size()));
        for (const auto& l : c.shares) write_location(w, l);
        w.u32(static_cast<std::uint32_t>(c.parity.size()));
        for (const auto& l : c.parity) write_location(w, l);
    }
    w.u32(static_cast<std::uint32_t>(m.blobs.size()));
    for (const auto& l : m.blobs) write_location(w, l);
    w.str(m.integrity_ref);
    w.str(m.key_ref);
    w.str(m.mapping_ref);
    w.u64(m.length);
    w.u64(m.padding);
    w.raw(m.payload_digest);
    w.u64(m.version);
    return std::move(w).take();
}

inline ManifestRecord deserialize_record(ByteView data) {
    ByteReader r(data);
    auto count = [&r](std::size_t min_item) {
        const auto n = r.u32();
        if (static_cast<std::size_t>(n) * min_item > r.remaining()) fail(ErrorCode::MalformedData, "count exceeds record");
        return n;
    };
    auto enum_u8 = [&r](std::uint8_t max) {
        const auto v = r.u8();
        if (v > max) fail(ErrorCode::MalformedData, "enum value out of range");
        return v;
    };
    ManifestRecord m;
    m.object_id = r.str();
    m.pipeline = static_cast<Pipeline>(enum_u8(5));
    m.kind = static_cast<ObjectKind>(enum_u8(1));
    m.level = static_cast<SecretLevel>(enum_u8(2));
    m.ops = static_cast<OperationClass>(enum_u8(2));
    m.k = r.u32();
    m.n = r.u32();
    m.parity = r.u32();
    m.split_mode = static_cast<entropy::SplitMode>(enum_u8(1));
    for (auto n = count(8); n > 0; --n) m.cut_points.push_back(r.u64());
    m.chunk_count = r.u32();
    m.objective = r.f64();
    m.granularity = r.u64();
    for (auto n = count(4); n > 0; --n) m.sequence_permutation.push_back(r.u32());
    for (auto n = count(8); n > 0; --n) {
        ChunkRecord c;
        c.length = r.u64();
        c.share_object_id = r.str();
        auto d = r.raw(32);
        std::copy(d.begin(), d.end(), c.digest.begin());
        for (auto s = count(44); s > 0; --s) c.shares.push_back(read_location(r));
        for (auto s = count(44); s > 0; --s) c.parity.push_back(read_location(r));
        m.chunks.push_back(std::move(c));
    }
    for (auto n = count(44); n > 0; --n) m.blobs.push_back(read_location(r));
    m.integrity_ref = r.str();
    m.key_ref = r.str();
    m.mapping_ref = r.str();
    m.length = r.u64();
    m.padding = r.u64();
    auto d = r.raw(32);
    std::copy(d.begin(), d.end(), m.payload_digest.begin());
    m.version = r.u64();
    r.expect_done();
    return m;
}

// Local manifest database ("CMF1"). Records are never rewritten; each
// commit for an object appends the next version.
class ManifestStore {
public:
    explicit ManifestStore(std::filesystem::path path) : log_(std::move(path), "CMF1") {
        for (const auto& raw : log_.records()) index(deserialize_record(raw));
    }

    bool corrupt_tail() const { return log_.corrupt_tail(); }
    void require_clean() const { log_.require_clean(); }
    void truncate_corrupt_tail() { log_.truncate_corrupt_tail(); }

    std::uint64_t commit(ManifestRecord record) {
        std::lock_guard lock(mu_);
        if (record.object_id.empty()) fail(ErrorCode::InvalidArgument, "manifest record without object id");
        std::set<std::uint32_t> perm(record.sequence_permutation.begin(), record.sequence_permutation.end());
        if (perm.size() != record.sequence_permutation.size() ||
            (!perm.empty() && *perm.rbegin() >= perm.size()))
            fail(ErrorCode::InvalidArgument, "sequence permutation is not a bijection");
        if (record.chunks.size() != record.sequence_permutation.size())
            fail(ErrorCode::InvalidArgument, "chunk count does not match permutation");
        auto& versions = by_id_[record.object_id];
        record.version = versions.size() + 1;
        log_.append(serialize(record));
        versions.push_back(std::move(record));
        return versions.back().version;
    }

    bool contains(const std::string& object_id) const {
        std::lock_guard lock(mu_);
        return by_id_.count(object_id) > 0;
    }

    ManifestRecord lookup(const std::string& object_id) const {
        std::lock_guard lock(mu_);
        auto it = by_id_.find(object_id);
        if (it == by_id_.end()) fail(ErrorCode::NotFound, "no manifest record for '" + object_id + "'");
        return it->second.back();
    }

    std::vector<ManifestRecord> history(const std::string& object_id) const {
        std::lock_guard lock(mu_);
        auto it = by_id_.find(object_id);
        if (it == by_id_.end()) fail(ErrorCode::NotFound, "no manifest record for '" + object_id + "'");
        return it->second;
    }

    std::vector<std::string> object_ids() const {
        std::lock_guard lock(mu_);
        std::vector<std::string> out;
        for (const auto& [id, v] : by_id_) out.push_back(id);
        return out;
    }

private:
    void index(ManifestRecord r) {
        auto& versions = by_id_[r.object_id];
        if (r.version != versions.size() + 1)
            fail(ErrorCode::CorruptStore, "version gap for '" + r.object_id + "'");
        versions.push_back(std::move(r));
    }

    RecordLog log_;
    std::map<std::string, std::vector<ManifestRecord>> by_id_;
    mutable std::mutex mu_;
};

enum class SecretKind : std::uint8_t {
    MasterKey = 0,
    Salt = 1,
    HomomorphicKey = 2,
    TokenTable = 3,
    AnonymizationMapping = 4,
    LocalObject = 5,
};

// Secrets and other local-only state ("CKS1"), same record framing as the
// manifest so a manifest can be shared without keys. Latest entry per id wins.
class KeyStore {
public:
    explicit KeyStore(std::filesystem::path path) : log_(std::move(path), "CKS1") {
        for (const auto& raw : log_.records()) {
            ByteReader r(raw);
            auto id = r.str();
            auto kind = r.u8();
            if (kind > static_cast<std::uint8_t>(SecretKind::LocalObject))
                fail(ErrorCode::CorruptStore, "unknown keystore entry kind");
            auto data = r.blob();
            r.expect_done();
            entries_[id] = {static_cast<SecretKind>(kind), std::move(data)};
        }
    }

    bool corrupt_tail() const { return log_.corrupt_tail(); }
    void require_clean() const { log_.require_clean(); }
    void truncate_corrupt_tail() { log_.truncate_corrupt_tail(); }

    void put(const std::string& id, SecretKind kind, ByteView data) {
        std::lock_guard lock(mu_);
        ByteWriter w;
        w.str(id);
        w.u8(static_cast<std::uint8_t>(kind));
        w.blob(data);
        log_.append(w.bytes());
        entries_[id] = {kind, Bytes(data.begin(), data.end())};
    }

    Bytes get(const std::string& id, SecretKind kind) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find(id);
        if (it == entries_.end() || it->second.first != kind) fail(ErrorCode::NotFound, "no keystore entry '" + id + "'");
        return it->second.second;
    }

    bool contains(const std::string& id) const {
        std::lock_guard lock(mu_);
        return entries_.count(id) > 0;
    }

    // Raw bytes of every entry; used by leak scans.
    std::vector<Bytes> all_values() const {
        std::lock_guard lock(mu_);
        std::vector<Bytes> out;
        for (const auto& [id, e] : entries_) out.push_back(e.second);
        return out;
    }

private:
    RecordLog log_;
    std::map<std::string, std::pair<SecretKind, Bytes>> entries_;
    mutable std::mutex mu_;
};

}  // namespace cloudsplit::persistence
