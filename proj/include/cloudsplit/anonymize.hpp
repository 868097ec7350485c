#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/entropy_split.hpp"
#include "cloudsplit/error.hpp"

namespace cloudsplit::anonymize {

using Cell = std::variant<std::int64_t, std::string>;
using Digest = Bytes;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    friend bool operator==(const Table&, const Table&) = default;
};

// One provider-bound slice of the table. Rows are keyed by digest only.
struct ColumnGroup {
    std::size_t slot = 0;
    std::vector<std::string> columns;
    std::vector<Digest> digests;
    std::vector<std::vector<Cell>> rows;

    friend bool operator==(const ColumnGroup&, const ColumnGroup&) = default;
};

struct AnonymizedTable {
    std::vector<std::string> columns;  // original order
    std::vector<std::string> id_columns;
    std::vector<Digest> row_digests;   // original row order
    std::vector<ColumnGroup> groups;
    std::map<Digest, std::vector<Cell>> local_mapping;
};

struct AnonymizeOptions {
    std::size_t digest_bytes = 32;  // truncation is a test hook for collisions
    bool shuffle_rows = false;      // per-group keyed row shuffle
};

inline void write_cell(ByteWriter& w, const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        w.u8(0);
        w.i64(*i);
    } else {
        w.u8(1);
        w.str(std::get<std::string>(c));
    }
}

inline Cell read_cell(ByteReader& r) {
    switch (r.u8()) {
        case 0: return r.i64();
        case 1: return r.str();
        default: fail(ErrorCode::MalformedData, "unknown cell tag");
    }
}

inline Digest row_digest(ByteView salt, const std::vector<Cell>& id_tuple, std::size_t digest_bytes) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(id_tuple.size()));
    for (const auto& c : id_tuple) write_cell(w, c);
    const auto mac = hmac_sha256(salt, w.bytes());
    return Digest(mac.begin(), mac.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(digest_bytes, 32)));
}

inline std::size_t column_index(const Table& t, const std::string& name) {
    auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) fail(ErrorCode::InvalidArgument, "unknown column '" + name + "'");
    return static_cast<std::size_t>(it - t.columns.begin());
}

inline AnonymizedTable anonymize_table(const Table& table, const std::vector<std::string>& id_columns,
                                       const std::vector<std::vector<std::string>>& groups, ByteView salt,
                                       AnonymizeOptions opts = {}) {
    if (id_columns.empty()) fail(ErrorCode::InvalidArgument, "at least one identifier column is required");
    if (opts.digest_bytes < 1) fail(ErrorCode::InvalidArgument, "digest must have at least one byte");
    std::set<std::string> names(table.columns.begin(), table.columns.end());
    if (names.size() != table.columns.size()) fail(ErrorCode::InvalidArgument, "duplicate column names");
    for (const auto& row : table.rows)
        if (row.size() != table.columns.size()) fail(ErrorCode::InvalidArgument, "row width differs from header");

    std::vector<std::size_t> id_idx;
    std::set<std::string> id_set;
    for (const auto& c : id_columns) {
        id_idx.push_back(column_index(table, c));
        if (!id_set.insert(c).second) fail(ErrorCode::InvalidArgument, "identifier column repeated: " + c);
    }
    // groups must partition the non-identifier columns exactly
    std::set<std::string> grouped;
    for (const auto& g : groups)
        for (const auto& c : g) {
            column_index(table, c);
            if (id_set.count(c)) fail(ErrorCode::InvalidArgument, "identifier column '" + c + "' placed in a group");
            if (!grouped.insert(c).second) fail(ErrorCode::InvalidArgument, "column '" + c + "' in two groups");
        }
    for (const auto& c : table.columns)
        if (!id_set.count(c) && !grouped.count(c))
            fail(ErrorCode::InvalidArgument, "column '" + c + "' not assigned to any group");

    AnonymizedTable out;
    out.columns = table.columns;
    out.id_columns = id_columns;
    std::map<std::vector<Cell>, std::size_t> seen_ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::vector<Cell> ids;
        for (auto i : id_idx) ids.push_back(table.rows[r][i]);
        if (auto [it, fresh] = seen_ids.emplace(ids, r); !fresh)
            fail(ErrorCode::DuplicateIdentifier,
                 "rows " + std::to_string(it->second) + " and " + std::to_string(r) + " share an identifier");
        auto digest = row_digest(salt, ids, opts.digest_bytes);
        if (!out.local_mapping.emplace(digest, ids).second)
            fail(ErrorCode::DigestCollision, "distinct identifiers hash to the same digest at row " + std::to_string(r));
        out.row_digests.push_back(std::move(digest));
    }

    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) continue;
        ColumnGroup group;
        group.slot = g;
        group.columns = groups[g];
        std::vector<std::size_t> idx;
        for (const auto& c : groups[g]) idx.push_back(column_index(table, c));
        std::vector<std::size_t> order(table.rows.size());
        for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
        if (opts.shuffle_rows) {
            DeterministicRng rng(salt, "cloudsplit.anon.shuffle/" + std::to_string(g));
            entropy::shuffle(order, rng);
        }
        for (auto r : order) {
            group.digests.push_back(out.row_digests[r]);
            std::vector<Cell> cells;
            for (auto i : idx) cells.push_back(table.rows[r][i]);
            group.rows.push_back(std::move(cells));
        }
        out.groups.push_back(std::move(group));
    }
    return out;
}

// Inverse of anonymize_table using the local mapping and the groups fetched
// back from providers.
inline Table rejoin(const AnonymizedTable& local, const std::vector<ColumnGroup>& fetched) {
    std::map<std::size_t, const ColumnGroup*> by_slot;
    for (const auto& g : fetched) by_slot[g.slot] = &g;
    std::map<std::string, std::pair<const ColumnGroup*, std::size_t>> source;  // column -> group, position
    for (const auto& expected : local.groups) {
        auto it = by_slot.find(expected.slot);
        if (it == by_slot.end()) fail(ErrorCode::MissingGroup, "group " + std::to_string(expected.slot) + " missing");
        const auto* g = it->second;
        if (g->columns != expected.columns)
            fail(ErrorCode::MissingGroup, "group " + std::to_string(expected.slot) + " has unexpected columns");
        for (std::size_t c = 0; c < g->columns.size(); ++c) source[g->columns[c]] = {g, c};
    }

    // digest -> row position, per group
    std::map<const ColumnGroup*, std::map<Digest, std::size_t>> row_of;
    for (const auto& [slot, g] : by_slot) {
        auto& index = row_of[g];
        for (std::size_t r = 0; r < g->digests.size(); ++r) {
            if (!local.local_mapping.count(g->digests[r]))
                fail(ErrorCode::UnknownDigest, "group " + std::to_string(slot) + " holds an unknown row digest");
            index[g->digests[r]] = r;
        }
    }

    Table out;
    out.columns = local.columns;
    for (const auto& digest : local.row_digests) {
        const auto& ids = local.local_mapping.at(digest);
        std::vector<Cell> row;
        for (const auto& name : local.columns) {
            auto id_it = std::find(local.id_columns.begin(), local.id_columns.end(), name);
            if (id_it != local.id_columns.end()) {
                row.push_back(ids[static_cast<std::size_t>(id_it - local.id_columns.begin())]);
                continue;
            }
            const auto& [g, pos] = source.at(name);
            const auto& index = row_of.at(g);
            auto r = index.find(digest);
            if (r == index.end())
                fail(ErrorCode::MissingGroup, "group " + std::to_string(g->slot) + " lacks a row");
            row.push_back(g->rows[r->second][pos]);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// Provider payload:
//   "CAN1" | slot u32 | column count u32 (digest column first, named "#digest")
//   | names | row count u32 | per row: digest blob, then tagged cells
inline Bytes serialize_group(const ColumnGroup& g) {
    ByteWriter w;
    w.magic("CAN1");
    w.u32(static_cast<std::uint32_t>(g.slot));
    w.u32(static_cast<std::uint32_t>(g.columns.size() + 1));
    w.str("#digest");
    for (const auto& c : g.columns) w.str(c);
    w.u32(static_cast<std::uint32_t>(g.rows.size()));
    for (std::size_t r = 0; r < g.rows.size(); ++r) {
        w.blob(g.digests[r]);
        for (const auto& cell : g.rows[r]) write_cell(w, cell);
    }
    return std::move(w).take();
}

inline ColumnGroup parse_group(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CAN1");
    ColumnGroup g;
    g.slot = r.u32();
    const auto ncols = r.u32();
    if (ncols < 1 || ncols > r.remaining()) fail(ErrorCode::MalformedData, "bad column count");
    if (r.str() != "#digest") fail(ErrorCode::MalformedData, "digest column must come first");
    for (std::uint32_t c = 1; c < ncols; ++c) g.columns.push_back(r.str());
    const auto nrows = r.u32();
    if (nrows > r.remaining()) fail(ErrorCode::MalformedData, "bad row count");
    for (std::uint32_t i = 0; i < nrows; ++i) {
        g.digests.push_back(r.blob());
        std::vector<Cell> row;
        for (std::uint32_t c = 1; c < ncols; ++c) row.push_back(read_cell(r));
        g.rows.push_back(std::move(row));
    }
    r.expect_done();
    return g;
}

// Whole table, used when a table is stored without anonymization:
//   "CTB1" | column count u32 | names | row count u32 | tagged cells row-major
inline Bytes serialize_table(const Table& t) {
    ByteWriter w;
    w.magic("CTB1");
    w.u32(static_cast<std::uint32_t>(t.columns.size()));
    for (const auto& c : t.columns) w.str(c);
    w.u32(static_cast<std::uint32_t>(t.rows.size()));
    for (const auto& row : t.rows)
        for (const auto& cell : row) write_cell(w, cell);
    return std::move(w).take();
}

inline Table parse_table(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CTB1");
    Table t;
    const auto ncols = r.u32();
    if (ncols > r.remaining()) fail(ErrorCode::MalformedData, "bad column count");
    for (std::uint32_t c = 0; c < ncols; ++c) t.columns.push_back(r.str());
    const auto nrows = r.u32();
    if (nrows > r.remaining()) fail(ErrorCode::MalformedData, "bad row count");
    for (std::uint32_t i = 0; i < nrows; ++i) {
        std::vector<Cell> row;
        for (std::uint32_t c = 0; c < ncols; ++c) row.push_back(read_cell(r));
        t.rows.push_back(std::move(row));
    }
    r.expect_done();
    return t;
}

// Everything needed locally to rejoin: structure plus mapping. Never sent out.
inline Bytes serialize_local(const AnonymizedTable& t) {
    ByteWriter w;
    w.magic("CAM1");
    w.u32(static_cast<std::uint32_t>(t.columns.size()));
    for (const auto& c : t.columns) w.str(c);
    w.u32(static_cast<std::uint32_t>(t.id_columns.size()));
    for (const auto& c : t.id_columns) w.str(c);
    w.u32(static_cast<std::uint32_t>(t.row_digests.size()));
    for (const auto& d : t.row_digests) {
        w.blob(d);
        for (const auto& cell : t.local_mapping.at(d)) write_cell(w, cell);
    }
    w.u32(static_cast<std::uint32_t>(t.groups.size()));
    for (const auto& g : t.groups) {
        w.u32(static_cast<std::uint32_t>(g.slot));
        w.u32(static_cast<std::uint32_t>(g.columns.size()));
        for (const auto& c : g.columns) w.str(c);
    }
    return std::move(w).take();
}

inline AnonymizedTable deserialize_local(ByteView data) {
    ByteReader r(data);
    r.expect_magic("CAM1");
    AnonymizedTable t;
    auto count = [&r] {
        auto n = r.u32();
        if (n > r.remaining()) fail(ErrorCode::MalformedData, "count exceeds input");
        return n;
    };
    for (auto n = count(); n > 0; --n) t.columns.push_back(r.str());
    for (auto n = count(); n > 0; --n) t.id_columns.push_back(r.str());
    for (auto n = count(); n > 0; --n) {
        auto d = r.blob();
        std::vector<Cell> ids;
        for (std::size_t i = 0; i < t.id_columns.size(); ++i) ids.push_back(read_cell(r));
        t.local_mapping[d] = std::move(ids);
        t.row_digests.push_back(std::move(d));
    }
    for (auto n = count(); n > 0; --n) {
        ColumnGroup g;
        g.slot = r.u32();
        for (auto c = count(); c > 0; --c) g.columns.push_back(r.str());
        t.groups.push_back(std::move(g));
    }
    r.expect_done();
    return t;
}

}  // namespace cloudsplit::anonymize
