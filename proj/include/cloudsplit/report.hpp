#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/persistence.hpp"
#include "cloudsplit/ranking.hpp"
#include "cloudsplit/router.hpp"
#include "cloudsplit/types.hpp"

namespace cloudsplit::report {

// Ordered key=value lines. Keys and values never contain newlines.
class Report {
public:
    Report& add(std::string key, std::string value) {
        for (auto& c : value)
            if (c == '\n' || c == '\r') c = ' ';
        lines_.emplace_back(std::move(key), std::move(value));
        return *this;
    }
    Report& add(std::string key, std::string_view value) { return add(std::move(key), std::string(value)); }
    Report& add(std::string key, const char* value) { return add(std::move(key), std::string(value)); }
    template <class T>
        requires std::is_arithmetic_v<T>
    Report& add(std::string key, T value) {
        if constexpr (std::is_floating_point_v<T>) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(value));
            return add(std::move(key), std::string(buf));
        } else {
            return add(std::move(key), std::to_string(value));
        }
    }

    void append(const Report& other) { lines_.insert(lines_.end(), other.lines_.begin(), other.lines_.end()); }

    const std::vector<std::pair<std::string, std::string>>& lines() const { return lines_; }

    std::string value(const std::string& key) const {
        for (const auto& [k, v] : lines_)
            if (k == key) return v;
        return {};
    }

    std::string render(bool human = false) const {
        std::string out;
        std::size_t width = 0;
        for (const auto& [k, v] : lines_) width = std::max(width, k.size());
        for (const auto& [k, v] : lines_) {
            if (human) out += k + std::string(width - k.size() + 2, ' ') + v + "\n";
            else out += k + "=" + v + "\n";
        }
        return out;
    }

private:
    std::vector<std::pair<std::string, std::string>> lines_;
};

inline Report put_report(const persistence::ManifestRecord& rec) {
    Report r;
    r.add("object_id", rec.object_id)
        .add("pipeline", to_string(rec.pipeline))
        .add("level", to_string(rec.level))
        .add("ops", to_string(rec.ops))
        .add("kind", to_string(rec.kind));
    if (rec.pipeline == Pipeline::SplitShareDisperse) {
        r.add("k", rec.k).add("n", rec.n).add("C", rec.chunk_count).add("B", rec.granularity);
        r.add("split", rec.split_mode == entropy::SplitMode::EntropyDP ? "entropy" : "fixed");
        r.add("objective", rec.objective).add("parity", rec.parity);
    }
    r.add("length", rec.length).add("blobs", [&] {
        std::size_t count = rec.blobs.size();
        for (const auto& c : rec.chunks) count += c.shares.size() + c.parity.size();
        return count;
    }());
    if (rec.kind == ObjectKind::Binary) r.add("sha256", to_hex(rec.payload_digest));
    r.add("version", rec.version);
    return r;
}

inline Report decision_report(const router::RoutingDecision& d) {
    Report r;
    r.add("pipeline", to_string(d.pipeline)).add("reason", d.reason);
    if (d.pipeline == Pipeline::SplitShareDisperse) r.add("k", d.k).add("n", d.n).add("C", d.chunks);
    std::string providers;
    for (const auto& p : d.providers) providers += (providers.empty() ? "" : ",") + p;
    if (!providers.empty()) r.add("providers", providers);
    return r;
}

inline Report get_report(const router::DataObject& obj, const persistence::ManifestRecord& rec) {
    Report r;
    r.add("object_id", obj.object_id).add("pipeline", to_string(rec.pipeline)).add("kind", to_string(obj.kind));
    if (obj.kind == ObjectKind::Binary) r.add("length", obj.payload.size()).add("sha256", to_hex(sha256(obj.payload)));
    else r.add("rows", obj.table.rows.size()).add("columns", obj.table.columns.size());
    return r;
}

inline Report audit_report(const router::AuditReport& a) {
    Report r;
    r.add("object_id", a.object_id).add("rounds", a.rounds).add("checks", a.entries.size());
    std::size_t unreachable = 0;
    for (const auto& e : a.entries) {
        if (e.verdict == router::AuditVerdict::Unreachable) ++unreachable;
        if (e.verdict != router::AuditVerdict::Corrupted) continue;
        r.add("corrupted", "slot=" + std::to_string(e.slot) + ",column=" + std::to_string(e.column) +
                               ",round=" + std::to_string(e.round) + ",provider=" + e.provider +
                               ",node=" + std::to_string(e.node) + ",blob=" + e.blob_id);
    }
    r.add("unreachable", unreachable);
    r.add("verdict", a.intact() ? "Intact" : (a.corrupted().empty() ? "Unreachable" : "Corrupted"));
    return r;
}

inline Report rank_report(const std::vector<ranking::ProviderProfile>& ranked, const ranking::Weights& w) {
    Report r;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f", w.time(), w.cost(), w.security(), w.privacy());
    r.add("weights", std::string(buf));
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& p = ranked[i];
        r.add("rank." + std::to_string(i + 1), p.id);
        r.add("score." + p.id, ranking::rank_score(p, w));
        if (!p.p_hier_access.empty()) r.add("breach." + p.id, ranking::breach_probability(p, 1));
    }
    return r;
}

inline Report error_report(const Error& e) {
    Report r;
    r.add("error", to_string(e.code()));
    return r;
}

}  // namespace cloudsplit::report
