#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cloudsplit/bytes.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/error.hpp"

namespace cloudsplit::entropy {

inline constexpr std::size_t kDefaultGranularity = 4096;

struct ByteDistribution {
    std::array<std::uint64_t, 256> counts{};
    std::uint64_t total = 0;

    static ByteDistribution of(ByteView data) {
        ByteDistribution d;
        for (auto b : data) ++d.counts[b];
        d.total = data.size();
        return d;
    }

    // Add-one smoothed probability of symbol s.
    double smoothed(std::size_t s) const {
        return (static_cast<double>(counts[s]) + 1.0) / (static_cast<double>(total) + 256.0);
    }
};

// KL(P_file || P_chunk) in nats, both sides add-one smoothed. Measures what
// is lost when the chunk's histogram stands in for the whole file.
inline double relative_entropy(const ByteDistribution& file, const ByteDistribution& chunk) {
    if (file.total == 0 || chunk.total == 0) fail(ErrorCode::EmptyInput, "distribution has no samples");
    double sum = 0.0;
    for (std::size_t s = 0; s < 256; ++s) {
        const double p = file.smoothed(s);
        sum += p * std::log(p / chunk.smoothed(s));
    }
    // Rounding can leave a tiny negative residue for identical histograms.
    return sum < 0.0 ? 0.0 : sum;
}

enum class SplitMode : std::uint8_t { EntropyDP = 0, FixedSize = 1 };

struct Chunk {
    std::size_t offset;
    std::size_t length;
};

struct SplitPlan {
    std::vector<std::size_t> cut_points;
    std::size_t chunk_count = 1;
    double objective = 0.0;  // min over chunks of relative_entropy(file, chunk)
    SplitMode mode = SplitMode::EntropyDP;
    std::size_t file_length = 0;
    std::size_t granularity = kDefaultGranularity;

    std::vector<Chunk> chunks() const {
        std::vector<Chunk> out;
        std::size_t start = 0;
        for (auto cut : cut_points) {
            out.push_back({start, cut - start});
            start = cut;
        }
        out.push_back({start, file_length - start});
        return out;
    }
};

namespace detail {

// Per-block prefix histograms: prefix[i][s] counts symbol s in blocks [0, i).
class BlockHistograms {
public:
    BlockHistograms(ByteView file, std::size_t granularity)
        : file_len_(file.size()), granularity_(granularity) {
        blocks_ = (file.size() + granularity - 1) / granularity;
        prefix_.assign((blocks_ + 1) * 256, 0);
        for (std::size_t b = 0; b < blocks_; ++b) {
            std::copy_n(&prefix_[b * 256], 256, &prefix_[(b + 1) * 256]);
            const std::size_t end = std::min(file.size(), (b + 1) * granularity);
            for (std::size_t i = b * granularity; i < end; ++i) ++prefix_[(b + 1) * 256 + file[i]];
        }
    }

    std::size_t blocks() const { return blocks_; }
    std::size_t offset(std::size_t block) const { return std::min(file_len_, block * granularity_); }

    ByteDistribution range(std::size_t first_block, std::size_t end_block) const {
        ByteDistribution d;
        for (std::size_t s = 0; s < 256; ++s) {
            d.counts[s] = prefix_[end_block * 256 + s] - prefix_[first_block * 256 + s];
            d.total += d.counts[s];
        }
        return d;
    }

private:
    std::size_t file_len_;
    std::size_t granularity_;
    std::size_t blocks_ = 0;
    std::vector<std::uint64_t> prefix_;
};

}  // namespace detail

// Max-min split: over all C-way splits whose cuts are multiples of the
// granularity, pick one maximizing the smallest per-chunk divergence from
// the file. best[c][i] is the best objective covering blocks [0, i) with c
// chunks; best[c][i] = max_j min(best[c-1][j], D(j, i)).
inline SplitPlan plan_split(ByteView file, std::size_t chunk_count,
                            std::size_t granularity = kDefaultGranularity) {
    if (chunk_count < 1) fail(ErrorCode::InfeasibleSplit, "chunk count must be at least 1");
    if (granularity < 1) fail(ErrorCode::InfeasibleSplit, "granularity must be at least 1");
    if (file.empty()) fail(ErrorCode::InfeasibleSplit, "cannot split an empty file");
    if (chunk_count > file.size() / granularity)
        fail(ErrorCode::InfeasibleSplit, std::to_string(chunk_count) + " chunks of " + std::to_string(granularity) +
                                             " bytes exceed file length " + std::to_string(file.size()));

    detail::BlockHistograms hist(file, granularity);
    const std::size_t nb = hist.blocks();
    const auto whole = hist.range(0, nb);

    // divergence[j * (nb + 1) + i] for 0 <= j < i <= nb
    std::vector<double> divergence((nb + 1) * (nb + 1), 0.0);
    for (std::size_t j = 0; j < nb; ++j)
        for (std::size_t i = j + 1; i <= nb; ++i)
            divergence[j * (nb + 1) + i] = relative_entropy(whole, hist.range(j, i));

    constexpr double kUnreachable = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best(chunk_count + 1, std::vector<double>(nb + 1, kUnreachable));
    std::vector<std::vector<std::size_t>> choice(chunk_count + 1, std::vector<std::size_t>(nb + 1, 0));
    for (std::size_t i = 1; i <= nb; ++i) best[1][i] = divergence[i];
    for (std::size_t c = 2; c <= chunk_count; ++c) {
        for (std::size_t i = c; i <= nb; ++i) {
            for (std::size_t j = c - 1; j < i; ++j) {
                const double candidate = std::min(best[c - 1][j], divergence[j * (nb + 1) + i]);
                if (candidate > best[c][i]) {
                    best[c][i] = candidate;
                    choice[c][i] = j;
                }
            }
        }
    }

    SplitPlan plan;
    plan.chunk_count = chunk_count;
    plan.objective = best[chunk_count][nb];
    plan.mode = SplitMode::EntropyDP;
    plan.file_length = file.size();
    plan.granularity = granularity;
    std::size_t end = nb;
    for (std::size_t c = chunk_count; c >= 2; --c) {
        end = choice[c][end];
        plan.cut_points.push_back(hist.offset(end));
    }
    std::reverse(plan.cut_points.begin(), plan.cut_points.end());
    return plan;
}

// Equal small pieces, no optimisation; the last piece takes the remainder.
inline SplitPlan plan_fixed_size(ByteView file, std::size_t chunk_size) {
    if (file.empty()) fail(ErrorCode::InfeasibleSplit, "cannot split an empty file");
    if (chunk_size < 1) fail(ErrorCode::InfeasibleSplit, "chunk size must be at least 1");
    SplitPlan plan;
    plan.mode = SplitMode::FixedSize;
    plan.file_length = file.size();
    plan.granularity = chunk_size;
    for (std::size_t cut = chunk_size; cut < file.size(); cut += chunk_size) plan.cut_points.push_back(cut);
    plan.chunk_count = plan.cut_points.size() + 1;

    const auto whole = ByteDistribution::of(file);
    plan.objective = std::numeric_limits<double>::infinity();
    for (const auto& c : plan.chunks())
        plan.objective =
            std::min(plan.objective, relative_entropy(whole, ByteDistribution::of(file.subspan(c.offset, c.length))));
    return plan;
}

struct NodeRef {
    std::string provider;
    std::uint32_t node = 0;

    friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

// Chunks are stored in "slot" order. Slot s holds true chunk
// sequence_permutation[s] and lives on assignment[s]. Only the local
// manifest knows the permutation.
struct DistributionPlan {
    std::vector<NodeRef> assignment;
    std::vector<std::size_t> sequence_permutation;
};

// Fisher-Yates from the top; one uniform draw per position.
template <class T, UniformSource Rng>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform(i));
        std::swap(items[i - 1], items[j]);
    }
}

template <UniformSource Rng>
DistributionPlan plan_distribution(const SplitPlan& plan, std::span<const NodeRef> nodes, Rng& rng) {
    if (nodes.empty()) fail(ErrorCode::NoNodes, "no storage nodes to distribute onto");
    std::vector<NodeRef> order(nodes.begin(), nodes.end());
    shuffle(order, rng);

    DistributionPlan out;
    out.sequence_permutation.resize(plan.chunk_count);
    std::iota(out.sequence_permutation.begin(), out.sequence_permutation.end(), std::size_t{0});
    shuffle(out.sequence_permutation, rng);
    for (std::size_t s = 0; s < plan.chunk_count; ++s) out.assignment.push_back(order[s % order.size()]);
    return out;
}

// Rebuild the file from chunks indexed by storage slot.
inline Bytes reassemble(const std::vector<Bytes>& chunks_by_slot, std::span<const std::size_t> permutation) {
    if (chunks_by_slot.size() != permutation.size())
        fail(ErrorCode::InvalidArgument, "chunk count does not match permutation");
    std::vector<const Bytes*> ordered(permutation.size(), nullptr);
    for (std::size_t s = 0; s < permutation.size(); ++s) {
        if (permutation[s] >= ordered.size() || ordered[permutation[s]] != nullptr)
            fail(ErrorCode::InvalidArgument, "sequence permutation is not a bijection");
        ordered[permutation[s]] = &chunks_by_slot[s];
    }
    Bytes out;
    for (auto* c : ordered) out.insert(out.end(), c->begin(), c->end());
    return out;
}

struct RecoveryProbability {
    std::optional<std::uint64_t> denominator;  // exact 1/denominator when C! fits in 64 bits
    double value = 1.0;
    bool upper_bound = false;                   // true when the storage set must also be guessed
};

// Chance that an attacker who holds every chunk orders them correctly by
// guessing: 1/C!. Without knowledge of the storage set the attacker must
// also find the set, so 1/C! is only an upper bound.
inline RecoveryProbability recovery_probability(std::size_t chunk_count, bool known_storage_set) {
    if (chunk_count < 1) fail(ErrorCode::InvalidArgument, "chunk count must be at least 1");
    RecoveryProbability out;
    out.upper_bound = !known_storage_set;
    if (chunk_count <= 20) {
        std::uint64_t fact = 1;
        for (std::uint64_t i = 2; i <= chunk_count; ++i) fact *= i;
        out.denominator = fact;
        out.value = 1.0 / static_cast<double>(fact);
    } else {
        out.value = std::exp(-std::lgamma(static_cast<double>(chunk_count) + 1.0));
    }
    return out;
}

}  // namespace cloudsplit::entropy
