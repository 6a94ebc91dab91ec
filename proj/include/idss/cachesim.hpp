#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "idss/trace.hpp"

namespace idss::sim {

/* Declaration order doubles as the best_policy tie-break order. */
enum class PolicyKind { LRU, LFU, FIFO, ARC, LeCaR, Cacheus };

inline constexpr std::array<PolicyKind, 6> kAllPolicies = {
    PolicyKind::LRU,  PolicyKind::LFU,   PolicyKind::FIFO,
    PolicyKind::ARC,  PolicyKind::LeCaR, PolicyKind::Cacheus};

std::string to_string(PolicyKind k);
PolicyKind parse_policy(std::string_view s);  // case-insensitive

/* Per-policy tuning knobs; unknown keys for a given policy are rejected.
 *   LeCaR:   learning_rate (0.45), discount_base (0.005), seed (0)
 *   Cacheus: seed (0)
 * LRU/LFU/FIFO/ARC accept none. */
using Hyperparams = std::map<std::string, double>;

/* Demand cache: access() admits on miss and never prefetches.  Writes
 * allocate exactly like reads. */
class PolicyEngine {
public:
    virtual ~PolicyEngine() = default;
    virtual bool access(std::uint64_t block) = 0;  // true on hit
    virtual std::size_t resident() const = 0;
    virtual bool contains(std::uint64_t block) const = 0;
};

std::unique_ptr<PolicyEngine> make_policy(PolicyKind kind, std::size_t capacity,
                                          const Hyperparams& hp = {});

struct SimResult {
    PolicyKind policy = PolicyKind::LRU;
    std::size_t capacity = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    double hit_rate = 0.0;
};

SimResult simulate(const trace::AccessTrace& t, PolicyKind kind, std::size_t capacity,
                   const Hyperparams& hp = {});

struct SweepReport {
    std::string trace_label;
    std::size_t capacity = 0;
    std::map<PolicyKind, SimResult> results;
    PolicyKind best = PolicyKind::LRU;
};

/* Runs all six policies at the same capacity.  parallel > 1 distributes
 * policies across threads; the trace is shared read-only and results are
 * identical to the serial run. */
SweepReport sweep(const trace::AccessTrace& t, std::size_t capacity, const Hyperparams& hp = {},
                  unsigned parallel = 1);

/* Highest hit rate; ties broken by kAllPolicies order. */
std::pair<PolicyKind, double> best_policy(const SweepReport& report);

/* max(1, floor(fraction * unique_blocks)) */
std::size_t capacity_for(const trace::TraceStats& stats, double fraction);

/* CSV: trace,policy,capacity,hits,misses,hit_rate */
std::string sweep_to_csv(const SweepReport& report);

}  // namespace idss::sim
