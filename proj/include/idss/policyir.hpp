#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "idss/cachesim.hpp"

namespace idss::ir {

/* Closed action vocabulary.  Quantities are bytes or bytes/s. */

struct SetCachePolicy {
    std::string target;
    sim::PolicyKind policy;
    bool operator==(const SetCachePolicy&) const = default;
};
struct SetCacheSize {
    std::string target;
    std::uint64_t bytes;
    bool operator==(const SetCacheSize&) const = default;
};
struct SetReadAhead {
    std::string target;
    std::uint64_t bytes;
    bool operator==(const SetReadAhead&) const = default;
};
struct ReserveBandwidth {
    std::string client;
    std::uint64_t bps;
    std::string link;
    bool operator==(const ReserveBandwidth&) const = default;
};
struct CapBandwidth {
    std::string client;
    std::uint64_t bps;
    std::string link;
    bool operator==(const CapBandwidth&) const = default;
};
struct SetIOScheduler {
    std::string target;
    std::string scheduler;
    bool operator==(const SetIOScheduler&) const = default;
};
struct SetQoSClass {
    std::string name;
    std::uint64_t max_bw_bps;
    std::optional<std::uint64_t> max_iops;
    bool operator==(const SetQoSClass&) const = default;
};
struct DisableServerCache {
    std::string segment;
    bool operator==(const DisableServerCache&) const = default;
};
struct SetFsParam {
    std::string key;
    std::string value;
    bool operator==(const SetFsParam&) const = default;
};

using PolicyAction =
    std::variant<SetCachePolicy, SetCacheSize, SetReadAhead, ReserveBandwidth, CapBandwidth,
                 SetIOScheduler, SetQoSClass, DisableServerCache, SetFsParam>;

std::string action_kind(const PolicyAction& a);
/* Primary target/client/name/segment/key of the action. */
std::string action_target(const PolicyAction& a);
std::optional<std::string> action_link(const PolicyAction& a);
/* String-valued setting, if any (policy name, scheduler, fs value). */
std::optional<std::string> action_value(const PolicyAction& a);

struct Quantity {
    std::string unit;  // "bytes" | "bytes_per_sec" | "iops"
    std::uint64_t value;
};
std::vector<Quantity> action_quantities(const PolicyAction& a);

struct Provenance {
    std::string advisor;
    std::string doc_hash;
    bool operator==(const Provenance&) const = default;
};

struct PolicyPlan {
    std::string plan_id;
    Provenance provenance;
    std::vector<PolicyAction> actions;
    bool operator==(const PolicyPlan&) const = default;
};

/* Throws if two actions share (kind, target) or identifiers are empty. */
void check_well_formed(const PolicyPlan& plan);

nlohmann::json action_to_json(const PolicyAction& a);
PolicyAction action_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const PolicyPlan& p);
PolicyPlan plan_from_json(const nlohmann::json& j);
std::string plan_canonical_json(const PolicyPlan& p);
PolicyPlan load_plan(const std::string& path);

/* ---- guardrails ---- */

enum class GuardrailKind { Cap, Floor, AllowedSet, Immutable, AggregateCap };
std::string to_string(GuardrailKind k);
GuardrailKind parse_guardrail_kind(std::string_view s);

/* Patterns are exact strings, "*" (any), or a trailing-'*' prefix glob. */
struct Selector {
    std::string action = "*";
    std::string target = "*";
    std::string link = "*";  // non-"*" only matches actions that carry a link
    bool operator==(const Selector&) const = default;
};

struct Limit {
    std::uint64_t value = 0;
    std::string unit;                 // cap/floor/aggregate_cap
    std::vector<std::string> values;  // allowed_set
    bool operator==(const Limit&) const = default;
};

struct Guardrail {
    std::string id;
    GuardrailKind kind = GuardrailKind::Cap;
    Selector selector;
    Limit limit;
    bool operator==(const Guardrail&) const = default;
};

std::vector<Guardrail> guardrails_from_json(const nlohmann::json& j);
std::vector<Guardrail> load_guardrails(const std::string& path);
nlohmann::json guardrails_to_json(const std::vector<Guardrail>& g);

struct Violation {
    std::string guardrail_id;
    std::size_t action_index = 0;
    std::string message;  // names exactly one guardrail and one action
};

struct ValidationResult {
    bool accepted = true;
    std::vector<Violation> violations;
};

/* Checks every guardrail independently; removing one can only remove
 * violations, adding one can only add them. */
ValidationResult validate(const PolicyPlan& plan, const std::vector<Guardrail>& rails);

/* ---- translation ---- */

enum class Backend { LinuxDryRun, MockVendor };
Backend parse_backend(std::string_view s);
std::string to_string(Backend b);

struct CommandScript {
    Backend backend = Backend::MockVendor;
    std::string text;  // linux-dryrun: shell lines; mockvendor: JSON array
    std::size_t command_count = 0;
};

/* Deterministic, order-preserving.  linux-dryrun output is flagged
 * DRY-RUN and never executed; unsupported actions raise errors naming
 * the action and backend. */
CommandScript translate(const PolicyPlan& plan, Backend backend);

/* Inverse of translate for the mockvendor backend. */
PolicyPlan parse_commands(const std::string& script_text, Backend backend);

}  // namespace idss::ir
