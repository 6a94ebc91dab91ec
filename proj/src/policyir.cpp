#include "idss/policyir.hpp"

#include <fstream>
#include <map>
#include <set>

namespace idss::ir {

using nlohmann::json;

std::string action_kind(const PolicyAction& a) {
    struct V {
        std::string operator()(const SetCachePolicy&) const { return "SetCachePolicy"; }
        std::string operator()(const SetCacheSize&) const { return "SetCacheSize"; }
        std::string operator()(const SetReadAhead&) const { return "SetReadAhead"; }
        std::string operator()(const ReserveBandwidth&) const { return "ReserveBandwidth"; }
        std::string operator()(const CapBandwidth&) const { return "CapBandwidth"; }
        std::string operator()(const SetIOScheduler&) const { return "SetIOScheduler"; }
        std::string operator()(const SetQoSClass&) const { return "SetQoSClass"; }
        std::string operator()(const DisableServerCache&) const { return "DisableServerCache"; }
        std::string operator()(const SetFsParam&) const { return "SetFsParam"; }
    };
    return std::visit(V{}, a);
}

std::string action_target(const PolicyAction& a) {
    struct V {
        std::string operator()(const SetCachePolicy& x) const { return x.target; }
        std::string operator()(const SetCacheSize& x) const { return x.target; }
        std::string operator()(const SetReadAhead& x) const { return x.target; }
        std::string operator()(const ReserveBandwidth& x) const { return x.client; }
        std::string operator()(const CapBandwidth& x) const { return x.client; }
        std::string operator()(const SetIOScheduler& x) const { return x.target; }
        std::string operator()(const SetQoSClass& x) const { return x.name; }
        std::string operator()(const DisableServerCache& x) const { return x.segment; }
        std::string operator()(const SetFsParam& x) const { return x.key; }
    };
    return std::visit(V{}, a);
}

std::optional<std::string> action_link(const PolicyAction& a) {
    if (const auto* r = std::get_if<ReserveBandwidth>(&a)) return r->link;
    if (const auto* c = std::get_if<CapBandwidth>(&a)) return c->link;
    return std::nullopt;
}

std::optional<std::string> action_value(const PolicyAction& a) {
    if (const auto* p = std::get_if<SetCachePolicy>(&a)) return sim::to_string(p->policy);
    if (const auto* s = std::get_if<SetIOScheduler>(&a)) return s->scheduler;
    if (const auto* f = std::get_if<SetFsParam>(&a)) return f->value;
    return std::nullopt;
}

std::vector<Quantity> action_quantities(const PolicyAction& a) {
    struct V {
        std::vector<Quantity> operator()(const SetCachePolicy&) const { return {}; }
        std::vector<Quantity> operator()(const SetCacheSize& x) const {
            return {{"bytes", x.bytes}};
        }
        std::vector<Quantity> operator()(const SetReadAhead& x) const {
            return {{"bytes", x.bytes}};
        }
        std::vector<Quantity> operator()(const ReserveBandwidth& x) const {
            return {{"bytes_per_sec", x.bps}};
        }
        std::vector<Quantity> operator()(const CapBandwidth& x) const {
            return {{"bytes_per_sec", x.bps}};
        }
        std::vector<Quantity> operator()(const SetIOScheduler&) const { return {}; }
        std::vector<Quantity> operator()(const SetQoSClass& x) const {
            std::vector<Quantity> q{{"bytes_per_sec", x.max_bw_bps}};
            if (x.max_iops) q.push_back({"iops", *x.max_iops});
            return q;
        }
        std::vector<Quantity> operator()(const DisableServerCache&) const { return {}; }
        std::vector<Quantity> operator()(const SetFsParam&) const { return {}; }
    };
    return std::visit(V{}, a);
}

namespace {

/* Key used for the one-setting-per-target rule; bandwidth actions are
 * scoped per link. */
std::string dedup_key(const PolicyAction& a) {
    std::string key = action_kind(a) + ":" + action_target(a);
    if (auto link = action_link(a)) key += "@" + *link;
    return key;
}

}  // namespace

void check_well_formed(const PolicyPlan& plan) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
        const PolicyAction& a = plan.actions[i];
        if (action_target(a).empty())
            throw Error("malformed plan: action " + std::to_string(i) + " (" + action_kind(a) +
                        ") has an empty target");
        if (auto link = action_link(a); link && link->empty())
            throw Error("malformed plan: action " + std::to_string(i) + " has an empty link");
        if (const auto* s = std::get_if<SetIOScheduler>(&a); s && s->scheduler.empty())
            throw Error("malformed plan: empty scheduler name");
        if (const auto* f = std::get_if<SetFsParam>(&a); f && f->value.empty())
            throw Error("malformed plan: empty fs param value");
        if (!seen.insert(dedup_key(a)).second)
            throw Error("malformed plan: duplicate action for (" + action_kind(a) + ", " +
                        action_target(a) + ")");
    }
}

json action_to_json(const PolicyAction& a) {
    json j{{"action", action_kind(a)}};
    struct V {
        json& j;
        void operator()(const SetCachePolicy& x) const {
            j["target"] = x.target;
            j["policy"] = sim::to_string(x.policy);
        }
        void operator()(const SetCacheSize& x) const {
            j["target"] = x.target;
            j["bytes"] = x.bytes;
        }
        void operator()(const SetReadAhead& x) const {
            j["target"] = x.target;
            j["bytes"] = x.bytes;
        }
        void operator()(const ReserveBandwidth& x) const {
            j["client"] = x.client;
            j["bps"] = x.bps;
            j["link"] = x.link;
        }
        void operator()(const CapBandwidth& x) const {
            j["client"] = x.client;
            j["bps"] = x.bps;
            j["link"] = x.link;
        }
        void operator()(const SetIOScheduler& x) const {
            j["target"] = x.target;
            j["scheduler"] = x.scheduler;
        }
        void operator()(const SetQoSClass& x) const {
            j["name"] = x.name;
            j["max_bw"] = x.max_bw_bps;
            if (x.max_iops) j["max_iops"] = *x.max_iops;
        }
        void operator()(const DisableServerCache& x) const { j["segment"] = x.segment; }
        void operator()(const SetFsParam& x) const {
            j["key"] = x.key;
            j["value"] = x.value;
        }
    };
    std::visit(V{j}, a);
    return j;
}

PolicyAction action_from_json(const json& j) {
    try {
        const std::string kind = j.at("action").get<std::string>();
        if (kind == "SetCachePolicy")
            return SetCachePolicy{j.at("target").get<std::string>(),
                                  sim::parse_policy(j.at("policy").get<std::string>())};
        if (kind == "SetCacheSize")
            return SetCacheSize{j.at("target").get<std::string>(),
                                j.at("bytes").get<std::uint64_t>()};
        if (kind == "SetReadAhead")
            return SetReadAhead{j.at("target").get<std::string>(),
                                j.at("bytes").get<std::uint64_t>()};
        if (kind == "ReserveBandwidth")
            return ReserveBandwidth{j.at("client").get<std::string>(),
                                    j.at("bps").get<std::uint64_t>(),
                                    j.at("link").get<std::string>()};
        if (kind == "CapBandwidth")
            return CapBandwidth{j.at("client").get<std::string>(),
                                j.at("bps").get<std::uint64_t>(),
                                j.at("link").get<std::string>()};
        if (kind == "SetIOScheduler")
            return SetIOScheduler{j.at("target").get<std::string>(),
                                  j.at("scheduler").get<std::string>()};
        if (kind == "SetQoSClass") {
            SetQoSClass q{j.at("name").get<std::string>(), j.at("max_bw").get<std::uint64_t>(),
                          std::nullopt};
            if (j.contains("max_iops")) q.max_iops = j.at("max_iops").get<std::uint64_t>();
            return q;
        }
        if (kind == "DisableServerCache")
            return DisableServerCache{j.at("segment").get<std::string>()};
        if (kind == "SetFsParam")
            return SetFsParam{j.at("key").get<std::string>(), j.at("value").get<std::string>()};
        throw Error("unknown action kind: " + kind);
    } catch (const json::exception& e) {
        throw Error("bad action JSON: " + std::string(e.what()));
    }
}

json plan_to_json(const PolicyPlan& p) {
    json actions = json::array();
    for (const PolicyAction& a : p.actions) actions.push_back(action_to_json(a));
    return json{{"actions", actions},
                {"plan_id", p.plan_id},
                {"provenance",
                 json{{"advisor", p.provenance.advisor}, {"doc_hash", p.provenance.doc_hash}}}};
}

PolicyPlan plan_from_json(const json& j) {
    PolicyPlan p;
    const json& actions = j.is_array() ? j : j.at("actions");
    for (const auto& a : actions) p.actions.push_back(action_from_json(a));
    if (j.is_object()) {
        p.plan_id = j.value("plan_id", "");
        if (j.contains("provenance")) {
            p.provenance.advisor = j.at("provenance").value("advisor", "");
            p.provenance.doc_hash = j.at("provenance").value("doc_hash", "");
        }
    }
    check_well_formed(p);
    return p;
}

std::string plan_canonical_json(const PolicyPlan& p) { return plan_to_json(p).dump(); }

PolicyPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open plan file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("bad plan file " + path + ": " + e.what());
    }
    return plan_from_json(j);
}

/* ---- guardrails ---- */

std::string to_string(GuardrailKind k) {
    switch (k) {
        case GuardrailKind::Cap: return "cap";
        case GuardrailKind::Floor: return "floor";
        case GuardrailKind::AllowedSet: return "allowed_set";
        case GuardrailKind::Immutable: return "immutable";
        case GuardrailKind::AggregateCap: return "aggregate_cap";
    }
    throw Error("bad guardrail kind");
}

GuardrailKind parse_guardrail_kind(std::string_view s) {
    std::string k = lower(s);
    if (k == "cap") return GuardrailKind::Cap;
    if (k == "floor") return GuardrailKind::Floor;
    if (k == "allowed_set") return GuardrailKind::AllowedSet;
    if (k == "immutable") return GuardrailKind::Immutable;
    if (k == "aggregate_cap") return GuardrailKind::AggregateCap;
    throw Error("unknown guardrail kind: " + std::string(s));
}

namespace {

const std::set<std::string> kActionKinds = {
    "SetCachePolicy", "SetCacheSize",  "SetReadAhead",       "ReserveBandwidth", "CapBandwidth",
    "SetIOScheduler", "SetQoSClass",   "DisableServerCache", "SetFsParam"};

const std::set<std::string> kUnits = {"bytes", "bytes_per_sec", "iops"};

Guardrail guardrail_from_json(const json& j) {
    Guardrail g;
    try {
        g.id = j.at("id").get<std::string>();
        g.kind = parse_guardrail_kind(j.at("kind").get<std::string>());
        if (j.contains("selector")) {
            const json& s = j.at("selector");
            g.selector.action = s.value("action", "*");
            g.selector.target = s.value("target", "*");
            g.selector.link = s.value("link", "*");
        }
        if (j.contains("limit")) {
            const json& l = j.at("limit");
            g.limit.value = l.value("value", std::uint64_t{0});
            g.limit.unit = l.value("unit", "");
            for (const auto& v : l.value("values", json::array()))
                g.limit.values.push_back(v.get<std::string>());
        }
    } catch (const json::exception& e) {
        throw Error("bad guardrail: " + std::string(e.what()));
    }
    if (g.id.empty()) throw Error("bad guardrail: empty id");
    if (g.selector.action != "*" && !kActionKinds.count(g.selector.action))
        throw Error("bad guardrail " + g.id + ": unknown action kind '" + g.selector.action + "'");
    switch (g.kind) {
        case GuardrailKind::Cap:
        case GuardrailKind::Floor:
        case GuardrailKind::AggregateCap:
            if (!kUnits.count(g.limit.unit))
                throw Error("bad guardrail " + g.id + ": limit.unit must be one of bytes, " +
                            "bytes_per_sec, iops");
            break;
        case GuardrailKind::AllowedSet:
            if (g.limit.values.empty())
                throw Error("bad guardrail " + g.id + ": allowed_set needs limit.values");
            break;
        case GuardrailKind::Immutable: break;
    }
    return g;
}

bool match_pattern(const std::string& pattern, const std::string& value) {
    if (pattern == "*") return true;
    if (!pattern.empty() && pattern.back() == '*')
        return value.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0;
    return pattern == value;
}

bool selector_matches(const Selector& s, const PolicyAction& a) {
    if (s.action != "*" && s.action != action_kind(a)) return false;
    if (!match_pattern(s.target, action_target(a))) return false;
    if (s.link != "*") {
        auto link = action_link(a);
        if (!link || !match_pattern(s.link, *link)) return false;
    }
    return true;
}

std::string describe(const PolicyAction& a, std::size_t index) {
    return action_kind(a) + "(" + action_target(a) + ") at index " + std::to_string(index);
}

}  // namespace

std::vector<Guardrail> guardrails_from_json(const json& j) {
    if (!j.is_array()) throw Error("guardrail file must be a JSON array");
    std::vector<Guardrail> out;
    std::set<std::string> ids;
    for (const auto& e : j) {
        Guardrail g = guardrail_from_json(e);
        if (!ids.insert(g.id).second) throw Error("duplicate guardrail id: " + g.id);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<Guardrail> load_guardrails(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open guardrail file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("bad guardrail file " + path + ": " + e.what());
    }
    return guardrails_from_json(j);
}

json guardrails_to_json(const std::vector<Guardrail>& rails) {
    json out = json::array();
    for (const Guardrail& g : rails) {
        json j{{"id", g.id},
               {"kind", to_string(g.kind)},
               {"selector", json{{"action", g.selector.action},
                                 {"target", g.selector.target},
                                 {"link", g.selector.link}}}};
        switch (g.kind) {
            case GuardrailKind::Cap:
            case GuardrailKind::Floor:
            case GuardrailKind::AggregateCap:
                j["limit"] = json{{"value", g.limit.value}, {"unit", g.limit.unit}};
                break;
            case GuardrailKind::AllowedSet:
                j["limit"] = json{{"values", g.limit.values}};
                break;
            case GuardrailKind::Immutable: break;
        }
        out.push_back(std::move(j));
    }
    return out;
}

ValidationResult validate(const PolicyPlan& plan, const std::vector<Guardrail>& rails) {
    check_well_formed(plan);
    ValidationResult res;
    for (const Guardrail& g : rails) {
        // aggregate_cap sums per link; others act per action
        std::map<std::string, std::uint64_t> agg;
        std::set<std::string> agg_reported;
        for (std::size_t i = 0; i < plan.actions.size(); ++i) {
            const PolicyAction& a = plan.actions[i];
            if (!selector_matches(g.selector, a)) continue;
            switch (g.kind) {
                case GuardrailKind::Cap:
                    for (const Quantity& q : action_quantities(a)) {
                        if (q.unit != g.limit.unit) continue;
                        if (q.value > g.limit.value)
                            res.violations.push_back(
                                {g.id, i,
                                 "guardrail " + g.id + ": " + describe(a, i) + " sets " +
                                     std::to_string(q.value) + " " + q.unit + " above cap " +
                                     std::to_string(g.limit.value)});
                    }
                    break;
                case GuardrailKind::Floor:
                    for (const Quantity& q : action_quantities(a)) {
                        if (q.unit != g.limit.unit) continue;
                        if (q.value < g.limit.value)
                            res.violations.push_back(
                                {g.id, i,
                                 "guardrail " + g.id + ": " + describe(a, i) + " sets " +
                                     std::to_string(q.value) + " " + q.unit + " below floor " +
                                     std::to_string(g.limit.value)});
                    }
                    break;
                case GuardrailKind::AllowedSet: {
                    auto v = action_value(a);
                    if (!v) break;
                    bool ok = false;
                    for (const std::string& allowed : g.limit.values)
                        if (*v == allowed) ok = true;
                    if (!ok)
                        res.violations.push_back(
                            {g.id, i,
                             "guardrail " + g.id + ": " + describe(a, i) + " value '" + *v +
                                 "' not in allowed set"});
                    break;
                }
                case GuardrailKind::Immutable:
                    res.violations.push_back(
                        {g.id, i,
                         "guardrail " + g.id + ": " + describe(a, i) +
                             " touches an immutable parameter"});
                    break;
                case GuardrailKind::AggregateCap: {
                    const std::string group = action_link(a).value_or("");
                    for (const Quantity& q : action_quantities(a)) {
                        if (q.unit != g.limit.unit) continue;
                        agg[group] += q.value;
                        if (agg[group] > g.limit.value && !agg_reported.count(group)) {
                            agg_reported.insert(group);
                            res.violations.push_back(
                                {g.id, i,
                                 "guardrail " + g.id + ": " + describe(a, i) +
                                     " pushes aggregate on link '" + group + "' to " +
                                     std::to_string(agg[group]) + " " + q.unit +
                                     ", above cap " + std::to_string(g.limit.value)});
                        }
                    }
                    break;
                }
            }
        }
    }
    res.accepted = res.violations.empty();
    return res;
}

/* ---- translation ---- */

Backend parse_backend(std::string_view s) {
    std::string b = lower(s);
    if (b == "linux-dryrun") return Backend::LinuxDryRun;
    if (b == "mockvendor") return Backend::MockVendor;
    throw Error("unknown backend: " + std::string(s));
}

std::string to_string(Backend b) {
    return b == Backend::LinuxDryRun ? "linux-dryrun" : "mockvendor";
}

namespace {

std::string linux_line(const PolicyAction& a, std::size_t index) {
    struct V {
        std::size_t index;
        std::string operator()(const SetCachePolicy& x) const {
            return "echo " + lower(sim::to_string(x.policy)) + " > /sys/block/" + x.target +
                   "/bcache/cache_replacement_policy";
        }
        std::string operator()(const SetCacheSize&) const { return ""; }
        std::string operator()(const SetReadAhead& x) const {
            // blockdev counts 512-byte sectors
            return "blockdev --setra " + std::to_string(x.bytes / 512) + " " + x.target;
        }
        std::string operator()(const ReserveBandwidth& x) const {
            return "tc class add dev " + x.link + " parent 1: classid 1:" +
                   std::to_string(10 + index) + " htb rate " + std::to_string(x.bps * 8) +
                   "bit  # reserve for " + x.client;
        }
        std::string operator()(const CapBandwidth& x) const {
            return "tc filter add dev " + x.link + " parent 1: u32 match u32 0 0 police rate " +
                   std::to_string(x.bps * 8) + "bit burst 32k drop  # cap " + x.client;
        }
        std::string operator()(const SetIOScheduler& x) const {
            return "echo " + x.scheduler + " > /sys/block/" + x.target + "/queue/scheduler";
        }
        std::string operator()(const SetQoSClass&) const { return ""; }
        std::string operator()(const DisableServerCache&) const { return ""; }
        std::string operator()(const SetFsParam& x) const {
            return "sysctl -w " + x.key + "=" + x.value;
        }
    };
    std::string line = std::visit(V{index}, a);
    if (line.empty())
        throw Error("action " + action_kind(a) + " unsupported by backend linux-dryrun");
    return line;
}

json vendor_record(const PolicyAction& a) {
    struct V {
        json operator()(const SetCachePolicy& x) const {
            return json{{"op", "cache.set_policy"},
                        {"target", x.target},
                        {"policy", sim::to_string(x.policy)}};
        }
        json operator()(const SetCacheSize& x) const {
            return json{{"op", "cache.set_size"}, {"target", x.target}, {"bytes", x.bytes}};
        }
        json operator()(const SetReadAhead& x) const {
            return json{{"op", "readahead.set"}, {"target", x.target}, {"bytes", x.bytes}};
        }
        json operator()(const ReserveBandwidth& x) const {
            return json{
                {"op", "bw.reserve"}, {"client", x.client}, {"bps", x.bps}, {"link", x.link}};
        }
        json operator()(const CapBandwidth& x) const {
            return json{{"op", "bw.cap"}, {"client", x.client}, {"bps", x.bps}, {"link", x.link}};
        }
        json operator()(const SetIOScheduler& x) const {
            return json{{"op", "sched.set"}, {"target", x.target}, {"scheduler", x.scheduler}};
        }
        json operator()(const SetQoSClass& x) const {
            json j{{"op", "qos.create"}, {"name", x.name}, {"max_bw", x.max_bw_bps}};
            if (x.max_iops) j["max_iops"] = *x.max_iops;
            return j;
        }
        json operator()(const DisableServerCache& x) const {
            return json{{"op", "server_cache.disable"}, {"segment", x.segment}};
        }
        json operator()(const SetFsParam& x) const {
            return json{{"op", "fs.set_param"}, {"key", x.key}, {"value", x.value}};
        }
    };
    return std::visit(V{}, a);
}

PolicyAction action_from_vendor(const json& r) {
    try {
        const std::string op = r.at("op").get<std::string>();
        if (op == "cache.set_policy")
            return SetCachePolicy{r.at("target").get<std::string>(),
                                  sim::parse_policy(r.at("policy").get<std::string>())};
        if (op == "cache.set_size")
            return SetCacheSize{r.at("target").get<std::string>(),
                                r.at("bytes").get<std::uint64_t>()};
        if (op == "readahead.set")
            return SetReadAhead{r.at("target").get<std::string>(),
                                r.at("bytes").get<std::uint64_t>()};
        if (op == "bw.reserve")
            return ReserveBandwidth{r.at("client").get<std::string>(),
                                    r.at("bps").get<std::uint64_t>(),
                                    r.at("link").get<std::string>()};
        if (op == "bw.cap")
            return CapBandwidth{r.at("client").get<std::string>(),
                                r.at("bps").get<std::uint64_t>(),
                                r.at("link").get<std::string>()};
        if (op == "sched.set")
            return SetIOScheduler{r.at("target").get<std::string>(),
                                  r.at("scheduler").get<std::string>()};
        if (op == "qos.create") {
            SetQoSClass q{r.at("name").get<std::string>(), r.at("max_bw").get<std::uint64_t>(),
                          std::nullopt};
            if (r.contains("max_iops")) q.max_iops = r.at("max_iops").get<std::uint64_t>();
            return q;
        }
        if (op == "server_cache.disable")
            return DisableServerCache{r.at("segment").get<std::string>()};
        if (op == "fs.set_param")
            return SetFsParam{r.at("key").get<std::string>(), r.at("value").get<std::string>()};
        throw Error("mockvendor script: unknown op '" + op + "'");
    } catch (const json::exception& e) {
        throw Error("mockvendor script: bad record: " + std::string(e.what()));
    }
}

}  // namespace

CommandScript translate(const PolicyPlan& plan, Backend backend) {
    check_well_formed(plan);
    CommandScript out;
    out.backend = backend;
    out.command_count = plan.actions.size();
    if (backend == Backend::LinuxDryRun) {
        std::string text =
            "# DRY-RUN: generated command script, for review only; never executed\n"
            "# backend: linux-dryrun\n";
        for (std::size_t i = 0; i < plan.actions.size(); ++i)
            text += linux_line(plan.actions[i], i) + "\n";
        out.text = std::move(text);
    } else {
        json arr = json::array();
        for (const PolicyAction& a : plan.actions) arr.push_back(vendor_record(a));
        out.text = arr.dump(2) + "\n";
    }
    return out;
}

PolicyPlan parse_commands(const std::string& script_text, Backend backend) {
    if (backend != Backend::MockVendor)
        throw Error("parse_commands supports only the mockvendor backend");
    json arr;
    try {
        arr = json::parse(script_text);
    } catch (const json::exception& e) {
        throw Error("mockvendor script: " + std::string(e.what()));
    }
    if (!arr.is_array()) throw Error("mockvendor script must be a JSON array");
    PolicyPlan plan;
    for (const auto& r : arr) plan.actions.push_back(action_from_vendor(r));
    check_well_formed(plan);
    return plan;
}

}  // namespace idss::ir
