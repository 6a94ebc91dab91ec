#include "idss/advisor.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace idss::adv {

using nlohmann::json;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

constexpr const char* kDocBegin = "---BEGIN SYSTEM STATE---";
constexpr const char* kDocEnd = "---END SYSTEM STATE---";
constexpr const char* kPolicyInstruction = "Answer with exactly one policy name.";

}  // namespace

/* ---- knowledge store ---- */

KnowledgeStore KnowledgeStore::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("knowledge store: not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    KnowledgeStore store;
    for (const fs::path& file : files) {
        std::ifstream in(file);
        if (!in) throw Error("knowledge store: cannot read " + file.string());
        KnowledgeDoc doc;
        doc.id = file.stem().string();
        std::string line;
        if (!std::getline(in, line) || lower(trim(line)).rfind("tags:", 0) != 0)
            throw Error("knowledge doc " + doc.id + ": first line must be 'tags: ...'");
        for (const std::string& tag : split(trim(line).substr(5), ','))
            if (!trim(tag).empty()) doc.tags.push_back(lower(trim(tag)));
        std::string body;
        bool first_body_line = true;
        while (std::getline(in, line)) {
            if (first_body_line && lower(trim(line)).rfind("source:", 0) == 0) {
                doc.source = trim(trim(line).substr(7));
                continue;
            }
            first_body_line = false;
            body += line;
            body += '\n';
        }
        doc.body = body;
        store.add(std::move(doc));
    }
    return store;
}

void KnowledgeStore::add(KnowledgeDoc doc) {
    for (const KnowledgeDoc& d : docs_)
        if (d.id == doc.id) throw Error("knowledge store: duplicate doc id: " + doc.id);
    docs_.push_back(std::move(doc));
}

std::vector<KnowledgeDoc> retrieve(const KnowledgeStore& store, const std::string& query,
                                   std::size_t k) {
    const std::vector<std::string> qtokens = tokenize(query);
    const std::set<std::string> qset(qtokens.begin(), qtokens.end());

    std::vector<std::pair<std::size_t, const KnowledgeDoc*>> scored;
    for (const KnowledgeDoc& doc : store.docs()) {
        std::set<std::string> dset;
        for (const std::string& tag : doc.tags)
            for (const std::string& t : tokenize(tag)) dset.insert(t);
        for (const std::string& t : tokenize(doc.body)) dset.insert(t);
        std::size_t overlap = 0;
        for (const std::string& t : qset) overlap += dset.count(t);
        scored.emplace_back(overlap, &doc);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second->id < b.second->id;
    });

    std::vector<KnowledgeDoc> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(*scored[i].second);
    return out;
}

/* ---- audit log ---- */

void AuditLog::append(const std::string& advisor, const std::string& prompt,
                      const std::string& response) const {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("audit log: cannot open " + path_);
    out << json{{"timestamp", stamp}, {"advisor", advisor}, {"prompt", prompt},
                {"response", response}}
               .dump()
        << '\n';
}

/* ---- prompts ---- */

std::string build_policy_prompt(const telem::WorkloadProfile& profile,
                                const trace::AccessTrace& raw_prefix,
                                const std::vector<sim::PolicyKind>& candidates,
                                const Objective& objective) {
    if (candidates.empty()) throw Error("build_policy_prompt: no candidates");
    std::string p = "You advise on cache replacement policy for a storage server.\n";
    p += "objective: " + objective.goal_text + "\n";
    p += "profile:\n";
    p += "cyclicity=" + std::string(profile.cyclicity ? "1" : "0") + "\n";
    p += "novelty=" + fmt6(profile.novelty) + "\n";
    p += "prefix_len=" + std::to_string(profile.prefix_len) + "\n";
    p += "sequentiality=" + fmt6(profile.sequentiality) + "\n";
    p += "skew=" + fmt6(profile.skew) + "\n";
    p += "prefix blocks (" + std::to_string(raw_prefix.requests.size()) + "):";
    for (const auto& r : raw_prefix.requests) p += " " + std::to_string(r.block);
    p += "\ncandidates:";
    for (sim::PolicyKind k : candidates) p += " " + sim::to_string(k);
    p += "\n";
    p += kPolicyInstruction;
    p += "\n";
    return p;
}

std::string build_plan_prompt(const telem::SystemStateDoc& doc, const Objective& objective,
                              const KnowledgeStore& knowledge) {
    std::string p = "You advise a shared storage system; propose configuration actions.\n";
    p += "objective: " + objective.goal_text + "\n";
    if (!objective.constraint_refs.empty()) {
        p += "hard constraints (guardrail ids):";
        for (const std::string& c : objective.constraint_refs) p += " " + c;
        p += "\n";
    }
    if (!objective.client_priorities.empty()) {
        p += "client priorities:";
        for (const auto& [client, rank] : objective.client_priorities)
            p += " " + client + "=" + std::to_string(rank);
        p += "\n";
    }

    std::string query = objective.goal_text;
    for (const auto& c : doc.clients) query += " " + c.intent;
    auto docs = retrieve(knowledge, query, 3);
    if (!docs.empty()) {
        p += "relevant knowledge:\n";
        for (const KnowledgeDoc& d : docs) {
            std::string snippet = d.body.substr(0, 240);
            std::replace(snippet.begin(), snippet.end(), '\n', ' ');
            p += "[" + d.id + "] " + trim(snippet) + "\n";
        }
    }

    p += std::string(kDocBegin) + "\n";
    p += telem::doc_canonical_json(doc) + "\n";
    p += std::string(kDocEnd) + "\n";
    p += "Answer with a JSON array of action objects; allowed kinds: SetCachePolicy, "
         "SetCacheSize, SetReadAhead, ReserveBandwidth, CapBandwidth, SetIOScheduler, "
         "SetQoSClass, DisableServerCache, SetFsParam.\n";
    return p;
}

/* ---- response parsing ---- */

namespace {

std::vector<sim::PolicyKind> find_candidates(const std::string& response,
                                             const std::vector<sim::PolicyKind>& candidates) {
    const std::vector<std::string> words = tokenize(response);
    const std::set<std::string> wordset(words.begin(), words.end());
    std::vector<sim::PolicyKind> found;
    for (sim::PolicyKind k : candidates)
        if (wordset.count(lower(sim::to_string(k)))) found.push_back(k);
    return found;
}

}  // namespace

PolicyChoice advise_cache_policy(Advisor& advisor, const std::string& prompt,
                                 const std::vector<sim::PolicyKind>& candidates,
                                 const GenerationSettings& settings, const AuditLog* audit) {
    if (candidates.empty()) throw Error("advise_cache_policy: no candidates");

    std::string response = advisor.complete(prompt, settings);
    if (audit) audit->append(advisor.name(), prompt, response);
    auto found = find_candidates(response, candidates);
    if (found.size() == 1) return {found[0], response, true};

    // one bounded clarification round
    std::string clarification = prompt;
    clarification +=
        "\nYour previous answer was ambiguous. Answer with exactly one policy name from:";
    for (sim::PolicyKind k : candidates) clarification += " " + sim::to_string(k);
    clarification += "\n";
    response = advisor.complete(clarification, settings);
    if (audit) audit->append(advisor.name(), clarification, response);
    found = find_candidates(response, candidates);
    if (found.size() == 1) return {found[0], response, false};

    throw AdvisorAmbiguous("advisor response names " + std::to_string(found.size()) +
                           " candidate policies after clarification: " + response);
}

ir::PolicyPlan advise_plan(Advisor& advisor, const telem::SystemStateDoc& doc,
                           const Objective& objective, const KnowledgeStore& knowledge,
                           const GenerationSettings& settings, const AuditLog* audit) {
    const std::string prompt = build_plan_prompt(doc, objective, knowledge);
    const std::string response = advisor.complete(prompt, settings);
    if (audit) audit->append(advisor.name(), prompt, response);

    const auto open = response.find('[');
    const auto close = response.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw Error("advisor plan response contains no JSON array");
    json arr;
    try {
        arr = json::parse(response.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw Error("advisor plan response is not valid JSON: " + std::string(e.what()));
    }

    ir::PolicyPlan plan;
    plan.plan_id = "plan-" + telem::doc_hash(doc);
    plan.provenance = {advisor.name(), telem::doc_hash(doc)};
    for (const auto& a : arr) plan.actions.push_back(ir::action_from_json(a));
    ir::check_well_formed(plan);

    std::set<std::string> known;
    for (const auto& c : doc.clients) known.insert(c.client_id);
    for (const ir::PolicyAction& a : plan.actions) {
        std::optional<std::string> client;
        if (const auto* r = std::get_if<ir::ReserveBandwidth>(&a)) client = r->client;
        if (const auto* c = std::get_if<ir::CapBandwidth>(&a)) client = c->client;
        if (const auto* d = std::get_if<ir::DisableServerCache>(&a)) client = d->segment;
        if (client && !known.count(*client))
            throw Error("advisor plan references unknown client '" + *client + "'");
    }
    return plan;
}

/* ---- mock advisor ---- */

sim::PolicyKind mock_policy_rule(const telem::WorkloadProfile& profile) {
    // calibrated against the synthetic trace suite: B's hot set lands near
    // 0.14 while uniform prefixes sit at 0.05
    if (profile.cyclicity || profile.skew >= 0.10) return sim::PolicyKind::LFU;
    if (profile.novelty >= 0.9) return sim::PolicyKind::ARC;
    return sim::PolicyKind::LeCaR;
}

namespace {

telem::WorkloadProfile profile_from_prompt(const std::string& prompt) {
    telem::WorkloadProfile p;
    for (const std::string& raw : split(prompt, '\n')) {
        const std::string line = trim(raw);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "skew") p.skew = std::stod(value);
            else if (key == "novelty") p.novelty = std::stod(value);
            else if (key == "sequentiality") p.sequentiality = std::stod(value);
            else if (key == "cyclicity") p.cyclicity = value == "1";
            else if (key == "prefix_len") p.prefix_len = std::stoul(value);
        } catch (const std::exception&) {
            // non-numeric assignments inside free text are not profile lines
        }
    }
    return p;
}

std::vector<sim::PolicyKind> candidates_from_prompt(const std::string& prompt) {
    std::vector<sim::PolicyKind> out;
    for (const std::string& raw : split(prompt, '\n')) {
        const std::string line = trim(raw);
        if (line.rfind("candidates:", 0) != 0) continue;
        for (const std::string& name : split(line.substr(11), ' '))
            if (!trim(name).empty()) out.push_back(sim::parse_policy(trim(name)));
    }
    return out;
}

std::string mock_policy_answer(const std::string& prompt) {
    const telem::WorkloadProfile profile = profile_from_prompt(prompt);
    auto candidates = candidates_from_prompt(prompt);
    if (candidates.empty()) candidates.assign(sim::kAllPolicies.begin(), sim::kAllPolicies.end());

    sim::PolicyKind choice = mock_policy_rule(profile);
    if (std::find(candidates.begin(), candidates.end(), choice) == candidates.end())
        choice = candidates.front();

    std::string why;
    switch (choice) {
        case sim::PolicyKind::LFU:
            why = "the access histogram concentrates on a stable hot set";
            break;
        case sim::PolicyKind::ARC:
            why = "high novelty favors an adaptive recency/frequency balance";
            break;
        default: why = "mixed signals favor the adaptive learning policy"; break;
    }
    return sim::to_string(choice) + " - " + why + ".";
}

std::string mock_plan_answer(const std::string& prompt) {
    const auto begin = prompt.find(kDocBegin);
    const auto end = prompt.find(kDocEnd);
    if (begin == std::string::npos || end == std::string::npos)
        throw Error("mock advisor: prompt carries no system state document");
    const auto start = begin + std::string(kDocBegin).size();
    const telem::SystemStateDoc doc =
        telem::doc_from_json_text(trim(prompt.substr(start, end - start)));

    std::vector<ir::PolicyAction> reserves, caps, readaheads, disables, policies;

    const std::string link =
        doc.server.link_bps.empty() ? "" : doc.server.link_bps.begin()->first;
    std::uint64_t reserved = 0;
    for (const auto& c : doc.clients) {
        if (!link.empty() && c.telemetry.write_bps >= 1e9) {
            const auto bps = static_cast<std::uint64_t>(c.telemetry.write_bps * 0.8);
            reserves.push_back(ir::ReserveBandwidth{c.client_id, bps, link});
            reserved += bps;
        }
    }

    std::vector<const telem::ClientEntry*> streamers;
    for (const auto& c : doc.clients)
        if (c.profile.sequentiality >= 0.9 && c.telemetry.read_bps > c.telemetry.write_bps)
            streamers.push_back(&c);
    if (!link.empty() && !streamers.empty()) {
        const std::uint64_t capacity = doc.server.link_bps.at(link);
        if (capacity > reserved) {
            const std::uint64_t budget = (capacity - reserved) / streamers.size();
            if (budget > 0)
                for (const auto* c : streamers)
                    caps.push_back(ir::CapBandwidth{c->client_id, budget, link});
        }
    }

    for (const auto& c : doc.clients)
        if (c.profile.sequentiality >= 0.9)
            readaheads.push_back(ir::SetReadAhead{c.client_id, 262144});

    for (const auto& c : doc.clients)
        if (c.telemetry.cache_hit_rate && *c.telemetry.cache_hit_rate > 0.9)
            disables.push_back(ir::DisableServerCache{c.client_id});

    for (const auto& c : doc.clients)
        if (c.profile.prefix_len > 0)
            policies.push_back(ir::SetCachePolicy{c.client_id, mock_policy_rule(c.profile)});

    json arr = json::array();
    for (const auto& group : {reserves, caps, readaheads, disables, policies})
        for (const ir::PolicyAction& a : group) arr.push_back(ir::action_to_json(a));
    return arr.dump(2);
}

}  // namespace

std::string MockAdvisor::complete(const std::string& prompt, const GenerationSettings&) {
    if (prompt.find(kDocBegin) != std::string::npos) return mock_plan_answer(prompt);
    return mock_policy_answer(prompt);
}

/* ---- live advisor ---- */

LiveConfig LiveConfig::from_env() {
    LiveConfig c;
    const char* endpoint = std::getenv("IDSS_LLM_ENDPOINT");
    if (!endpoint || !*endpoint)
        throw Error("IDSS_LLM_ENDPOINT is not set; the live advisor needs an endpoint URL");
    c.endpoint = endpoint;
    if (const char* key = std::getenv("IDSS_LLM_API_KEY")) c.api_key = key;
    if (const char* model = std::getenv("IDSS_LLM_MODEL"); model && *model) c.model = model;
    return c;
}

namespace {

class HttplibTransport : public ChatTransport {
public:
    explicit HttplibTransport(LiveConfig config) : config_(std::move(config)) {
        if (config_.endpoint.rfind("https://", 0) == 0)
            throw Error("live advisor: https endpoints need a TLS-enabled build; use http");
        if (config_.endpoint.rfind("http://", 0) != 0)
            throw Error("live advisor: endpoint must be an http:// URL");
        const auto path_pos = config_.endpoint.find('/', std::string("http://").size());
        if (path_pos == std::string::npos) {
            base_ = config_.endpoint;
            path_ = "/v1/chat/completions";
        } else {
            base_ = config_.endpoint.substr(0, path_pos);
            path_ = config_.endpoint.substr(path_pos);
        }
    }

    std::string post_json(const std::string& body) override {
        httplib::Client client(base_);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) throw Error("transport error: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error("transport error: HTTP " + std::to_string(res->status));
        return res->body;
    }

private:
    LiveConfig config_;
    std::string base_;
    std::string path_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const LiveConfig& config) {
    return std::make_unique<HttplibTransport>(config);
}

LiveAdvisor::LiveAdvisor(LiveConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (!transport_) transport_ = make_http_transport(config_);
}

std::string LiveAdvisor::complete(const std::string& prompt, const GenerationSettings& s) {
    json payload{{"model", config_.model},
                 {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", s.temperature},
                 {"max_tokens", s.max_output_tokens}};
    if (!s.stop.empty()) payload["stop"] = s.stop;
    if (s.top_p) payload["top_p"] = *s.top_p;
    if (s.top_k) payload["top_k"] = *s.top_k;
    last_request_body_ = payload.dump();

    std::string body;
    std::string last_error;
    bool got_response = false;
    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        try {
            body = transport_->post_json(last_request_body_);
            got_response = true;
            break;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!got_response)
        throw AdvisorUnavailable("advisor endpoint unreachable after " +
                                 std::to_string(config_.transport_retries + 1) +
                                 " attempts: " + last_error);

    try {
        json j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw AdvisorUnavailable("malformed completion response: " + std::string(e.what()));
    }
}

}  // namespace idss::adv
