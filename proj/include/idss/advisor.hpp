#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idss/cachesim.hpp"
#include "idss/policyir.hpp"
#include "idss/telemetry.hpp"
#include "idss/trace.hpp"

namespace idss::adv {

struct Objective {
    std::string goal_text;
    std::map<std::string, int> client_priorities;  // client id -> rank, 1 = highest
    std::vector<std::string> constraint_refs;      // guardrail ids the goal must respect

    bool operator==(const Objective&) const = default;
};

struct GenerationSettings {
    double temperature = 0.0;
    std::optional<int> top_k;     // candidate-count truncation
    std::optional<double> top_p;  // probability-mass truncation
    int max_output_tokens = 256;
    std::vector<std::string> stop;

    bool operator==(const GenerationSettings&) const = default;
};

/* ---- knowledge store ---- */

struct KnowledgeDoc {
    std::string id;
    std::vector<std::string> tags;
    std::string body;
    std::string source = "design-doc";  // design-doc | research | experience

    bool operator==(const KnowledgeDoc&) const = default;
};

class KnowledgeStore {
public:
    /* Directory of .txt files: first line `tags: a, b`, optional second
     * line `source: research`, rest is the body.  Doc id = file stem. */
    static KnowledgeStore load_dir(const std::string& dir);

    void add(KnowledgeDoc doc);
    const std::vector<KnowledgeDoc>& docs() const { return docs_; }
    bool empty() const { return docs_.empty(); }

private:
    std::vector<KnowledgeDoc> docs_;
};

/* Top-k docs by case-folded token-overlap with the query; ties by id. */
std::vector<KnowledgeDoc> retrieve(const KnowledgeStore& store, const std::string& query,
                                   std::size_t k);

/* ---- advisors ---- */

struct PolicyChoice {
    sim::PolicyKind policy = sim::PolicyKind::LRU;
    std::string rationale;
    bool confident = false;  // false when a clarification round was needed
};

struct AdvisorUnavailable : Error {
    using Error::Error;
};
struct AdvisorAmbiguous : Error {
    using Error::Error;
};

class Advisor {
public:
    virtual ~Advisor() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const std::string& prompt, const GenerationSettings& s) = 0;
};

/* Appends one JSON record per advisor call to an NDJSON file. */
class AuditLog {
public:
    explicit AuditLog(std::string path) : path_(std::move(path)) {}
    void append(const std::string& advisor, const std::string& prompt,
                const std::string& response) const;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/* ---- prompts ---- */

std::string build_policy_prompt(const telem::WorkloadProfile& profile,
                                const trace::AccessTrace& raw_prefix,
                                const std::vector<sim::PolicyKind>& candidates,
                                const Objective& objective);

std::string build_plan_prompt(const telem::SystemStateDoc& doc, const Objective& objective,
                              const KnowledgeStore& knowledge);

/* Whole-word, case-insensitive parse of the response against the
 * candidate set; one clarification retry, then AdvisorAmbiguous. */
PolicyChoice advise_cache_policy(Advisor& advisor, const std::string& prompt,
                                 const std::vector<sim::PolicyKind>& candidates,
                                 const GenerationSettings& settings = {},
                                 const AuditLog* audit = nullptr);

/* Asks for a JSON array of actions; rejects plans that reference clients
 * absent from the doc. */
ir::PolicyPlan advise_plan(Advisor& advisor, const telem::SystemStateDoc& doc,
                           const Objective& objective, const KnowledgeStore& knowledge,
                           const GenerationSettings& settings = {},
                           const AuditLog* audit = nullptr);

/* ---- deterministic mock (CI stand-in for the model) ---- */

/* Answers policy prompts with a fixed rule table over the embedded
 * profile, and plan prompts with the scenario rules; both are pure
 * functions of the prompt text. */
class MockAdvisor : public Advisor {
public:
    std::string name() const override { return "mock"; }
    std::string complete(const std::string& prompt, const GenerationSettings& s) override;
};

/* The rule table the mock uses, exposed for calibration tests. */
sim::PolicyKind mock_policy_rule(const telem::WorkloadProfile& profile);

/* ---- live chat-completions advisor ---- */

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    /* POSTs a JSON body, returns the raw response body; throws Error on
     * transport failure. */
    virtual std::string post_json(const std::string& body) = 0;
};

struct LiveConfig {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string api_key;   // empty -> no Authorization header
    std::string model = "default";
    int timeout_seconds = 30;
    int transport_retries = 2;

    /* Reads IDSS_LLM_ENDPOINT (required), IDSS_LLM_API_KEY, IDSS_LLM_MODEL. */
    static LiveConfig from_env();
};

std::unique_ptr<ChatTransport> make_http_transport(const LiveConfig& config);

class LiveAdvisor : public Advisor {
public:
    explicit LiveAdvisor(LiveConfig config, std::unique_ptr<ChatTransport> transport = nullptr);

    std::string name() const override { return "live:" + config_.model; }
    /* Builds a chat-completions payload carrying exactly the provided
     * settings; retries transport failures, then AdvisorUnavailable. */
    std::string complete(const std::string& prompt, const GenerationSettings& s) override;

    std::string last_request_body() const { return last_request_body_; }

private:
    LiveConfig config_;
    std::unique_ptr<ChatTransport> transport_;
    std::string last_request_body_;
};

}  // namespace idss::adv
