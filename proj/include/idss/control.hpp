#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "idss/advisor.hpp"
#include "idss/cachesim.hpp"
#include "idss/policyir.hpp"
#include "idss/telemetry.hpp"
#include "idss/trace.hpp"

namespace idss::ctl {

/* ---- experience db ---- */

struct ExperienceRecord {
    std::uint64_t version = 0;
    std::string timestamp;
    ir::PolicyPlan plan;
    std::map<std::string, double> metrics;
    std::string note;
};

/* Append-only NDJSON log of applied configurations.  Records are loaded
 * on open and never rewritten; rollback is a pure read. */
class ExperienceDb {
public:
    explicit ExperienceDb(std::string path);

    std::uint64_t record(const ir::PolicyPlan& plan, const std::map<std::string, double>& metrics,
                         const std::string& note);
    /* Returns the stored plan for `version`; the db is not modified.
     * Callers re-record the restored plan as a new version. */
    ir::PolicyPlan rollback(std::uint64_t version) const;

    /* Initializes an empty db from a JSON array of {plan, note} objects
     * ("several stable configurations"); they become versions 1..k. */
    void seed_from_file(const std::string& seed_path);

    const std::vector<ExperienceRecord>& records() const { return records_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::vector<ExperienceRecord> records_;
};

/* ---- evaluators ---- */

class Evaluator {
public:
    virtual ~Evaluator() = default;
    /* Measures a plan; deterministic per (plan, trial_seed). */
    virtual std::map<std::string, double> measure(const ir::PolicyPlan& plan,
                                                  std::uint64_t trial_seed) = 0;
};

/* CI evaluator: runs the plan's cache settings against a fixed trace and
 * reports the simulated hit rate.  SetCachePolicy picks the engine,
 * SetCacheSize (bytes / 4096-byte blocks) overrides the capacity. */
class CacheSimEvaluator : public Evaluator {
public:
    CacheSimEvaluator(trace::AccessTrace trace, std::size_t default_capacity_blocks);
    std::map<std::string, double> measure(const ir::PolicyPlan& plan,
                                          std::uint64_t trial_seed) override;

private:
    trace::AccessTrace trace_;
    std::size_t default_capacity_;
};

/* ---- control loop ---- */

struct ClientFixture {
    std::string client_id;  // informational; telemetry text must agree
    std::string telemetry_text;
    trace::AccessTrace trace;
    std::string intent;
    std::size_t prefix_len = 400;
};

struct LoopInputs {
    std::vector<ClientFixture> clients;
    telem::ServerState server;
    std::vector<std::string> constraints;
    adv::Objective objective;
    std::vector<ir::Guardrail> guardrails;
    std::string objective_metric = "hit_rate";
    double regression_threshold = 0.05;  // relative drop that triggers rollback
};

struct LoopReport {
    std::string doc_hash;
    ir::PolicyPlan plan;          // advised plan
    ir::PolicyPlan applied_plan;  // == plan unless a regression rolled back
    ir::ValidationResult validation;
    std::string commands;  // empty unless validation accepted
    std::size_t command_count = 0;
    std::map<std::string, double> metrics;  // measured for the advised plan
    std::uint64_t experience_version = 0;
    bool rolled_back = false;
    std::string failed_stage;  // empty on a completed run
    std::string error;
};

/* acquire -> organize -> advise -> validate -> translate -> apply(dry-run)
 * -> measure -> record.  Validation failure stops before translate and
 * records the rejection; a measured regression beyond the threshold rolls
 * back to the compared version and re-emits its commands.  Stage errors
 * produce a partial report instead of throwing. */
LoopReport run_loop(const LoopInputs& inputs, adv::Advisor& advisor, ir::Backend backend,
                    Evaluator& evaluator, ExperienceDb& db,
                    const adv::KnowledgeStore& knowledge = {},
                    const adv::AuditLog* audit = nullptr);

/* ---- A/B testing ---- */

struct ABResult {
    char winner = 'A';
    double mean_a = 0.0;
    double mean_b = 0.0;
    std::vector<double> trials_a;
    std::vector<double> trials_b;
    bool aborted = false;
    std::string error;
};

/* Winner = higher mean over the trials; ties go to A (the incumbent).
 * Evaluator failure aborts with the trials gathered so far. */
ABResult ab_test(const ir::PolicyPlan& plan_a, const ir::PolicyPlan& plan_b, Evaluator& evaluator,
                 std::size_t trials, const std::string& metric = "hit_rate");

/* ---- Greedy-Fine baseline (Carver-inspired) ---- */

using ParamValue = std::variant<double, std::string>;
std::string to_string(const ParamValue& v);

struct Param {
    std::string name;
    std::vector<ParamValue> domain;  // finite, non-empty
};

struct ParamSpace {
    std::vector<Param> params;                  // declared order breaks ties
    std::map<std::string, ParamValue> baseline;  // one value per param, from its domain
};

using Config = std::map<std::string, ParamValue>;
using ConfigEvaluator = std::function<double(const Config&)>;

struct GreedyResult {
    Config config;
    double value = 0.0;
    std::size_t evaluations = 0;  // distinct evaluator invocations
    bool warning = false;         // evaluator failed mid-search; best-so-far returned
    std::string message;
};

/* Phase 1 sweeps each parameter one-at-a-time from the baseline to rank
 * influence (max - min objective); phase 2 fixes parameters in descending
 * influence order, keeping a change only when it improves by > epsilon.
 * Never returns a value below the baseline's. */
GreedyResult greedy_fine(const ParamSpace& space, const ConfigEvaluator& evaluator,
                         std::size_t budget, double epsilon = 1e-9);

/* ---- normalized reporting ---- */

struct TraceSweep {
    std::string trace;
    std::vector<sim::SimResult> results;  // one per policy
    sim::PolicyKind chosen = sim::PolicyKind::LRU;
};

struct NormalizedReport {
    struct Row {
        std::string trace;
        sim::PolicyKind chosen;
        sim::PolicyKind best;
        double chosen_hr = 0.0;
        double best_hr = 0.0;
        double normalized = 1.0;
    };
    std::vector<Row> rows;
    double geomean = 1.0;
    double geomean_vs_worst = 1.0;  // worst excludes the exclusion list
    std::map<std::string, std::size_t> histogram;  // chosen-policy counts
};

/* normalized = chosen / best hit rate (1.0 when both are zero); the
 * exclusion list (default FIFO) applies only to the vs-worst ratio. */
NormalizedReport normalize_report(
    const std::vector<TraceSweep>& sweeps,
    const std::vector<sim::PolicyKind>& exclude_from_worst = {sim::PolicyKind::FIFO});

std::string report_to_csv(const NormalizedReport& report);

/* ---- loop configuration file ---- */

struct LoopConfig {
    struct ClientSpec {
        std::string telemetry_path;
        std::string trace_path;
        std::string intent;
        std::size_t prefix_len = 400;
    };
    std::vector<ClientSpec> clients;
    std::string objective_text;
    std::string guardrails_path;  // optional
    std::string advisor = "mock";
    std::string backend = "mockvendor";
    std::string experience_path = "experience.ndjson";
    std::string knowledge_dir;     // optional
    std::string eval_trace_path;   // evaluator workload
    double capacity_fraction = 0.001;
    double regression_threshold = 0.05;
    std::string metric = "hit_rate";
    telem::ServerState server;
    std::vector<std::string> constraints;
};

LoopConfig load_loop_config(const std::string& path);

/* Loads every file the config references (telemetry, traces, guardrails)
 * and assembles the loop inputs.  Objective constraint refs pick up the
 * loaded guardrail ids. */
LoopInputs build_loop_inputs(const LoopConfig& cfg);

}  // namespace idss::ctl
