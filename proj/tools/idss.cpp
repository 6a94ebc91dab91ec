#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "idss/advisor.hpp"
#include "idss/cachesim.hpp"
#include "idss/common.hpp"
#include "idss/control.hpp"
#include "idss/policyir.hpp"
#include "idss/telemetry.hpp"
#include "idss/trace.hpp"

using namespace idss;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

trace::FormatSpec format_for(const std::string& name) {
    if (name == "native") return trace::FormatSpec::native();
    if (name == "plain") return trace::FormatSpec::plain();
    // anything else is a path to a JSON format spec
    std::ifstream in(name);
    if (!in) throw Error("unknown format '" + name + "' (expected native, plain, or a spec file)");
    std::ostringstream buf;
    buf << in.rdbuf();
    return trace::FormatSpec::from_json_text(buf.str());
}

trace::Kind kind_for(const std::string& s) {
    if (s == "A" || s == "a") return trace::Kind::A;
    if (s == "B" || s == "b") return trace::Kind::B;
    if (s == "C" || s == "c") return trace::Kind::C;
    if (s == "D" || s == "d") return trace::Kind::D;
    throw Error("unknown trace kind '" + s + "' (expected A, B, C, or D)");
}

std::unique_ptr<adv::Advisor> make_advisor(const std::string& name) {
    if (name == "mock") return std::make_unique<adv::MockAdvisor>();
    if (name == "live") {
        auto cfg = adv::LiveConfig::from_env();
        return std::make_unique<adv::LiveAdvisor>(cfg, adv::make_http_transport(cfg));
    }
    throw Error("unknown advisor '" + name + "' (expected mock or live)");
}

std::size_t capacity_from(const trace::AccessTrace& t, std::uint64_t capacity, double frac) {
    if (capacity > 0) return capacity;
    return sim::capacity_for(trace::trace_stats(t), frac);
}

void write_out(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    out << text;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

json report_json(const ctl::LoopReport& rep) {
    json v = json::array();
    for (const auto& viol : rep.validation.violations)
        v.push_back({{"guardrail", viol.guardrail_id},
                     {"action_index", viol.action_index},
                     {"message", viol.message}});
    return json{{"doc_hash", rep.doc_hash},
                {"plan", ir::plan_to_json(rep.plan)},
                {"applied_plan", ir::plan_to_json(rep.applied_plan)},
                {"accepted", rep.validation.accepted},
                {"violations", v},
                {"commands", rep.commands},
                {"command_count", rep.command_count},
                {"metrics", rep.metrics},
                {"experience_version", rep.experience_version},
                {"rolled_back", rep.rolled_back}};
}

ctl::ParamValue param_value_from(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return j.get<double>();
    throw Error("parameter domain values must be numbers or strings");
}

int run(int argc, char** argv) {
    CLI::App app{"idss: intent-driven storage tuning toolkit"};
    app.require_subcommand(1);
    int status = 0;  // validate sets 1 on rejection

    // ---- gen-trace ----
    struct GenOpts {
        std::string kind, out;
        std::uint64_t seed = 1;
    };
    auto gen = std::make_shared<GenOpts>();
    auto* gen_cmd = app.add_subcommand("gen-trace", "Generate a synthetic workload trace");
    gen_cmd->add_option("--kind", gen->kind, "Trace family: A, B, C, or D")->required();
    gen_cmd->add_option("--seed", gen->seed, "RNG seed")->capture_default_str();
    gen_cmd->add_option("--out", gen->out, "Output CSV path")->required();
    gen_cmd->callback([gen] {
        auto t = trace::gen_synthetic(kind_for(gen->kind), gen->seed);
        trace::save_trace(t, gen->out);
        std::cout << "wrote " << gen->out << " (" << t.requests.size() << " requests)\n";
    });

    // ---- load-check ----
    struct LoadOpts {
        std::string path, format = "native";
    };
    auto load = std::make_shared<LoadOpts>();
    auto* load_cmd = app.add_subcommand("load-check", "Parse a trace file and report stats");
    load_cmd->add_option("--trace", load->path, "Trace file")->required();
    load_cmd->add_option("--format", load->format, "native, plain, or a JSON spec file")->capture_default_str();
    load_cmd->callback([load] {
        trace::LoadStats stats;
        auto t = trace::load_trace(load->path, format_for(load->format), &stats);
        auto ts = trace::trace_stats(t);
        std::cout << "requests=" << ts.length << " unique=" << ts.unique_blocks
                  << " skipped=" << stats.rows_skipped << "\n";
    });

    // ---- simulate ----
    struct SimOpts {
        std::string path, format = "native", policy = "LRU";
        std::uint64_t capacity = 0;
        double frac = 0.001;
    };
    auto simo = std::make_shared<SimOpts>();
    auto* sim_cmd = app.add_subcommand("simulate", "Replay a trace through one cache policy");
    sim_cmd->add_option("--trace", simo->path, "Trace file")->required();
    sim_cmd->add_option("--format", simo->format, "Trace format")->capture_default_str();
    sim_cmd->add_option("--policy", simo->policy, "LRU, LFU, FIFO, ARC, LeCaR, or Cacheus")->capture_default_str();
    sim_cmd->add_option("--capacity", simo->capacity, "Cache capacity in blocks");
    sim_cmd->add_option("--capacity-frac", simo->frac, "Capacity as a fraction of unique blocks")->capture_default_str();
    sim_cmd->callback([simo] {
        auto t = trace::load_trace(simo->path, format_for(simo->format));
        auto cap = capacity_from(t, simo->capacity, simo->frac);
        auto r = sim::simulate(t, sim::parse_policy(simo->policy), cap);
        std::cout << "policy=" << sim::to_string(r.policy) << " capacity=" << r.capacity
                  << " hits=" << r.hits << " misses=" << r.misses
                  << " hit_rate=" << fmt6(r.hit_rate) << "\n";
    });

    // ---- sweep ----
    struct SweepOpts {
        std::string path, format = "native", out;
        std::uint64_t capacity = 0;
        double frac = 0.001;
        unsigned parallel = 1;
    };
    auto sw = std::make_shared<SweepOpts>();
    auto* sweep_cmd = app.add_subcommand("sweep", "Replay a trace through all six policies");
    sweep_cmd->add_option("--trace", sw->path, "Trace file")->required();
    sweep_cmd->add_option("--format", sw->format, "Trace format")->capture_default_str();
    sweep_cmd->add_option("--capacity", sw->capacity, "Cache capacity in blocks");
    sweep_cmd->add_option("--capacity-frac", sw->frac, "Capacity as a fraction of unique blocks")->capture_default_str();
    sweep_cmd->add_option("--parallel", sw->parallel, "Worker threads")->capture_default_str();
    sweep_cmd->add_option("--out", sw->out, "Output CSV path (default stdout)");
    sweep_cmd->callback([sw] {
        auto t = trace::load_trace(sw->path, format_for(sw->format));
        auto cap = capacity_from(t, sw->capacity, sw->frac);
        auto report = sim::sweep(t, cap, {}, sw->parallel);
        report.trace_label = fs::path(sw->path).stem().string();
        write_out(sw->out, sim::sweep_to_csv(report));
    });

    // ---- select-policy ----
    struct SelOpts {
        std::string path, format = "native", advisor = "mock";
        std::string objective = "maximize cache hit rate";
        std::size_t prefix = 400;
    };
    auto sel = std::make_shared<SelOpts>();
    auto* sel_cmd =
        app.add_subcommand("select-policy", "Ask the advisor for a policy from a trace prefix");
    sel_cmd->add_option("--trace", sel->path, "Trace file")->required();
    sel_cmd->add_option("--format", sel->format, "Trace format")->capture_default_str();
    sel_cmd->add_option("--prefix", sel->prefix, "Prefix length fed to the advisor")->capture_default_str();
    sel_cmd->add_option("--advisor", sel->advisor, "mock or live")->capture_default_str();
    sel_cmd->add_option("--objective", sel->objective, "Objective text")->capture_default_str();
    sel_cmd->callback([sel] {
        auto t = trace::load_trace(sel->path, format_for(sel->format));
        auto pre = trace::prefix(t, std::min(sel->prefix, t.requests.size()));
        auto profile = telem::extract_profile(pre);
        std::vector<sim::PolicyKind> candidates(sim::kAllPolicies.begin(),
                                                sim::kAllPolicies.end());
        adv::Objective obj;
        obj.goal_text = sel->objective;
        auto prompt = adv::build_policy_prompt(profile, pre, candidates, obj);
        auto advisor = make_advisor(sel->advisor);
        auto choice = adv::advise_cache_policy(*advisor, prompt, candidates);
        std::cout << sim::to_string(choice.policy) << "\n";
    });

    // ---- plan ----
    struct PlanOpts {
        std::string config, out;
    };
    auto pl = std::make_shared<PlanOpts>();
    auto* plan_cmd = app.add_subcommand("plan", "Produce an advised policy plan from a loop config");
    plan_cmd->add_option("--config", pl->config, "Loop config JSON")->required();
    plan_cmd->add_option("--out", pl->out, "Output plan JSON path (default stdout)");
    plan_cmd->callback([pl] {
        auto cfg = ctl::load_loop_config(pl->config);
        auto in = ctl::build_loop_inputs(cfg);
        std::vector<telem::ClientInput> clients;
        for (const auto& f : in.clients) {
            telem::ClientInput c;
            c.telemetry = telem::parse_telemetry(f.telemetry_text);
            c.profile = telem::extract_profile(
                trace::prefix(f.trace, std::min(f.prefix_len, f.trace.requests.size())));
            c.intent = f.intent;
            clients.push_back(std::move(c));
        }
        auto doc = telem::organize(clients, in.server, in.constraints);
        adv::KnowledgeStore ks;
        if (!cfg.knowledge_dir.empty()) ks = adv::KnowledgeStore::load_dir(cfg.knowledge_dir);
        auto advisor = make_advisor(cfg.advisor);
        auto plan = adv::advise_plan(*advisor, doc, in.objective, ks);
        write_out(pl->out, ir::plan_to_json(plan).dump(2) + "\n");
    });

    // ---- validate ----
    struct ValOpts {
        std::string plan, rails;
    };
    auto va = std::make_shared<ValOpts>();
    auto* val_cmd = app.add_subcommand("validate", "Check a plan against guardrails");
    val_cmd->add_option("--plan", va->plan, "Plan JSON")->required();
    val_cmd->add_option("--guardrails", va->rails, "Guardrails JSON")->required();
    val_cmd->callback([va, &status] {
        auto plan = ir::load_plan(va->plan);
        auto rails = ir::load_guardrails(va->rails);
        auto res = ir::validate(plan, rails);
        if (res.accepted) {
            std::cout << "accepted\n";
        } else {
            std::cout << "rejected\n";
            for (const auto& v : res.violations) std::cout << "violation: " << v.message << "\n";
            status = 1;
        }
    });

    // ---- translate ----
    struct TrOpts {
        std::string plan, backend = "mockvendor", out;
    };
    auto tr = std::make_shared<TrOpts>();
    auto* tr_cmd = app.add_subcommand("translate", "Render a plan as backend commands");
    tr_cmd->add_option("--plan", tr->plan, "Plan JSON")->required();
    tr_cmd->add_option("--backend", tr->backend, "linux-dryrun or mockvendor")->capture_default_str();
    tr_cmd->add_option("--out", tr->out, "Output path (default stdout)");
    tr_cmd->callback([tr] {
        auto plan = ir::load_plan(tr->plan);
        auto script = ir::translate(plan, ir::parse_backend(tr->backend));
        write_out(tr->out, script.text);
    });

    // ---- run-loop ----
    struct LoopOpts {
        std::string config, out;
    };
    auto lo = std::make_shared<LoopOpts>();
    auto* loop_cmd = app.add_subcommand("run-loop", "Run one full tuning-loop iteration");
    loop_cmd->add_option("--config", lo->config, "Loop config JSON")->required();
    loop_cmd->add_option("--out", lo->out, "Write the full report as JSON");
    loop_cmd->callback([lo] {
        auto cfg = ctl::load_loop_config(lo->config);
        auto in = ctl::build_loop_inputs(cfg);
        if (cfg.eval_trace_path.empty())
            throw Error("loop config has no evaluator.trace; run-loop needs one");
        auto eval_trace = trace::load_trace(cfg.eval_trace_path, trace::FormatSpec::native());
        ctl::CacheSimEvaluator ev(
            eval_trace,
            sim::capacity_for(trace::trace_stats(eval_trace), cfg.capacity_fraction));
        ctl::ExperienceDb db(cfg.experience_path);
        adv::KnowledgeStore ks;
        if (!cfg.knowledge_dir.empty()) ks = adv::KnowledgeStore::load_dir(cfg.knowledge_dir);
        auto advisor = make_advisor(cfg.advisor);
        auto rep = ctl::run_loop(in, *advisor, ir::parse_backend(cfg.backend), ev, db, ks);
        if (!rep.failed_stage.empty())
            throw Error("stage " + rep.failed_stage + " failed: " + rep.error);
        if (!lo->out.empty()) write_out(lo->out, report_json(rep).dump(2) + "\n");
        std::cout << "doc_hash=" << rep.doc_hash << "\n"
                  << "plan_id=" << rep.plan.plan_id << "\n"
                  << "actions=" << rep.plan.actions.size() << "\n"
                  << "validation=" << (rep.validation.accepted ? "accepted" : "rejected") << "\n";
        for (const auto& v : rep.validation.violations)
            std::cout << "violation: " << v.message << "\n";
        for (const auto& [k, v] : rep.metrics) std::cout << k << "=" << fmt6(v) << "\n";
        std::cout << "experience_version=" << rep.experience_version << "\n"
                  << "rolled_back=" << (rep.rolled_back ? "true" : "false") << "\n";
    });

    // ---- ab-test ----
    struct AbOpts {
        std::string plan_a, plan_b, path, metric = "hit_rate";
        double frac = 0.001;
        std::uint64_t capacity = 0;
        std::size_t trials = 3;
    };
    auto ab = std::make_shared<AbOpts>();
    auto* ab_cmd = app.add_subcommand("ab-test", "Compare two plans on the cache-sim evaluator");
    ab_cmd->add_option("--plan-a", ab->plan_a, "Incumbent plan JSON")->required();
    ab_cmd->add_option("--plan-b", ab->plan_b, "Challenger plan JSON")->required();
    ab_cmd->add_option("--trace", ab->path, "Evaluator trace")->required();
    ab_cmd->add_option("--capacity", ab->capacity, "Cache capacity in blocks");
    ab_cmd->add_option("--capacity-frac", ab->frac, "Capacity fraction")->capture_default_str();
    ab_cmd->add_option("--trials", ab->trials, "Trials per plan")->capture_default_str();
    ab_cmd->add_option("--metric", ab->metric, "Metric to compare")->capture_default_str();
    ab_cmd->callback([ab] {
        auto t = trace::load_trace(ab->path, trace::FormatSpec::native());
        ctl::CacheSimEvaluator ev(t, capacity_from(t, ab->capacity, ab->frac));
        auto res = ctl::ab_test(ir::load_plan(ab->plan_a), ir::load_plan(ab->plan_b), ev,
                                ab->trials, ab->metric);
        if (res.aborted) throw Error("ab-test aborted: " + res.error);
        std::cout << "winner=" << res.winner << " mean_a=" << fmt6(res.mean_a)
                  << " mean_b=" << fmt6(res.mean_b) << "\n";
    });

    // ---- greedy ----
    struct GreedyOpts {
        std::string space, path;
        double frac = 0.001, epsilon = 1e-9;
        std::uint64_t capacity = 0;
        std::size_t budget = 30;
    };
    auto gr = std::make_shared<GreedyOpts>();
    auto* gr_cmd = app.add_subcommand(
        "greedy", "Greedy-Fine search over cache parameters (policy, cache_blocks)");
    gr_cmd->add_option("--space", gr->space, "Param space JSON: {params:[{name,domain}],baseline}")
        ->required();
    gr_cmd->add_option("--trace", gr->path, "Evaluator trace")->required();
    gr_cmd->add_option("--capacity", gr->capacity, "Default capacity in blocks");
    gr_cmd->add_option("--capacity-frac", gr->frac, "Default capacity fraction")->capture_default_str();
    gr_cmd->add_option("--budget", gr->budget, "Evaluation budget")->capture_default_str();
    gr_cmd->add_option("--epsilon", gr->epsilon, "Minimum improvement to keep a step")->capture_default_str();
    gr_cmd->callback([gr] {
        std::ifstream in(gr->space);
        if (!in) throw Error("cannot open param space " + gr->space);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw Error("param space " + gr->space + " is not valid JSON");
        ctl::ParamSpace space;
        for (const auto& p : j.at("params")) {
            ctl::Param param;
            param.name = p.at("name").get<std::string>();
            for (const auto& v : p.at("domain")) param.domain.push_back(param_value_from(v));
            space.params.push_back(std::move(param));
        }
        for (const auto& [k, v] : j.at("baseline").items())
            space.baseline[k] = param_value_from(v);

        auto t = trace::load_trace(gr->path, trace::FormatSpec::native());
        std::size_t default_cap = capacity_from(t, gr->capacity, gr->frac);
        // Config keys the evaluator understands; others are inert.
        auto evaluator = [&](const ctl::Config& c) {
            sim::PolicyKind kind = sim::PolicyKind::LRU;
            std::size_t cap = default_cap;
            if (auto it = c.find("policy"); it != c.end())
                kind = sim::parse_policy(std::get<std::string>(it->second));
            if (auto it = c.find("cache_blocks"); it != c.end())
                cap = std::max<std::size_t>(1, std::size_t(std::get<double>(it->second)));
            return sim::simulate(t, kind, cap).hit_rate;
        };
        auto r = ctl::greedy_fine(space, evaluator, gr->budget, gr->epsilon);
        for (const auto& [k, v] : r.config)
            std::cout << "param " << k << "=" << ctl::to_string(v) << "\n";
        std::cout << "value=" << fmt6(r.value) << "\nevaluations=" << r.evaluations << "\n";
        if (r.warning) std::cout << "warning: " << r.message << "\n";
    });

    // ---- experience ----
    struct ExpOpts {
        std::string db, out;
        std::uint64_t version = 0;
    };
    auto ex = std::make_shared<ExpOpts>();
    auto* exp_cmd = app.add_subcommand("experience", "Inspect the experience database");
    exp_cmd->require_subcommand(1);
    auto* list_cmd = exp_cmd->add_subcommand("list", "List recorded versions");
    list_cmd->add_option("--db", ex->db, "Experience NDJSON path")->required();
    list_cmd->callback([ex] {
        ctl::ExperienceDb db(ex->db);
        for (const auto& r : db.records()) {
            std::cout << "v" << r.version << " " << r.timestamp;
            for (const auto& [k, v] : r.metrics) std::cout << " " << k << "=" << fmt6(v);
            std::cout << " note=" << r.note << "\n";
        }
    });
    auto* rb_cmd = exp_cmd->add_subcommand("rollback", "Print the plan stored at a version");
    rb_cmd->add_option("--db", ex->db, "Experience NDJSON path")->required();
    rb_cmd->add_option("--version", ex->version, "Version to fetch")->required();
    rb_cmd->add_option("--out", ex->out, "Output plan JSON path (default stdout)");
    rb_cmd->callback([ex] {
        ctl::ExperienceDb db(ex->db);
        auto plan = db.rollback(ex->version);
        write_out(ex->out, ir::plan_to_json(plan).dump(2) + "\n");
    });

    // ---- report ----
    struct RepOpts {
        std::vector<std::string> traces;
        std::string out, advisor = "mock";
        double frac = 0.001;
        std::size_t prefix = 400;
    };
    auto re = std::make_shared<RepOpts>();
    auto* rep_cmd =
        app.add_subcommand("report", "Normalized selection-quality report across traces");
    rep_cmd->add_option("--trace", re->traces, "Trace files (repeatable)")->required();
    rep_cmd->add_option("--capacity-frac", re->frac, "Capacity fraction")->capture_default_str();
    rep_cmd->add_option("--prefix", re->prefix, "Advisor prefix length")->capture_default_str();
    rep_cmd->add_option("--advisor", re->advisor, "mock or live")->capture_default_str();
    rep_cmd->add_option("--out", re->out, "Output CSV path (default stdout)");
    rep_cmd->callback([re] {
        auto advisor = make_advisor(re->advisor);
        std::vector<sim::PolicyKind> candidates(sim::kAllPolicies.begin(),
                                                sim::kAllPolicies.end());
        std::vector<ctl::TraceSweep> sweeps;
        for (const auto& path : re->traces) {
            auto t = trace::load_trace(path, trace::FormatSpec::native());
            auto cap = sim::capacity_for(trace::trace_stats(t), re->frac);
            auto report = sim::sweep(t, cap);
            ctl::TraceSweep s;
            s.trace = fs::path(path).stem().string();
            for (const auto& [kind, result] : report.results) s.results.push_back(result);
            auto pre = trace::prefix(t, std::min(re->prefix, t.requests.size()));
            adv::Objective obj;
            obj.goal_text = "maximize cache hit rate";
            auto prompt = adv::build_policy_prompt(telem::extract_profile(pre), pre, candidates, obj);
            s.chosen = adv::advise_cache_policy(*advisor, prompt, candidates).policy;
            sweeps.push_back(std::move(s));
        }
        auto rep = ctl::normalize_report(sweeps);
        write_out(re->out, ctl::report_to_csv(rep));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "run 'idss --help' for usage\n";
        return 2;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
