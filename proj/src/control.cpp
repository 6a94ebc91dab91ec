#include "idss/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "idss/common.hpp"

namespace idss::ctl {

using nlohmann::json;
namespace fs = std::filesystem;

/* ---- experience db ---- */

namespace {

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json record_to_json(const ExperienceRecord& r) {
    return json{{"version", r.version},
                {"timestamp", r.timestamp},
                {"plan", ir::plan_to_json(r.plan)},
                {"metrics", r.metrics},
                {"note", r.note}};
}

ExperienceRecord record_from_json(const json& j) {
    ExperienceRecord r;
    r.version = j.at("version").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.plan = ir::plan_from_json(j.at("plan"));
    if (j.contains("metrics"))
        r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.note = j.value("note", "");
    return r;
}

}  // namespace

ExperienceDb::ExperienceDb(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // absent file == empty db; created on first record()
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("experience db " + path_ + ": bad JSON at line " + std::to_string(lineno));
        ExperienceRecord r = record_from_json(j);
        std::uint64_t expect = records_.empty() ? 1 : records_.back().version + 1;
        if (r.version != expect)
            throw Error("experience db " + path_ + ": version " + std::to_string(r.version) +
                        " at line " + std::to_string(lineno) + ", expected " +
                        std::to_string(expect));
        records_.push_back(std::move(r));
    }
}

std::uint64_t ExperienceDb::record(const ir::PolicyPlan& plan,
                                   const std::map<std::string, double>& metrics,
                                   const std::string& note) {
    ExperienceRecord r;
    r.version = records_.empty() ? 1 : records_.back().version + 1;
    r.timestamp = iso_now();
    r.plan = plan;
    r.metrics = metrics;
    r.note = note;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to experience db " + path_);
    out << record_to_json(r).dump() << '\n';
    out.flush();
    records_.push_back(std::move(r));
    return records_.back().version;
}

ir::PolicyPlan ExperienceDb::rollback(std::uint64_t version) const {
    for (const auto& r : records_)
        if (r.version == version) return r.plan;
    throw Error("experience db has no version " + std::to_string(version));
}

void ExperienceDb::seed_from_file(const std::string& seed_path) {
    if (!records_.empty())
        throw Error("experience db " + path_ + " already has records; refusing to seed");
    std::ifstream in(seed_path);
    if (!in) throw Error("cannot open seed file " + seed_path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw Error("seed file " + seed_path + " must be a JSON array of {plan, note}");
    for (const auto& entry : j) {
        ir::PolicyPlan plan = ir::plan_from_json(entry.at("plan"));
        record(plan, {}, entry.value("note", "seeded"));
    }
}

/* ---- evaluators ---- */

CacheSimEvaluator::CacheSimEvaluator(trace::AccessTrace trace, std::size_t default_capacity_blocks)
    : trace_(std::move(trace)), default_capacity_(std::max<std::size_t>(1, default_capacity_blocks)) {}

std::map<std::string, double> CacheSimEvaluator::measure(const ir::PolicyPlan& plan,
                                                         std::uint64_t /*trial_seed*/) {
    sim::PolicyKind kind = sim::PolicyKind::LRU;
    bool have_policy = false;
    std::size_t capacity = default_capacity_;
    for (const auto& a : plan.actions) {
        if (const auto* p = std::get_if<ir::SetCachePolicy>(&a); p && !have_policy) {
            kind = p->policy;
            have_policy = true;
        } else if (const auto* s = std::get_if<ir::SetCacheSize>(&a)) {
            capacity = std::max<std::uint64_t>(1, s->bytes / 4096);
        }
    }
    sim::SimResult r = sim::simulate(trace_, kind, capacity);
    return {{"hit_rate", r.hit_rate}};
}

/* ---- control loop ---- */

LoopReport run_loop(const LoopInputs& inputs, adv::Advisor& advisor, ir::Backend backend,
                    Evaluator& evaluator, ExperienceDb& db, const adv::KnowledgeStore& knowledge,
                    const adv::AuditLog* audit) {
    LoopReport rep;
    std::string stage = "acquire";
    try {
        std::vector<telem::ClientInput> clients;
        for (const auto& f : inputs.clients) {
            telem::ClientInput in;
            in.telemetry = telem::parse_telemetry(f.telemetry_text);
            std::size_t n = std::min(f.prefix_len, f.trace.requests.size());
            in.profile = telem::extract_profile(trace::prefix(f.trace, n));
            in.intent = f.intent;
            clients.push_back(std::move(in));
        }

        stage = "organize";
        telem::SystemStateDoc doc = telem::organize(clients, inputs.server, inputs.constraints);
        rep.doc_hash = telem::doc_hash(doc);

        stage = "advise";
        rep.plan = adv::advise_plan(advisor, doc, inputs.objective, knowledge, {}, audit);
        rep.applied_plan = rep.plan;

        stage = "validate";
        rep.validation = ir::validate(rep.plan, inputs.guardrails);
        if (!rep.validation.accepted) {
            std::string why = rep.validation.violations.empty()
                                  ? "rejected"
                                  : "rejected: " + rep.validation.violations.front().message;
            rep.experience_version = db.record(rep.plan, {}, why);
            return rep;  // never reaches translate/apply
        }

        stage = "translate";
        ir::CommandScript script = ir::translate(rep.plan, backend);
        rep.commands = script.text;
        rep.command_count = script.command_count;

        /* apply: desk-scale runs are dry-run only; the command script is
         * the artifact and nothing touches the host. */

        stage = "measure";
        rep.metrics = evaluator.measure(rep.plan, 0);

        stage = "record";
        const ExperienceRecord* prev = nullptr;
        for (auto it = db.records().rbegin(); it != db.records().rend(); ++it) {
            if (it->metrics.count(inputs.objective_metric)) {
                prev = &*it;
                break;
            }
        }
        auto mit = rep.metrics.find(inputs.objective_metric);
        if (prev && mit != rep.metrics.end()) {
            double m_prev = prev->metrics.at(inputs.objective_metric);
            if (m_prev > 0 && (m_prev - mit->second) / m_prev > inputs.regression_threshold) {
                rep.rolled_back = true;
                ir::PolicyPlan restored = db.rollback(prev->version);
                rep.applied_plan = restored;
                ir::CommandScript undo = ir::translate(restored, backend);
                rep.commands = undo.text;
                rep.command_count = undo.command_count;
                auto restored_metrics = evaluator.measure(restored, 0);
                rep.experience_version =
                    db.record(restored, restored_metrics,
                              "regression vs v" + std::to_string(prev->version) + "; rolled back");
                return rep;
            }
        }
        rep.experience_version = db.record(rep.plan, rep.metrics, "applied");
    } catch (const std::exception& e) {
        rep.failed_stage = stage;
        rep.error = e.what();
    }
    return rep;
}

/* ---- A/B testing ---- */

ABResult ab_test(const ir::PolicyPlan& plan_a, const ir::PolicyPlan& plan_b, Evaluator& evaluator,
                 std::size_t trials, const std::string& metric) {
    if (trials == 0) throw Error("ab_test needs at least one trial");
    ABResult res;
    auto run_one = [&](const ir::PolicyPlan& p, std::uint64_t seed, std::vector<double>& out) {
        auto m = evaluator.measure(p, seed);
        auto it = m.find(metric);
        if (it == m.end()) throw Error("evaluator did not report metric " + metric);
        out.push_back(it->second);
    };
    try {
        for (std::size_t t = 0; t < trials; ++t) {
            run_one(plan_a, t, res.trials_a);
            run_one(plan_b, t, res.trials_b);
        }
    } catch (const std::exception& e) {
        res.aborted = true;
        res.error = e.what();
    }
    auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    res.mean_a = mean(res.trials_a);
    res.mean_b = mean(res.trials_b);
    res.winner = res.mean_b > res.mean_a ? 'B' : 'A';
    return res;
}

/* ---- Greedy-Fine ---- */

std::string to_string(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", *d);
        return buf;
    }
    return std::get<std::string>(v);
}

namespace {

std::string config_key(const Config& c) {
    std::string key;
    for (const auto& [name, v] : c) {
        key += name;
        key += '=';
        if (const auto* d = std::get_if<double>(&v)) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", *d);
            key += buf;
        } else {
            key += std::get<std::string>(v);
        }
        key += ';';
    }
    return key;
}

struct BudgetExhausted {};
struct EvalFailed {
    std::string what;
};

}  // namespace

GreedyResult greedy_fine(const ParamSpace& space, const ConfigEvaluator& evaluator,
                         std::size_t budget, double epsilon) {
    if (space.params.empty()) throw Error("greedy_fine: empty parameter space");
    if (budget < space.params.size())
        throw Error("greedy_fine: budget " + std::to_string(budget) + " below parameter count " +
                    std::to_string(space.params.size()));
    std::set<std::string> seen;
    for (const auto& p : space.params) {
        if (p.domain.empty()) throw Error("greedy_fine: parameter " + p.name + " has empty domain");
        if (!seen.insert(p.name).second)
            throw Error("greedy_fine: duplicate parameter " + p.name);
        auto it = space.baseline.find(p.name);
        if (it == space.baseline.end())
            throw Error("greedy_fine: baseline missing parameter " + p.name);
        if (std::find(p.domain.begin(), p.domain.end(), it->second) == p.domain.end())
            throw Error("greedy_fine: baseline value for " + p.name + " outside its domain");
    }
    if (space.baseline.size() != space.params.size())
        throw Error("greedy_fine: baseline names a parameter not in the space");

    GreedyResult result;
    std::map<std::string, double> memo;
    Config best_config;
    double best_value = 0.0;
    bool have_best = false;

    auto eval = [&](const Config& c) -> double {
        std::string key = config_key(c);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        if (result.evaluations >= budget) throw BudgetExhausted{};
        double v;
        try {
            v = evaluator(c);
        } catch (const std::exception& e) {
            throw EvalFailed{e.what()};
        }
        ++result.evaluations;
        memo.emplace(std::move(key), v);
        if (!have_best || v > best_value) {
            best_config = c;
            best_value = v;
            have_best = true;
        }
        return v;
    };

    Config current = space.baseline;
    try {
        eval(current);  // baseline failure is not recoverable
    } catch (const EvalFailed& e) {
        throw Error("greedy_fine: baseline evaluation failed: " + e.what);
    }

    try {
        /* Phase 1: influence = spread of the objective while varying one
         * parameter off the baseline. */
        std::vector<std::pair<double, std::size_t>> influence;
        for (std::size_t i = 0; i < space.params.size(); ++i) {
            const Param& p = space.params[i];
            double lo = 0, hi = 0;
            bool first = true;
            for (const ParamValue& v : p.domain) {
                Config c = space.baseline;
                c[p.name] = v;
                double val = eval(c);
                if (first) {
                    lo = hi = val;
                    first = false;
                } else {
                    lo = std::min(lo, val);
                    hi = std::max(hi, val);
                }
            }
            influence.emplace_back(hi - lo, i);
        }
        std::stable_sort(influence.begin(), influence.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });

        /* Phase 2: fix parameters greedily, most influential first. */
        double current_value = eval(current);  // memoized
        for (const auto& [spread, idx] : influence) {
            (void)spread;
            const Param& p = space.params[idx];
            ParamValue pick = current.at(p.name);
            double pick_value = current_value;
            for (const ParamValue& v : p.domain) {
                Config c = current;
                c[p.name] = v;
                double val = eval(c);
                if (val > pick_value) {
                    pick_value = val;
                    pick = v;
                }
            }
            if (pick_value - current_value > epsilon) {
                current[p.name] = pick;
                current_value = pick_value;
            } else {
                break;  // no parameter pass improved; search has converged
            }
        }
    } catch (const BudgetExhausted&) {
        result.message = "budget exhausted";
    } catch (const EvalFailed& e) {
        result.warning = true;
        result.message = "evaluator failed mid-search: " + e.what;
    }

    result.config = best_config;
    result.value = best_value;
    return result;
}

/* ---- normalized reporting ---- */

NormalizedReport normalize_report(const std::vector<TraceSweep>& sweeps,
                                  const std::vector<sim::PolicyKind>& exclude_from_worst) {
    NormalizedReport rep;
    std::vector<double> worst_ratios;
    for (const auto& s : sweeps) {
        if (s.results.empty()) throw Error("normalize_report: sweep " + s.trace + " is empty");
        const sim::SimResult* chosen = nullptr;
        const sim::SimResult* best = nullptr;
        for (const auto& r : s.results) {
            if (r.policy == s.chosen) chosen = &r;
            if (!best || r.hit_rate > best->hit_rate) best = &r;
        }
        if (!chosen)
            throw Error("normalize_report: sweep " + s.trace + " lacks chosen policy " +
                        sim::to_string(s.chosen));
        NormalizedReport::Row row;
        row.trace = s.trace;
        row.chosen = s.chosen;
        row.best = best->policy;
        row.chosen_hr = chosen->hit_rate;
        row.best_hr = best->hit_rate;
        row.normalized = best->hit_rate > 0 ? chosen->hit_rate / best->hit_rate : 1.0;
        rep.rows.push_back(row);
        rep.histogram[sim::to_string(s.chosen)]++;

        const sim::SimResult* worst = nullptr;
        for (const auto& r : s.results) {
            if (std::find(exclude_from_worst.begin(), exclude_from_worst.end(), r.policy) !=
                exclude_from_worst.end())
                continue;
            if (!worst || r.hit_rate < worst->hit_rate) worst = &r;
        }
        if (worst)
            worst_ratios.push_back(worst->hit_rate > 0 ? chosen->hit_rate / worst->hit_rate : 1.0);
    }

    auto geomean = [](const std::vector<double>& v) {
        if (v.empty()) return 1.0;
        double acc = 0;
        for (double x : v) {
            if (x == 0) return 0.0;
            acc += std::log(x);
        }
        return std::exp(acc / static_cast<double>(v.size()));
    };
    std::vector<double> normalized;
    for (const auto& r : rep.rows) normalized.push_back(r.normalized);
    rep.geomean = geomean(normalized);
    rep.geomean_vs_worst = geomean(worst_ratios);
    return rep;
}

std::string report_to_csv(const NormalizedReport& report) {
    std::ostringstream out;
    char buf[64];
    out << "trace,chosen,best,chosen_hr,best_hr,normalized\n";
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", r.chosen_hr, r.best_hr, r.normalized);
        out << r.trace << ',' << sim::to_string(r.chosen) << ',' << sim::to_string(r.best) << ','
            << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.6f", report.geomean);
    out << "GEOMEAN,,,,," << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.6f", report.geomean_vs_worst);
    out << "# geomean vs worst: " << buf << '\n';
    out << "# chosen histogram:";
    for (const auto& [name, n] : report.histogram) out << ' ' << name << '=' << n;
    out << '\n';
    return out.str();
}

/* ---- loop configuration file ---- */

LoopConfig load_loop_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open loop config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("loop config " + path + " is not valid JSON");
    if (!j.is_object()) throw Error("loop config " + path + " must be a JSON object");

    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) -> std::string {
        if (p.empty() || fs::path(p).is_absolute()) return p;
        return (base / p).string();
    };

    LoopConfig cfg;
    if (!j.contains("clients") || !j.at("clients").is_array() || j.at("clients").empty())
        throw Error("loop config needs a non-empty clients array");
    for (const auto& c : j.at("clients")) {
        LoopConfig::ClientSpec spec;
        spec.telemetry_path = resolve(c.at("telemetry").get<std::string>());
        spec.trace_path = resolve(c.at("trace").get<std::string>());
        spec.intent = c.value("intent", "");
        spec.prefix_len = c.value("prefix_len", std::size_t{400});
        cfg.clients.push_back(std::move(spec));
    }
    cfg.objective_text = j.value("objective", "");
    if (j.contains("guardrails")) cfg.guardrails_path = resolve(j.at("guardrails").get<std::string>());
    cfg.advisor = j.value("advisor", "mock");
    cfg.backend = j.value("backend", "mockvendor");
    cfg.experience_path = resolve(j.value("experience", "experience.ndjson"));
    if (j.contains("knowledge")) cfg.knowledge_dir = resolve(j.at("knowledge").get<std::string>());
    if (j.contains("evaluator")) {
        const auto& e = j.at("evaluator");
        cfg.eval_trace_path = resolve(e.at("trace").get<std::string>());
        cfg.capacity_fraction = e.value("capacity_fraction", 0.001);
    }
    cfg.regression_threshold = j.value("regression_threshold", 0.05);
    cfg.metric = j.value("metric", "hit_rate");
    if (j.contains("server")) {
        const auto& s = j.at("server");
        cfg.server.cache_policy = s.value("cache_policy", "LRU");
        cfg.server.cache_size_bytes = s.value("cache_size_bytes", std::uint64_t{0});
        if (s.contains("links"))
            cfg.server.link_bps = s.at("links").get<std::map<std::string, std::uint64_t>>();
        if (s.contains("tiers")) cfg.server.tiers = s.at("tiers").get<std::vector<std::string>>();
    }
    if (j.contains("constraints"))
        cfg.constraints = j.at("constraints").get<std::vector<std::string>>();
    return cfg;
}

LoopInputs build_loop_inputs(const LoopConfig& cfg) {
    LoopInputs in;
    for (const auto& spec : cfg.clients) {
        ClientFixture f;
        std::ifstream t(spec.telemetry_path);
        if (!t) throw Error("cannot open telemetry file " + spec.telemetry_path);
        std::ostringstream buf;
        buf << t.rdbuf();
        f.telemetry_text = buf.str();
        f.client_id = telem::parse_telemetry(f.telemetry_text).client_id;
        f.trace = trace::load_trace(spec.trace_path, trace::FormatSpec::native());
        f.intent = spec.intent;
        f.prefix_len = spec.prefix_len;
        in.clients.push_back(std::move(f));
    }
    in.server = cfg.server;
    in.constraints = cfg.constraints;
    in.objective.goal_text = cfg.objective_text;
    if (!cfg.guardrails_path.empty()) {
        in.guardrails = ir::load_guardrails(cfg.guardrails_path);
        for (const auto& g : in.guardrails) in.objective.constraint_refs.push_back(g.id);
    }
    in.objective_metric = cfg.metric;
    in.regression_threshold = cfg.regression_threshold;
    return in;
}

}  // namespace idss::ctl
