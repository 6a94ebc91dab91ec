// Acceptance gate: one self-timed binary, one PASS/FAIL line per criterion,
// nonzero exit if anything fails.  Run directly or via `ctest -R acceptance`.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "golden_sweeps.hpp"
#include "idss/advisor.hpp"
#include "idss/cachesim.hpp"
#include "idss/common.hpp"
#include "idss/control.hpp"
#include "idss/policyir.hpp"
#include "idss/telemetry.hpp"
#include "idss/trace.hpp"
#include "reference_policies.hpp"
#include "test_helpers.hpp"

using namespace idss;

namespace {

int failures = 0;

void verdict(int idx, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    if (!ok) ++failures;
}

void run_criterion(int idx, const std::string& name, const std::function<std::string()>& body) {
    try {
        std::string detail = body();  // empty or an informative summary
        verdict(idx, name, true, detail);
    } catch (const std::exception& e) {
        verdict(idx, name, false, e.what());
    }
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

/* --- criterion 1: oracle equivalence on randomized traces --- */
std::string oracle_equivalence() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(20260814);
    for (int iter = 0; iter < 1000; ++iter) {
        std::size_t len = 1 + rng.below(512);
        std::size_t cap = 1 + rng.below(32);
        std::uint64_t universe = 1 + rng.below(64);
        std::vector<std::uint64_t> blocks;
        blocks.reserve(len);
        for (std::size_t i = 0; i < len; ++i) blocks.push_back(rng.below(universe));
        auto t = testutil::trace_of(blocks);

        auto check = [&](sim::PolicyKind kind, refsim::Kind ref) {
            auto expect = refsim::run(ref, cap, blocks);
            auto got = sim::simulate(t, kind, cap);
            require(got.hits == expect.hits,
                    "iter " + std::to_string(iter) + ": " + sim::to_string(kind) + " hits " +
                        std::to_string(got.hits) + " != oracle " + std::to_string(expect.hits));
        };
        check(sim::PolicyKind::LRU, refsim::Kind::LRU);
        check(sim::PolicyKind::FIFO, refsim::Kind::FIFO);
        check(sim::PolicyKind::LFU, refsim::Kind::LFU);
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 60.0, "took " + std::to_string(secs) + "s, budget 60s");
    char buf[64];
    std::snprintf(buf, sizeof buf, "1000 traces x 3 policies in %.1fs", secs);
    return buf;
}

/* --- criterion 2: analytic cases --- */
std::string analytic_cases() {
    auto c = trace::gen_synthetic(trace::Kind::C, 1);
    auto rep = sim::sweep(c, 10);
    require(rep.results.at(sim::PolicyKind::LRU).hit_rate == 0.0, "LRU on cycle not exactly 0");
    require(rep.results.at(sim::PolicyKind::FIFO).hit_rate == 0.0, "FIFO on cycle not exactly 0");

    for (auto kind : {trace::Kind::A, trace::Kind::B, trace::Kind::C, trace::Kind::D}) {
        auto t = trace::gen_synthetic(kind, 11);
        auto stats = trace::trace_stats(t);
        for (auto k : sim::kAllPolicies) {
            auto r = sim::simulate(t, k, stats.unique_blocks);
            require(r.hits == stats.length - stats.unique_blocks,
                    sim::to_string(k) + " at full working set: hits " + std::to_string(r.hits) +
                        " != length - unique " +
                        std::to_string(stats.length - stats.unique_blocks));
        }
    }
    return "cyclic zero + compulsory-miss bound on all six policies";
}

/* --- criterion 3: frozen goldens + mock selection within 2pp --- */
std::string selection_quality() {
    std::vector<sim::PolicyKind> candidates(sim::kAllPolicies.begin(), sim::kAllPolicies.end());
    adv::Objective obj;
    obj.goal_text = "maximize cache hit rate";
    adv::MockAdvisor advisor;
    double worst_gap = 0.0;
    for (const auto& g : golden::kSweeps) {
        auto t = trace::gen_synthetic(g.kind, g.seed);
        auto stats = trace::trace_stats(t);
        require(sim::capacity_for(stats, 0.001) == g.capacity,
                std::string(g.label) + ": capacity drifted from golden");
        auto rep = sim::sweep(t, g.capacity);
        double best_hr = 0.0;
        for (const auto& row : g.rows) {
            const auto& got = rep.results.at(row.policy);
            require(got.hits == row.hits, std::string(g.label) + "/" + sim::to_string(row.policy) +
                                              ": hits " + std::to_string(got.hits) +
                                              " != golden " + std::to_string(row.hits));
            best_hr = std::max(best_hr, got.hit_rate);
        }
        auto pre = trace::prefix(t, 400);
        auto prompt =
            adv::build_policy_prompt(telem::extract_profile(pre), pre, candidates, obj);
        auto choice = adv::advise_cache_policy(advisor, prompt, candidates);
        double gap = best_hr - rep.results.at(choice.policy).hit_rate;
        worst_gap = std::max(worst_gap, gap);
        require(gap <= 0.02, std::string(g.label) + ": chosen " + sim::to_string(choice.policy) +
                                 " is " + std::to_string(gap) + " below best");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "worst selection gap %.4f (limit 0.02)", worst_gap);
    return buf;
}

/* --- criterion 4: guardrail rejection names the rail; removal flips it --- */
std::string guardrail_scenario() {
    ir::PolicyPlan plan;
    plan.plan_id = "qos-video";
    plan.actions = {ir::SetQoSClass{"video", 500000000, std::nullopt}};

    ir::Guardrail rail;
    rail.id = "nic-bw-cap";
    rail.kind = ir::GuardrailKind::Cap;
    rail.selector.action = "SetQoSClass";
    rail.limit = {100000000, "bytes_per_sec", {}};

    auto rejected = ir::validate(plan, {rail});
    require(!rejected.accepted, "500 MB/s QoS class passed a 100 MB/s cap");
    require(!rejected.violations.empty() && rejected.violations[0].guardrail_id == "nic-bw-cap",
            "violation does not name nic-bw-cap");
    auto accepted = ir::validate(plan, {});
    require(accepted.accepted, "plan rejected with no guardrails present");
    return "rejected citing nic-bw-cap; accepted once removed";
}

/* --- criterion 5: 200 random plans round-trip through mockvendor --- */
std::string ir_round_trip() {
    Rng rng(5150);
    const std::vector<std::string> targets = {"vol0", "vol1", "clientA", "clientB", "seg0"};
    const std::vector<std::string> links = {"nic0", "nic1"};
    for (int iter = 0; iter < 200; ++iter) {
        ir::PolicyPlan plan;
        plan.plan_id = "rand-" + std::to_string(iter);
        plan.provenance = {"acceptance", to_hex(fnv1a(plan.plan_id))};
        std::set<std::string> keys;
        std::size_t n = 1 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& t = targets[rng.below(targets.size())];
            const std::string& l = links[rng.below(links.size())];
            ir::PolicyAction a;
            std::string key;
            switch (rng.below(9)) {
                case 0:
                    a = ir::SetCachePolicy{t, sim::kAllPolicies[rng.below(6)]};
                    key = "SetCachePolicy:" + t;
                    break;
                case 1:
                    a = ir::SetCacheSize{t, rng.below(1u << 30)};
                    key = "SetCacheSize:" + t;
                    break;
                case 2:
                    a = ir::SetReadAhead{t, 512 * (1 + rng.below(1024))};
                    key = "SetReadAhead:" + t;
                    break;
                case 3:
                    a = ir::ReserveBandwidth{t, 1 + rng.below(2000000000), l};
                    key = "ReserveBandwidth:" + t + "@" + l;
                    break;
                case 4:
                    a = ir::CapBandwidth{t, 1 + rng.below(2000000000), l};
                    key = "CapBandwidth:" + t + "@" + l;
                    break;
                case 5:
                    a = ir::SetIOScheduler{t, rng.chance(0.5) ? "mq-deadline" : "none"};
                    key = "SetIOScheduler:" + t;
                    break;
                case 6:
                    a = ir::SetQoSClass{t, 1 + rng.below(1000000000),
                                        rng.chance(0.5)
                                            ? std::optional<std::uint64_t>(1 + rng.below(100000))
                                            : std::nullopt};
                    key = "SetQoSClass:" + t;
                    break;
                case 7:
                    a = ir::DisableServerCache{t};
                    key = "DisableServerCache:" + t;
                    break;
                default:
                    a = ir::SetFsParam{"vm.dirty_ratio", std::to_string(rng.below(100))};
                    key = "SetFsParam:vm.dirty_ratio";
                    break;
            }
            if (keys.insert(key).second) plan.actions.push_back(a);
        }
        ir::check_well_formed(plan);
        auto script = ir::translate(plan, ir::Backend::MockVendor);
        auto back = ir::parse_commands(script.text, ir::Backend::MockVendor);
        require(back.actions.size() == plan.actions.size(),
                "iter " + std::to_string(iter) + ": action count changed in round trip");
        for (std::size_t i = 0; i < plan.actions.size(); ++i)
            require(ir::action_to_json(back.actions[i]) == ir::action_to_json(plan.actions[i]),
                    "iter " + std::to_string(iter) + ": action " + std::to_string(i) +
                        " changed in round trip");
    }
    return "200 random plans, action-for-action";
}

/* --- criterion 6: experience db rollback byte-identity + version order --- */
std::string experience_db() {
    testutil::TempDir dir("acceptance_exp");
    auto path = dir.path("exp.ndjson").string();

    ir::PolicyPlan v1;
    v1.plan_id = "v1";
    v1.provenance = {"acceptance", "cafe"};
    v1.actions = {ir::SetCachePolicy{"vol0", sim::PolicyKind::LFU},
                  ir::SetReadAhead{"vol0", 262144}};
    ir::PolicyPlan v2;
    v2.plan_id = "v2";
    v2.actions = {ir::SetCachePolicy{"vol0", sim::PolicyKind::FIFO}};

    ctl::ExperienceDb db(path);
    require(db.record(v1, {{"hit_rate", 0.7}}, "applied") == 1, "first version != 1");
    require(db.record(v2, {{"hit_rate", 0.4}}, "applied") == 2, "second version != 2");
    require(ir::plan_canonical_json(db.rollback(1)) == ir::plan_canonical_json(v1),
            "rollback(1) not byte-identical to v1");

    // versions stay strictly increasing across reopen, seed, and record
    ctl::ExperienceDb reopened(path);
    require(reopened.record(db.rollback(1), {{"hit_rate", 0.7}}, "rolled back") == 3,
            "version after reopen != 3");

    nlohmann::json seeds = nlohmann::json::array();
    seeds.push_back({{"plan", ir::plan_to_json(v1)}, {"note", "stable"}});
    seeds.push_back({{"plan", ir::plan_to_json(v2)}});
    testutil::write_file(dir.path("seed.json"), seeds.dump());
    ctl::ExperienceDb seeded(dir.path("seeded.ndjson").string());
    seeded.seed_from_file(dir.path("seed.json").string());
    std::uint64_t last = 0;
    for (const auto& r : seeded.records()) {
        require(r.version > last, "seeded versions not strictly increasing");
        last = r.version;
    }
    require(seeded.record(v1, {}, "applied") == 3, "record after seeding != 3");
    return "byte-identical rollback; versions 1..3 across reopen and seeding";
}

/* --- criterion 7: greedy-fine exact optimum + never below baseline --- */
std::string greedy_fine() {
    ctl::ParamSpace space;
    space.params = {{"x", {0.0, 1.0, 2.0}}, {"y", {0.0, 1.0}}};
    space.baseline = {{"x", 0.0}, {"y", 0.0}};
    auto f = [](const ctl::Config& c) {
        return 3 * std::get<double>(c.at("x")) + std::get<double>(c.at("y"));
    };
    auto r = ctl::greedy_fine(space, f, 50);
    require(std::get<double>(r.config.at("x")) == 2.0 &&
                std::get<double>(r.config.at("y")) == 1.0 && r.value == 7.0,
            "did not reach the exact optimum x=2,y=1 (value 7)");

    Rng rng(777);
    for (int iter = 0; iter < 100; ++iter) {
        ctl::ParamSpace s;
        std::size_t nparams = 2 + rng.below(3);
        for (std::size_t i = 0; i < nparams; ++i) {
            ctl::Param p;
            p.name = "p" + std::to_string(i);
            std::size_t dom = 2 + rng.below(3);
            for (std::size_t d = 0; d < dom; ++d) p.domain.push_back(double(d));
            s.params.push_back(p);
            s.baseline[p.name] = double(rng.below(dom));
        }
        std::vector<double> w;
        for (std::size_t i = 0; i < nparams * (nparams + 1); ++i) w.push_back(rng.unit() * 2 - 1);
        auto obj = [&](const ctl::Config& c) {
            double v = 0;
            std::size_t k = 0;
            for (std::size_t i = 0; i < nparams; ++i) {
                double xi = std::get<double>(c.at("p" + std::to_string(i)));
                v += w[k++] * xi;
                for (std::size_t j = i; j < nparams; ++j)
                    v += w[k++] * xi * std::get<double>(c.at("p" + std::to_string(j)));
            }
            return v;
        };
        double baseline_value = obj(s.baseline);
        auto res = ctl::greedy_fine(s, obj, 40);
        require(res.value >= baseline_value,
                "iter " + std::to_string(iter) + ": result below baseline");
    }
    return "exact optimum 7; 100 random objectives never below baseline";
}

/* --- criterion 8: end-to-end loop on the trace-B fixture --- */
std::string end_to_end_loop() {
    const auto& g = golden::kSweeps[1];  // trace B
    require(g.kind == trace::Kind::B, "golden table order changed");
    auto traceB = trace::gen_synthetic(g.kind, g.seed);

    ctl::LoopInputs in;
    ctl::ClientFixture f;
    f.client_id = "clientB";
    f.telemetry_text = "client_id=clientB\nproc=appd\nread_bps=5000000\nwrite_bps=1000000\n";
    f.trace = traceB;
    f.intent = "hot working set";
    in.clients = {f};
    in.objective.goal_text = "maximize cache hit rate";

    adv::MockAdvisor advisor;
    ctl::CacheSimEvaluator ev(traceB, g.capacity);
    testutil::TempDir dir("acceptance_loop");
    ctl::ExperienceDb db(dir.path("exp.ndjson").string());

    auto rep = ctl::run_loop(in, advisor, ir::Backend::MockVendor, ev, db);
    require(rep.failed_stage.empty(), "stage " + rep.failed_stage + " failed: " + rep.error);
    require(rep.validation.accepted, "plan rejected");

    bool has_lfu = false;
    for (const auto& a : rep.plan.actions)
        if (const auto* sp = std::get_if<ir::SetCachePolicy>(&a))
            has_lfu = has_lfu || sp->policy == sim::PolicyKind::LFU;
    require(has_lfu, "plan lacks SetCachePolicy(., LFU)");

    std::uint64_t golden_lfu_hits = 0;
    for (const auto& row : g.rows)
        if (row.policy == sim::PolicyKind::LFU) golden_lfu_hits = row.hits;
    double golden_hr =
        static_cast<double>(golden_lfu_hits) / static_cast<double>(g.length);
    require(rep.metrics.at("hit_rate") == golden_hr,
            "measured hit rate " + std::to_string(rep.metrics.at("hit_rate")) +
                " != golden sweep(B)[LFU] " + std::to_string(golden_hr));
    char buf[64];
    std::snprintf(buf, sizeof buf, "LFU plan applied, hit rate %.6f == golden", golden_hr);
    return buf;
}

}  // namespace

int main() {
    auto t0 = std::chrono::steady_clock::now();
    run_criterion(1, "simulator oracle equivalence", oracle_equivalence);
    run_criterion(2, "analytic cache bounds", analytic_cases);
    run_criterion(3, "selection quality vs frozen goldens", selection_quality);
    run_criterion(4, "guardrail rejection scenario", guardrail_scenario);
    run_criterion(5, "mockvendor IR round-trip", ir_round_trip);
    run_criterion(6, "experience db rollback and versions", experience_db);
    run_criterion(7, "greedy-fine optimum and baseline floor", greedy_fine);
    run_criterion(8, "end-to-end loop on trace B", end_to_end_loop);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1fs elapsed (budget 300s)", secs);
    verdict(9, "suite runtime", secs < 300.0 && failures == 0, buf);
    return failures == 0 ? 0 : 1;
}
