#include <doctest.h>

#include <cmath>

#include "golden_sweeps.hpp"
#include "idss/advisor.hpp"
#include "idss/telemetry.hpp"

using namespace idss;

TEST_CASE("frozen golden sweeps match the live simulator and the mock stays within 2pp") {
    for (const auto& g : golden::kSweeps) {
        CAPTURE(g.label);
        auto t = trace::gen_synthetic(g.kind, g.seed);
        auto stats = trace::trace_stats(t);
        REQUIRE(stats.length == g.length);
        REQUIRE(sim::capacity_for(stats, 0.001) == g.capacity);

        auto report = sim::sweep(t, g.capacity);
        double best_hr = 0.0;
        for (const auto& row : g.rows) {
            const auto& got = report.results.at(row.policy);
            CHECK(got.hits == row.hits);
            CHECK(got.hit_rate ==
                  static_cast<double>(row.hits) / static_cast<double>(g.length));
            best_hr = std::max(best_hr, got.hit_rate);
        }

        // Selection quality: the mock advisor's pick lands within 2
        // percentage points of the best policy at this capacity.
        auto pre = trace::prefix(t, 400);
        auto profile = telem::extract_profile(pre);
        std::vector<sim::PolicyKind> candidates(sim::kAllPolicies.begin(),
                                                sim::kAllPolicies.end());
        adv::Objective obj;
        obj.goal_text = "maximize cache hit rate";
        adv::MockAdvisor advisor;
        auto choice = adv::advise_cache_policy(
            advisor, adv::build_policy_prompt(profile, pre, candidates, obj), candidates);
        CHECK(choice.policy == g.mock_choice);
        double chosen_hr = report.results.at(choice.policy).hit_rate;
        CHECK(best_hr - chosen_hr <= 0.02);
    }
}
