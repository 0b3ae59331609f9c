// Doubling-window export: schedule, growth gate, convergence and failure.
#include <doctest.h>

#include <stdexcept>
#include <cmath>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "svcfp/exporter.hpp"

using namespace svcfp;

namespace {

// count flows of one service spread evenly through [day_start, day_start+1d)
void add_day(std::vector<FlowRecord>& out, const char* dev, double day_start,
             ServiceKey service, int count) {
    for (int i = 0; i < count; ++i) {
        FlowRecord r;
        r.device_id = dev;
        r.timestamp = static_cast<std::int64_t>(
            day_start + (i + 0.5) * kSecondsPerDay / count);
        r.service = service;
        r.conn_key = "k" + std::to_string(out.size());
        out.push_back(r);
    }
}

} // namespace

TEST_CASE("the window schedule doubles from the anchor") {
    ExportConfig cfg;
    cfg.anchor_time = 1000.0;
    auto windows = window_schedule(cfg);
    REQUIRE(windows.size() == 7); // i = 0..6
    for (std::size_t i = 0; i < windows.size(); ++i) {
        CHECK(windows[i].start == 1000.0);
        CHECK(windows[i].duration ==
              doctest::Approx(std::ldexp(kSecondsPerDay, static_cast<int>(i))));
    }
}

TEST_CASE("configuration bounds are enforced") {
    ExportConfig cfg;
    validate(cfg); // defaults are fine

    ExportConfig bad = cfg;
    bad.initial_window_s = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.similarity_threshold = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.similarity_threshold = 1.0001;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.growth_threshold = -0.1;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("a stationary device converges on the two-day window") {
    std::vector<FlowRecord> flows;
    for (int day = 0; day < 4; ++day) {
        add_day(flows, "dev", day * kSecondsPerDay, {Protocol::TCP, 443}, 10);
        add_day(flows, "dev", day * kSecondsPerDay, {Protocol::UDP, 53}, 5);
    }
    std::sort(flows.begin(), flows.end(),
              [](const FlowRecord& a, const FlowRecord& b) {
                  return a.timestamp < b.timestamp;
              });

    ExportConfig cfg;
    auto outcome = export_fingerprint(flows, "dev", cfg);
    REQUIRE(std::holds_alternative<Fingerprint>(outcome));
    const auto& fp = std::get<Fingerprint>(outcome);
    CHECK(fp.device_id == "dev");
    CHECK(fp.converged_window().start == 0.0);
    CHECK(fp.converged_window().duration == doctest::Approx(2.0 * kSecondsPerDay));
    CHECK(fp.inferred_period_s() == doctest::Approx(kSecondsPerDay));
    CHECK(fp.variant_index == 0);
    CHECK(fp.vector.flow_count == 30);
}

TEST_CASE("no flows at all reports an exhausted search") {
    std::vector<FlowRecord> none;
    ExportConfig cfg;
    auto outcome = export_fingerprint(none, "dev", cfg);
    REQUIRE(std::holds_alternative<DidNotConverge>(outcome));
    const auto& f = std::get<DidNotConverge>(outcome);
    CHECK(f.iterations_run == cfg.max_iterations);
    CHECK_FALSE(f.last_similarity.has_value());
}

TEST_CASE("windows without enough growth are skipped entirely") {
    // All activity in day one. Later windows never grow, so the similarity
    // is never even computed.
    std::vector<FlowRecord> flows;
    add_day(flows, "dev", 0.0, {Protocol::TCP, 443}, 10);

    auto outcome = export_fingerprint(flows, "dev", ExportConfig{});
    REQUIRE(std::holds_alternative<DidNotConverge>(outcome));
    const auto& f = std::get<DidNotConverge>(outcome);
    CHECK(f.iterations_run == 6);
    CHECK_FALSE(f.last_similarity.has_value());
}

TEST_CASE("the growth gate is strict") {
    // 10 flows in day one. Day two adds exactly 5: growth equals the
    // threshold and must not trigger a recompute. One more flow does.
    std::vector<FlowRecord> at_gate, past_gate;
    add_day(at_gate, "dev", 0.0, {Protocol::TCP, 443}, 10);
    add_day(at_gate, "dev", kSecondsPerDay, {Protocol::TCP, 443}, 5);
    add_day(past_gate, "dev", 0.0, {Protocol::TCP, 443}, 10);
    add_day(past_gate, "dev", kSecondsPerDay, {Protocol::TCP, 443}, 6);

    auto stalled = export_fingerprint(at_gate, "dev", ExportConfig{});
    REQUIRE(std::holds_alternative<DidNotConverge>(stalled));
    CHECK_FALSE(std::get<DidNotConverge>(stalled).last_similarity.has_value());

    auto moved = export_fingerprint(past_gate, "dev", ExportConfig{});
    // A single-service device is perfectly self-similar once compared.
    REQUIRE(std::holds_alternative<Fingerprint>(moved));
    CHECK(std::get<Fingerprint>(moved).converged_window().duration ==
          doctest::Approx(2.0 * kSecondsPerDay));
}

TEST_CASE("the similarity threshold is strict") {
    // A single-service device always compares at exactly 1.0, which does not
    // clear a threshold of 1.0.
    std::vector<FlowRecord> flows;
    for (int day = 0; day < 64; ++day) {
        add_day(flows, "dev", day * kSecondsPerDay, {Protocol::TCP, 443}, 10);
    }
    ExportConfig cfg;
    cfg.similarity_threshold = 1.0;
    auto outcome = export_fingerprint(flows, "dev", cfg);
    REQUIRE(std::holds_alternative<DidNotConverge>(outcome));
    const auto& f = std::get<DidNotConverge>(outcome);
    CHECK(f.iterations_run == 6);
    REQUIRE(f.last_similarity.has_value());
    CHECK(*f.last_similarity == doctest::Approx(1.0).epsilon(1e-12));

    cfg.similarity_threshold = 0.999;
    CHECK(std::holds_alternative<Fingerprint>(
        export_fingerprint(flows, "dev", cfg)));
}

TEST_CASE("randomized traces match a step-by-step replay of the search") {
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> burst(0, 12);

    for (int trial = 0; trial < 60; ++trial) {
        // A trace whose daily pattern drifts at a random per-day rate.
        std::vector<FlowRecord> flows;
        const ServiceKey services[] = {
            {Protocol::TCP, 443}, {Protocol::UDP, 53}, {Protocol::TCP, 8009}};
        for (int day = 0; day < 70; ++day) {
            for (const ServiceKey& svc : services) {
                if (uni(rng) < 0.8) {
                    add_day(flows, "dev", day * kSecondsPerDay, svc, burst(rng));
                }
            }
        }
        std::sort(flows.begin(), flows.end(),
                  [](const FlowRecord& a, const FlowRecord& b) {
                      return a.timestamp < b.timestamp;
                  });

        ExportConfig cfg;
        cfg.similarity_threshold = 0.5 + 0.49 * uni(rng);
        cfg.growth_threshold = uni(rng);
        int pick = static_cast<int>(uni(rng) * 3.0);
        cfg.g = pick == 0   ? Granularity::finite(1)
                : pick == 1 ? Granularity::finite(64)
                            : Granularity::infinite();

        // Replay the search with independently written control flow.
        std::optional<ServiceVector> r_ref;
        std::int64_t n_ref = 0;
        std::optional<ServiceVector> expected_export;
        for (int i = 0; i <= cfg.max_iterations && !expected_export; ++i) {
            TimeWindow w{cfg.anchor_time,
                         cfg.initial_window_s * std::ldexp(1.0, i)};
            auto in_window = slice_window(flows, w);
            auto n = static_cast<std::int64_t>(in_window.size());
            if (static_cast<double>(n - n_ref) <=
                cfg.growth_threshold * static_cast<double>(n_ref)) {
                continue;
            }
            ServiceVector r = repr_g(in_window, w, cfg.g);
            if (r_ref && l1_norm(*r_ref) > 0.0 &&
                cosine_similarity(*r_ref, r) > cfg.similarity_threshold) {
                expected_export = r;
                break;
            }
            r_ref = std::move(r);
            n_ref = n;
        }

        auto outcome = export_fingerprint(flows, "dev", cfg);
        if (expected_export) {
            REQUIRE(std::holds_alternative<Fingerprint>(outcome));
            const auto& fp = std::get<Fingerprint>(outcome);
            CHECK(fp.vector.window == expected_export->window);
            CHECK(fp.vector.entries == expected_export->entries);
        } else {
            REQUIRE(std::holds_alternative<DidNotConverge>(outcome));
            CHECK(std::get<DidNotConverge>(outcome).iterations_run ==
                  cfg.max_iterations);
        }
    }
}

TEST_CASE("export over a device map splits converged and failed") {
    DeviceFlows devices;
    for (int day = 0; day < 4; ++day) {
        add_day(devices["steady"], "steady", day * kSecondsPerDay,
                {Protocol::TCP, 443}, 20);
    }
    add_day(devices["one_day"], "one_day", 0.0, {Protocol::UDP, 53}, 8);
    devices["silent"] = {};

    auto run = export_all(devices, ExportConfig{});
    REQUIRE(run.fingerprints.size() == 1);
    CHECK(run.fingerprints[0].device_id == "steady");
    CHECK(run.failures.count("one_day") == 1);
    CHECK(run.failures.count("silent") == 1);
    CHECK(run.failures.at("silent").iterations_run == 6);
}
