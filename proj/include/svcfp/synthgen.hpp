// synthgen.hpp - deterministic synthetic flow traces for known device profiles
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "svcfp/flow.hpp"

namespace svcfp {

// All randomness is derived per (seed, device, day, stream, salt), so traces
// are stable across platforms and adding a device never perturbs the others.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next();
    double next_unit(); // [0, 1)
};

std::uint64_t stream_seed(std::uint64_t seed, std::string_view device_id,
                          int day, std::string_view stream, std::uint32_t salt);

// Exponential-interarrival summation; exact distribution, no platform drift.
int poisson_draw(SplitMix64& rng, double mean);

struct ServiceRate {
    ServiceKey service;
    double per_day = 0.0;
};

// Active on a given day with probability active_prob, independently per day.
struct IntermittentService {
    ServiceKey service;
    double per_day = 0.0;
    double active_prob = 0.0;
};

// Flows to uniformly drawn ports in [port_lo, port_hi], fresh ports each day.
struct SporadicPool {
    Protocol protocol = Protocol::UDP;
    std::uint16_t port_lo = 0;
    std::uint16_t port_hi = 0;
    double per_day = 0.0;
};

// Multiplies one service's rate on days in [start_day, end_day).
struct Surge {
    ServiceKey service;
    int start_day = 0;
    int end_day = 0;
    double multiplier = 1.0;
};

// A device's service mix from start_day until the next epoch begins.
struct ProfileEpoch {
    int start_day = 0;
    std::vector<ServiceRate> services;
    std::vector<IntermittentService> intermittent;
    std::vector<SporadicPool> sporadic;
};

struct DeviceProfile {
    std::string device_id;
    std::vector<ProfileEpoch> epochs; // ordered, first must start at day 0
    std::vector<Surge> surges;
};

struct SimSpec {
    double start_time = 0.0; // epoch seconds, day aligned
    int duration_days = 0;
    std::uint64_t seed = 7;
    std::vector<DeviceProfile> profiles;
};

// Per-device flows sorted by (timestamp, service, conn_key).
DeviceFlows generate_trace(const SimSpec& spec);

// Closed13: the enrollment fleet. Open22: devices outside the pool, starting
// at the evaluation year; includes look-alikes of two enrolled devices.
enum class FleetKind { Closed13, Open22 };

SimSpec builtin_fleet(FleetKind kind, std::uint64_t seed = 7);

// Fleet timeline constants shared by tools and tests.
inline constexpr double kFleetStart = 1559347200.0;        // 2019-06-01T00:00:00Z
inline constexpr int kFleetTrainingDays = 214;             // training ends 2020-01-01
inline constexpr int kFleetTestDays = 366;                 // calendar year 2020
inline constexpr double kFleetTrainingEnd =
    kFleetStart + kFleetTrainingDays * kSecondsPerDay;

} // namespace svcfp
