// synthgen.cpp - reproducible flow traces from device service profiles
#include "svcfp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace svcfp {

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double SplitMix64::next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

void fnv_sep(std::uint64_t& h) {
    unsigned char sep = 0xFF;
    fnv_bytes(h, &sep, 1);
}

} // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::string_view device_id,
                          int day, std::string_view stream, std::uint32_t salt) {
    std::uint64_t h = kFnvOffset;
    fnv_bytes(h, &seed, sizeof seed);
    fnv_sep(h);
    fnv_bytes(h, device_id.data(), device_id.size());
    fnv_sep(h);
    std::uint32_t d = static_cast<std::uint32_t>(day);
    fnv_bytes(h, &d, sizeof d);
    fnv_sep(h);
    fnv_bytes(h, stream.data(), stream.size());
    fnv_sep(h);
    fnv_bytes(h, &salt, sizeof salt);
    return h;
}

int poisson_draw(SplitMix64& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    // Count exponential inter-arrivals until the budget is spent. Stable for
    // large means where the classic uniform-product method underflows.
    int count = 0;
    double acc = 0.0;
    while (true) {
        double u = rng.next_unit();
        acc += -std::log1p(-u);
        if (acc > mean) break;
        ++count;
    }
    return count;
}

namespace {

std::string make_conn_key(SplitMix64& rng) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "c%016llx",
                  static_cast<unsigned long long>(rng.next()));
    return buf;
}

void emit_service_day(std::vector<FlowRecord>& out, const std::string& device_id,
                      std::uint64_t seed, int day, std::int64_t day_start,
                      ServiceKey service, double rate, std::string_view stream) {
    SplitMix64 rng{stream_seed(seed, device_id, day, stream, service_index(service))};
    int count = poisson_draw(rng, rate);
    for (int k = 0; k < count; ++k) {
        FlowRecord rec;
        rec.device_id = device_id;
        rec.timestamp = day_start + static_cast<std::int64_t>(rng.next() % 86400ull);
        rec.service = service;
        rec.conn_key = make_conn_key(rng);
        out.push_back(std::move(rec));
    }
}

double surge_multiplier(const DeviceProfile& profile, ServiceKey service, int day) {
    double mult = 1.0;
    for (const Surge& s : profile.surges) {
        if (s.service == service && day >= s.start_day && day < s.end_day) {
            mult *= s.multiplier;
        }
    }
    return mult;
}

const ProfileEpoch& epoch_for_day(const DeviceProfile& profile, int day) {
    const ProfileEpoch* current = &profile.epochs.front();
    for (const ProfileEpoch& e : profile.epochs) {
        if (e.start_day <= day) current = &e;
    }
    return *current;
}

} // namespace

namespace {

void validate_profile(const DeviceProfile& profile) {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("profile '" + profile.device_id + "': " + what);
    };
    if (profile.device_id.empty()) {
        throw std::invalid_argument("profile field device_id must not be empty");
    }
    if (profile.epochs.empty() || profile.epochs.front().start_day != 0) {
        fail("field epochs must begin with start_day 0");
    }
    int prev_start = -1;
    for (const ProfileEpoch& e : profile.epochs) {
        if (e.start_day <= prev_start) fail("field epochs.start_day must increase");
        prev_start = e.start_day;
        for (const ServiceRate& s : e.services) {
            if (!(s.per_day >= 0.0)) fail("field services.per_day must be >= 0");
        }
        for (const IntermittentService& s : e.intermittent) {
            if (!(s.per_day >= 0.0)) fail("field intermittent.per_day must be >= 0");
            if (!(s.active_prob >= 0.0 && s.active_prob <= 1.0)) {
                fail("field intermittent.active_prob must be in [0, 1]");
            }
        }
        for (const SporadicPool& pool : e.sporadic) {
            if (pool.port_lo > pool.port_hi) {
                fail("field sporadic.port range must satisfy lo <= hi");
            }
            if (!(pool.per_day >= 0.0)) fail("field sporadic.per_day must be >= 0");
        }
    }
    for (const Surge& s : profile.surges) {
        if (s.end_day < s.start_day) fail("field surges must have start_day <= end_day");
        if (!(s.multiplier >= 0.0)) fail("field surges.multiplier must be >= 0");
    }
}

} // namespace

DeviceFlows generate_trace(const SimSpec& spec) {
    if (spec.duration_days < 1) {
        throw std::invalid_argument("field duration_days must be >= 1");
    }
    DeviceFlows out;
    for (const DeviceProfile& profile : spec.profiles) {
        validate_profile(profile);
        if (out.count(profile.device_id) != 0) {
            throw std::invalid_argument("duplicate field device_id: " +
                                        profile.device_id);
        }
        std::vector<FlowRecord> flows;
        for (int day = 0; day < spec.duration_days; ++day) {
            const ProfileEpoch& epoch = epoch_for_day(profile, day);
            auto day_start = static_cast<std::int64_t>(spec.start_time) +
                             static_cast<std::int64_t>(day) * 86400;

            for (const ServiceRate& s : epoch.services) {
                double rate = s.per_day * surge_multiplier(profile, s.service, day);
                emit_service_day(flows, profile.device_id, spec.seed, day,
                                 day_start, s.service, rate, "svc");
            }
            for (const IntermittentService& s : epoch.intermittent) {
                SplitMix64 act{stream_seed(spec.seed, profile.device_id, day, "act",
                                           service_index(s.service))};
                if (act.next_unit() >= s.active_prob) continue;
                double rate = s.per_day * surge_multiplier(profile, s.service, day);
                emit_service_day(flows, profile.device_id, spec.seed, day,
                                 day_start, s.service, rate, "ivc");
            }
            for (const SporadicPool& pool : epoch.sporadic) {
                SplitMix64 rng{stream_seed(spec.seed, profile.device_id, day, "spor",
                                           pool.port_lo)};
                int count = poisson_draw(rng, pool.per_day);
                std::uint32_t span = pool.port_hi - pool.port_lo + 1u;
                for (int k = 0; k < count; ++k) {
                    FlowRecord rec;
                    rec.device_id = profile.device_id;
                    rec.service = ServiceKey{
                        pool.protocol,
                        static_cast<std::uint16_t>(pool.port_lo + rng.next() % span)};
                    rec.timestamp =
                        day_start + static_cast<std::int64_t>(rng.next() % 86400ull);
                    rec.conn_key = make_conn_key(rng);
                    flows.push_back(std::move(rec));
                }
            }
        }
        std::sort(flows.begin(), flows.end(),
                  [](const FlowRecord& a, const FlowRecord& b) {
                      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                      if (a.service != b.service) return a.service < b.service;
                      return a.conn_key < b.conn_key;
                  });
        out.emplace(profile.device_id, std::move(flows));
    }
    return out;
}

namespace {

ServiceKey tcp(std::uint16_t port) { return ServiceKey{Protocol::TCP, port}; }
ServiceKey udp(std::uint16_t port) { return ServiceKey{Protocol::UDP, port}; }

DeviceProfile steady(std::string id, std::vector<ServiceRate> services) {
    DeviceProfile p;
    p.device_id = std::move(id);
    p.epochs.push_back(ProfileEpoch{0, std::move(services), {}, {}});
    return p;
}

SimSpec closed13_fleet(std::uint64_t seed) {
    SimSpec spec;
    spec.start_time = kFleetStart;
    spec.duration_days = kFleetTrainingDays + kFleetTestDays;
    spec.seed = seed;

    spec.profiles.push_back(steady("assistant_a", {{tcp(443), 120},
                                                   {udp(53), 150},
                                                   {tcp(8009), 60},
                                                   {udp(123), 10}}));

    {
        DeviceProfile p = steady("speaker_rare", {{tcp(4070), 90},
                                                  {tcp(443), 70},
                                                  {udp(53), 40}});
        p.epochs[0].intermittent.push_back({tcp(8080), 20, 0.15});
        spec.profiles.push_back(std::move(p));
    }

    spec.profiles.push_back(steady("display_wall", {{tcp(8008), 100},
                                                    {tcp(443), 60},
                                                    {udp(53), 50}}));

    spec.profiles.push_back(steady("plug_a", {{tcp(8883), 40},
                                              {udp(53), 25},
                                              {udp(123), 15}}));

    spec.profiles.push_back(steady("bulb_cluster", {{udp(5683), 200},
                                                    {udp(53), 30}}));

    {
        // Streams media over ephemeral high ports; the port set never
        // stabilizes even though the core services do.
        DeviceProfile p = steady("camera_sporadic", {{tcp(443), 50},
                                                     {tcp(1935), 80}});
        p.epochs[0].sporadic.push_back({Protocol::UDP, 32700, 61000, 120});
        spec.profiles.push_back(std::move(p));
    }

    // Same sole service at very different volumes; only flow mass can tell
    // these two apart.
    spec.profiles.push_back(steady("nas_443", {{tcp(443), 800}}));
    spec.profiles.push_back(steady("sensor_443", {{tcp(443), 30}}));

    {
        // Firmware update halfway through the enrollment period swaps most
        // of the service mix.
        DeviceProfile p;
        p.device_id = "hub_shift";
        p.epochs.push_back(ProfileEpoch{0,
                                        {{tcp(5228), 100}, {udp(53), 60}, {tcp(443), 40}},
                                        {},
                                        {}});
        p.epochs.push_back(ProfileEpoch{146,
                                        {{tcp(5230), 110},
                                         {tcp(8443), 90},
                                         {udp(53), 60},
                                         {tcp(443), 100}},
                                        {},
                                        {}});
        spec.profiles.push_back(std::move(p));
    }

    {
        DeviceProfile p = steady("printer_idle", {{tcp(631), 80},
                                                  {tcp(443), 30},
                                                  {udp(53), 20}});
        p.epochs[0].intermittent = {{tcp(9100), 25, 0.15},
                                    {udp(5353), 30, 0.15},
                                    {tcp(515), 15, 0.15}};
        spec.profiles.push_back(std::move(p));
    }

    {
        DeviceProfile p = steady("tv_apps", {{tcp(7000), 70},
                                             {tcp(443), 45},
                                             {udp(53), 35}});
        p.epochs[0].intermittent = {{tcp(3000), 20, 0.15},
                                    {tcp(3001), 20, 0.15},
                                    {udp(1900), 25, 0.15}};
        spec.profiles.push_back(std::move(p));
    }

    {
        // Heavy talkers with occasional bulk-transfer bursts. Counting raw
        // flows misreads the bursts as a different device.
        DeviceProfile p = steady("gateway_surge", {{tcp(9001), 900},
                                                   {tcp(9002), 900}});
        p.surges = {{tcp(9001), 18, 26, 10.0},
                    {tcp(9001), 34, 42, 10.0},
                    {tcp(9001), 66, 74, 10.0},
                    {tcp(9001), 98, 106, 10.0}};
        spec.profiles.push_back(std::move(p));
    }
    {
        DeviceProfile p = steady("relay_surge", {{tcp(9101), 800},
                                                 {tcp(9102), 800}});
        p.surges = {{tcp(9102), 26, 34, 12.0},
                    {tcp(9102), 58, 66, 12.0},
                    {tcp(9102), 90, 98, 12.0},
                    {tcp(9102), 122, 130, 12.0}};
        spec.profiles.push_back(std::move(p));
    }

    return spec;
}

SimSpec open22_fleet(std::uint64_t seed) {
    SimSpec spec;
    spec.start_time = kFleetTrainingEnd; // appears only during the test year
    spec.duration_days = kFleetTestDays;
    spec.seed = seed;

    // Service supports fully disjoint from every enrolled device.
    for (int k = 0; k < 10; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "exotic_%02d", k);
        auto base = static_cast<std::uint16_t>(20000 + 100 * k);
        auto ubase = static_cast<std::uint16_t>(21000 + 100 * k);
        spec.profiles.push_back(steady(id, {{tcp(base), 60},
                                            {tcp(static_cast<std::uint16_t>(base + 1)), 35},
                                            {udp(ubase), 45}}));
    }

    // Look-alikes: same profiles as two enrolled devices, fresh randomness.
    spec.profiles.push_back(steady("mimic_assistant", {{tcp(443), 120},
                                                       {udp(53), 150},
                                                       {tcp(8009), 60},
                                                       {udp(123), 10}}));
    spec.profiles.push_back(steady("mimic_nas", {{tcp(443), 300}}));

    // Common infrastructure services plus a private dominant port.
    for (int k = 0; k < 10; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "overlap_%02d", k);
        auto own = static_cast<std::uint16_t>(22000 + 100 * k);
        spec.profiles.push_back(steady(id, {{tcp(own), 150},
                                            {tcp(443), 40},
                                            {udp(53), 30},
                                            {udp(123), 10}}));
    }

    return spec;
}

} // namespace

SimSpec builtin_fleet(FleetKind kind, std::uint64_t seed) {
    switch (kind) {
        case FleetKind::Closed13: return closed13_fleet(seed);
        case FleetKind::Open22: return open22_fleet(seed);
    }
    throw std::invalid_argument("unknown fleet kind");
}

} // namespace svcfp
