// representation.cpp - service-usage vectors and cosine similarity
#include "svcfp/representation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace svcfp {

Granularity Granularity::finite(std::uint32_t g) {
    if (g == 0) throw std::invalid_argument("granularity must be >= 1");
    return Granularity(g);
}

std::uint32_t Granularity::value() const {
    if (is_infinite()) throw std::logic_error("infinite granularity has no value");
    return g_;
}

std::string Granularity::to_string() const {
    return is_infinite() ? "inf" : std::to_string(g_);
}

std::optional<Granularity> Granularity::parse(std::string_view s) {
    if (s == "inf") return infinite();
    std::uint32_t g = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), g);
    if (ec != std::errc{} || ptr != s.data() + s.size() || g == 0) {
        return std::nullopt;
    }
    return finite(g);
}

std::string_view to_string(ReprKind k) {
    switch (k) {
        case ReprKind::SL: return "SL";
        case ReprKind::SP: return "SP";
        case ReprKind::G: return "G";
    }
    return "G";
}

ServiceVector repr_sl(std::span<const ServiceObs> obs, const TimeWindow& window) {
    ServiceVector v;
    v.kind = ReprKind::SL;
    v.g = Granularity::finite(1);
    v.window = window;
    v.flow_count = static_cast<std::int64_t>(obs.size());
    for (const ServiceObs& o : obs) v.entries[service_index(o.service)] = 1.0;
    return v;
}

ServiceVector repr_sp(std::span<const ServiceObs> obs, const TimeWindow& window) {
    ServiceVector v;
    v.kind = ReprKind::SP;
    v.g = Granularity::infinite();
    v.window = window;
    v.flow_count = static_cast<std::int64_t>(obs.size());
    for (const ServiceObs& o : obs) v.entries[service_index(o.service)] += 1.0;
    return v;
}

ServiceVector repr_g(std::span<const ServiceObs> obs, const TimeWindow& window,
                     Granularity g) {
    if (!(window.duration > 0.0)) {
        throw std::invalid_argument("representation window must have positive duration");
    }
    ServiceVector v;
    v.kind = ReprKind::G;
    v.g = g;
    v.window = window;

    if (g.is_infinite()) {
        for (const ServiceObs& o : obs) {
            if (!window.contains(o.timestamp) && o.timestamp != window.end()) continue;
            v.entries[service_index(o.service)] += 1.0;
            ++v.flow_count;
        }
        return v;
    }

    double gv = static_cast<double>(g.value());
    std::uint64_t top = g.value() - 1;
    // (service, sub-window) pairs, then distinct pairs per service.
    std::vector<std::uint64_t> hits;
    hits.reserve(obs.size());
    for (const ServiceObs& o : obs) {
        if (!window.contains(o.timestamp) && o.timestamp != window.end()) continue;
        auto sub = static_cast<std::uint64_t>(
            (o.timestamp - window.start) * gv / window.duration);
        sub = std::min(sub, top); // the end instant folds into the last sub-window
        hits.push_back(static_cast<std::uint64_t>(service_index(o.service)) << 32 | sub);
        ++v.flow_count;
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    for (std::uint64_t h : hits) {
        v.entries[static_cast<std::uint32_t>(h >> 32)] += 1.0;
    }
    return v;
}

double cosine_similarity(const ServiceVector& a, const ServiceVector& b) {
    double dot = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    double sq_a = 0.0, sq_b = 0.0;
    for (const auto& [idx, val] : a.entries) sq_a += val * val;
    for (const auto& [idx, val] : b.entries) sq_b += val * val;
    if (sq_a == 0.0 || sq_b == 0.0) return 0.0;
    double cos = dot / (std::sqrt(sq_a) * std::sqrt(sq_b));
    return std::clamp(cos, 0.0, 1.0);
}

double l1_norm(const ServiceVector& a) {
    double sum = 0.0;
    for (const auto& [idx, val] : a.entries) sum += val;
    return sum;
}

} // namespace svcfp
