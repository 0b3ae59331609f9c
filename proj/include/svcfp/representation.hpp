// representation.hpp - SL / SP / Generalized service-usage vectors
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "svcfp/flow.hpp"

namespace svcfp {

// Number of equal sub-windows used by the Generalized representation.
// Finite values are >= 1; the infinite level degenerates to exact per-flow
// counting (the SP representation).
class Granularity {
public:
    static Granularity finite(std::uint32_t g); // throws std::invalid_argument if g == 0
    static Granularity infinite() { return Granularity(0); }

    bool is_infinite() const { return g_ == 0; }
    std::uint32_t value() const; // finite levels only; throws std::logic_error

    std::string to_string() const;                           // "1024" or "inf"
    static std::optional<Granularity> parse(std::string_view s);

    friend bool operator==(const Granularity&, const Granularity&) = default;

private:
    explicit Granularity(std::uint32_t g) : g_(g) {}
    std::uint32_t g_ = 0; // 0 encodes the infinite level
};

enum class ReprKind : std::uint8_t { SL, SP, G };

std::string_view to_string(ReprKind k);

// Sparse non-negative vector over the service index space. Absent indices
// are zero. SL entries are 0/1, SP entries are flow counts, G entries count
// occupied sub-windows (bounded by g).
struct ServiceVector {
    std::map<std::uint32_t, double> entries;
    ReprKind kind = ReprKind::SL;
    Granularity g = Granularity::finite(1); // meaningful when kind == G
    TimeWindow window;
    std::int64_t flow_count = 0; // n(W)
};

// Service List: entry i is 1 iff some observation maps to index i.
ServiceVector repr_sl(std::span<const ServiceObs> obs,
                      const TimeWindow& window = {});

// Service Prevalence: entry i counts the observations mapping to index i.
ServiceVector repr_sp(std::span<const ServiceObs> obs,
                      const TimeWindow& window = {});

// Generalized representation: the window is split into g consecutive
// equal-length sub-windows (half-open; the last one also includes the
// window's end instant) and entry i counts the sub-windows in which service
// i appears at least once. Observations outside the window are ignored.
// The infinite level computes per-flow counts directly.
ServiceVector repr_g(std::span<const ServiceObs> obs, const TimeWindow& window,
                     Granularity g);

// Cosine of the angle between two sparse vectors; 0 if either is all-zero.
// Non-negative entries keep the result within [0, 1].
double cosine_similarity(const ServiceVector& a, const ServiceVector& b);

double l1_norm(const ServiceVector& a);

} // namespace svcfp
