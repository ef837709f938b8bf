#pragma once

#include <cstdint>
#include <random>

namespace hopac {

/// Reproducible random stream addressed by (seed, stream id).
///
/// Streams with different ids are seeded through splitmix64 so rows, cells
/// or days can be generated independently of evaluation order.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// A child stream; deterministic in (seed, stream id, child id).
    [[nodiscard]] RngStream substream(std::uint64_t child_id) const;

    /// Uniform on the open interval (0, 1).
    double uniform();
    double exponential();
    double normal();
    double gamma(double shape);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hopac
