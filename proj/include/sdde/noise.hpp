#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/linalg.hpp"

namespace sdde {

/// splitmix64 step; also the documented seed mix. Per-path generator state
/// is derived as splitmix64 iterates of master_seed ^ splitmix64(path_index),
/// so paths can run in any order on any number of workers with identical
/// results.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t path_index);

/// Independent substream domain for auxiliary draws (reference validation,
/// pilot sweeps) so they never perturb the main path streams.
std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t tag);

/// Per-path Gaussian stream: xoshiro256++ underneath, Box-Muller on top.
/// The generator is pinned here rather than taken from <random> so replays
/// are bit-identical across standard libraries.
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t path_index, int noise_dim);

    int noise_dim() const { return d_; }

    double next_normal();
    double next_uniform01(); // (0, 1]

    /// Draw from N(0, dt * I_d). dt = 0 yields the zero vector; the stream
    /// state advances either way.
    void gaussian_increment_into(double dt, std::span<double> out);

private:
    std::uint64_t next_u64();
    std::uint64_t s_[4];
    int d_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

State gaussian_increment(NoiseStream& stream, double dt);

/// One Wiener path stored on a uniform grid, refinable between grid points
/// by Brownian-bridge conditioning. Queries at new times are inserted into a
/// cache so later queries condition on everything already revealed; repeated
/// queries at the same time return the cached value bitwise.
class FinePath {
public:
    /// Builds W on {0, dt_ref, ..., M*dt_ref} with M*dt_ref >= horizon,
    /// drawing grid increments from `stream`.
    FinePath(NoiseStream& stream, double dt_ref, double horizon);

    double dt_ref() const { return dt_ref_; }
    double horizon() const { return horizon_; }
    std::size_t grid_cells() const { return cells_; }

    /// W at grid index j (no sampling).
    std::span<const double> grid_value(std::size_t j) const;

    /// W_s; samples and caches when s is new. DomainError outside [0, T].
    void sample_into(NoiseStream& stream, double s, std::span<double> out);

    /// W_b - W_a. DomainError unless 0 <= a <= b <= T.
    void increment_into(NoiseStream& stream, double a, double b, std::span<double> out);

    /// The bracketing known times a query at s would condition on right now.
    /// Exposed so conditioning order is testable without touching the RNG.
    std::pair<double, double> bracket_for(double s) const;

private:
    const double* known_value(double t) const; // nullptr when t is unknown
    double dt_ref_;
    double horizon_;
    std::size_t cells_;
    int d_;
    std::vector<double> grid_; // (cells_+1) * d
    std::map<double, std::vector<double>> interior_;
};

State bridge_sample(FinePath& path, NoiseStream& stream, double s);
State increment_between(FinePath& path, NoiseStream& stream, double a, double b);

/// Common face of forward streaming noise and bridge-coupled noise: Wiener
/// increments over [a, b].
class WienerSource {
public:
    virtual ~WienerSource() = default;
    virtual int dim() const = 0;
    virtual void increment_into(double a, double b, std::span<double> out) = 0;
};

/// Fresh forward increments; queries must be contiguous and nondecreasing.
/// Used by the long-horizon experiments where no reference coupling exists.
class ForwardWiener : public WienerSource {
public:
    explicit ForwardWiener(NoiseStream stream) : stream_(std::move(stream)) {}
    int dim() const override { return stream_.noise_dim(); }
    void increment_into(double a, double b, std::span<double> out) override;

private:
    NoiseStream stream_;
    double cursor_ = 0.0;
};

/// Increments read off a stored fine path via the bridge, so an adaptive
/// solution and a fixed-grid reference share one driving path.
class BridgedWiener : public WienerSource {
public:
    BridgedWiener(FinePath& path, NoiseStream& stream) : path_(&path), stream_(&stream) {}
    int dim() const override { return stream_->noise_dim(); }
    void increment_into(double a, double b, std::span<double> out) override {
        path_->increment_into(*stream_, a, b, out);
    }
    FinePath& path() { return *path_; }
    NoiseStream& stream() { return *stream_; }

private:
    FinePath* path_;
    NoiseStream* stream_;
};

} // namespace sdde
