#include "sdde/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdde {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t path_index) {
    std::uint64_t s = path_index;
    const std::uint64_t mixed_index = splitmix64(s);
    std::uint64_t t = master_seed ^ mixed_index;
    return splitmix64(t);
}

std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t tag) {
    std::uint64_t s = ~tag;
    const std::uint64_t mixed = splitmix64(s);
    std::uint64_t t = master_seed + 0xA5A5A5A5A5A5A5A5ULL;
    return splitmix64(t) ^ mixed;
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
} // namespace

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t path_index, int noise_dim)
    : d_(noise_dim) {
    if (d_ < 1)
        throw DomainError("noise dimension must be positive");
    std::uint64_t seed = derive_stream_seed(master_seed, path_index);
    for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t NoiseStream::next_u64() {
    // xoshiro256++
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double NoiseStream::next_uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double NoiseStream::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_uniform01();
    const double u2 = next_uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

void NoiseStream::gaussian_increment_into(double dt, std::span<double> out) {
    if (dt < 0.0)
        throw DomainError("increment duration must be nonnegative");
    const double scale = std::sqrt(dt);
    for (int k = 0; k < d_; ++k) out[static_cast<std::size_t>(k)] = scale * next_normal();
}

State gaussian_increment(NoiseStream& stream, double dt) {
    State out(static_cast<std::size_t>(stream.noise_dim()));
    stream.gaussian_increment_into(dt, out);
    return out;
}

FinePath::FinePath(NoiseStream& stream, double dt_ref, double horizon)
    : dt_ref_(dt_ref), horizon_(horizon), d_(stream.noise_dim()) {
    if (!(dt_ref > 0.0) || !(horizon > 0.0))
        throw DomainError("fine path requires positive spacing and horizon");
    cells_ = static_cast<std::size_t>(std::ceil(horizon / dt_ref - 1e-12));
    if (cells_ < 1) cells_ = 1;
    horizon_ = static_cast<double>(cells_) * dt_ref_;
    grid_.assign((cells_ + 1) * static_cast<std::size_t>(d_), 0.0);
    std::vector<double> dw(static_cast<std::size_t>(d_));
    for (std::size_t j = 1; j <= cells_; ++j) {
        stream.gaussian_increment_into(dt_ref_, dw);
        for (int k = 0; k < d_; ++k)
            grid_[j * static_cast<std::size_t>(d_) + static_cast<std::size_t>(k)] =
                grid_[(j - 1) * static_cast<std::size_t>(d_) + static_cast<std::size_t>(k)] +
                dw[static_cast<std::size_t>(k)];
    }
}

std::span<const double> FinePath::grid_value(std::size_t j) const {
    return {grid_.data() + j * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)};
}

const double* FinePath::known_value(double t) const {
    const double jr = t / dt_ref_;
    const auto j = static_cast<std::size_t>(std::llround(jr));
    if (j <= cells_ && static_cast<double>(j) * dt_ref_ == t)
        return grid_.data() + j * static_cast<std::size_t>(d_);
    auto it = interior_.find(t);
    if (it != interior_.end()) return it->second.data();
    return nullptr;
}

std::pair<double, double> FinePath::bracket_for(double s) const {
    const auto cell = std::min(static_cast<std::size_t>(s / dt_ref_), cells_ - 1);
    double a = static_cast<double>(cell) * dt_ref_;
    double b = static_cast<double>(cell + 1) * dt_ref_;
    auto hi = interior_.lower_bound(s);
    if (hi != interior_.end() && hi->first < b) b = hi->first;
    if (hi != interior_.begin()) {
        auto lo = std::prev(hi);
        if (lo->first > a) a = lo->first;
    }
    return {a, b};
}

void FinePath::sample_into(NoiseStream& stream, double s, std::span<double> out) {
    if (s < 0.0 || s > horizon_)
        throw DomainError("bridge query outside [0, T]");
    if (const double* known = known_value(s)) {
        std::copy(known, known + d_, out.begin());
        return;
    }
    const auto [a, b] = bracket_for(s);
    const double* wa = known_value(a);
    const double* wb = known_value(b);
    const double frac = (s - a) / (b - a);
    const double var = (s - a) * (b - s) / (b - a);
    const double sd = std::sqrt(var);
    std::vector<double> value(static_cast<std::size_t>(d_));
    for (int k = 0; k < d_; ++k)
        value[static_cast<std::size_t>(k)] =
            wa[k] + frac * (wb[k] - wa[k]) + sd * stream.next_normal();
    std::copy(value.begin(), value.end(), out.begin());
    interior_.emplace(s, std::move(value));
}

void FinePath::increment_into(NoiseStream& stream, double a, double b, std::span<double> out) {
    if (a > b)
        throw DomainError("increment endpoints out of order");
    if (a == b) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::vector<double> wa(static_cast<std::size_t>(d_));
    sample_into(stream, a, wa);
    sample_into(stream, b, out);
    for (int k = 0; k < d_; ++k) out[static_cast<std::size_t>(k)] -= wa[static_cast<std::size_t>(k)];
}

State bridge_sample(FinePath& path, NoiseStream& stream, double s) {
    State out(static_cast<std::size_t>(stream.noise_dim()));
    path.sample_into(stream, s, out);
    return out;
}

State increment_between(FinePath& path, NoiseStream& stream, double a, double b) {
    State out(static_cast<std::size_t>(stream.noise_dim()));
    path.increment_into(stream, a, b, out);
    return out;
}

void ForwardWiener::increment_into(double a, double b, std::span<double> out) {
    if (a != cursor_)
        throw DomainError("forward noise requires contiguous increment queries");
    if (b < a)
        throw DomainError("increment endpoints out of order");
    stream_.gaussian_increment_into(b - a, out);
    cursor_ = b;
}

} // namespace sdde
