#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sdde/integrate.hpp"

namespace sdde {

/// Shortest round-trip decimal form of a double (locale-free, stable across
/// runs and worker counts, so replayed outputs compare byte for byte).
std::string format_double(double v);

/// FNV-1a over the canonical config serialization.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// CSV with a `# config_hash=...` comment line, then a header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, std::string_view config_hash,
              const std::vector<std::string>& columns);
    ~CsvWriter();

    void cell(std::string_view v);
    void cell(double v);
    void cell(std::uint64_t v);
    void cell_empty();
    void end_row();

private:
    std::string buffer_;
    std::filesystem::path path_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
    bool closed_ = false;
};

/// Trajectory dump: columns step, t, h, x_1..x_m; one row per node, the h
/// field empty on the final node.
void write_trajectory_csv(const std::filesystem::path& file, std::string_view config_hash,
                          const AdaptiveTrajectory& traj);
void write_fixed_trajectory_csv(const std::filesystem::path& file, std::string_view config_hash,
                                const FixedTrajectory& traj);

} // namespace sdde
