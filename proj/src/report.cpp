#include "sdde/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

namespace sdde {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return s;
}

CsvWriter::CsvWriter(const std::filesystem::path& file, std::string_view config_hash,
                     const std::vector<std::string>& columns)
    : path_(file), columns_(columns.size()) {
    buffer_ = "# config_hash=";
    buffer_ += config_hash;
    buffer_ += '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += columns[i];
    }
    buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
    if (closed_) return;
    closed_ = true;
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
}

void CsvWriter::cell(std::string_view v) {
    if (in_row_) buffer_ += ',';
    buffer_ += v;
    ++in_row_;
}

void CsvWriter::cell(double v) { cell(std::string_view(format_double(v))); }

void CsvWriter::cell(std::uint64_t v) { cell(std::string_view(std::to_string(v))); }

void CsvWriter::cell_empty() { cell(std::string_view("")); }

void CsvWriter::end_row() {
    while (in_row_ < columns_) cell_empty();
    buffer_ += '\n';
    in_row_ = 0;
}

void write_trajectory_csv(const std::filesystem::path& file, std::string_view config_hash,
                          const AdaptiveTrajectory& traj) {
    std::vector<std::string> cols{"step", "t", "h"};
    for (int k = 1; k <= traj.state_dim; ++k) cols.push_back("x_" + std::to_string(k));
    CsvWriter csv(file, config_hash, cols);
    for (std::size_t n = 0; n < traj.times.size(); ++n) {
        csv.cell(static_cast<std::uint64_t>(n));
        csv.cell(traj.times[n]);
        if (n < traj.steps.size())
            csv.cell(traj.steps[n]);
        else
            csv.cell_empty();
        auto x = traj.state_at(n);
        for (double v : x) csv.cell(v);
        csv.end_row();
    }
}

void write_fixed_trajectory_csv(const std::filesystem::path& file, std::string_view config_hash,
                                const FixedTrajectory& traj) {
    std::vector<std::string> cols{"step", "t", "h"};
    for (int k = 1; k <= traj.state_dim; ++k) cols.push_back("x_" + std::to_string(k));
    CsvWriter csv(file, config_hash, cols);
    const std::size_t nodes = traj.steps_taken + 1;
    for (std::size_t n = 0; n < nodes; ++n) {
        csv.cell(static_cast<std::uint64_t>(n));
        csv.cell(static_cast<double>(n) * traj.dt);
        if (n + 1 < nodes)
            csv.cell(traj.dt);
        else
            csv.cell_empty();
        auto x = traj.state_at(n);
        for (double v : x) csv.cell(v);
        csv.end_row();
    }
}

} // namespace sdde
