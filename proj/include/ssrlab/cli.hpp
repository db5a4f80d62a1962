#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ssrlab::cli {

enum class Command { Estimate, Limit, SweepEps, SweepT, Selftest };

struct RunManifest {
    Command command = Command::Estimate;
    std::string config_path;
    std::uint64_t seed = 1;
    std::uint64_t n_paths = 100000;
    int n_steps = 256;
    bool antithetic = false;
    std::optional<int> workers;  // empty: SSRLAB_WORKERS, else logical cores
    std::string output_path;
    std::string format = "csv";
    double fd_step = 0.01;
    double tol = 1e-8;
    std::vector<double> sweep_values;
    std::string inject_failure;  // selftest debug hook
    std::string dump_paths_path;
};

using Value = std::variant<double, std::int64_t, std::uint64_t, std::string>;

struct Record {
    std::vector<std::pair<std::string, Value>> fields;

    void add(std::string name, Value v) { fields.emplace_back(std::move(name), std::move(v)); }
};

/// 17-significant-digit formatting, round-trip exact for doubles.
[[nodiscard]] std::string format_value(const Value& v);

[[nodiscard]] std::string to_csv(const std::vector<Record>& records);
[[nodiscard]] std::string to_json(const std::vector<Record>& records);

/// Write via a temp file + atomic rename; no partial file on error.
void write_atomic(const std::string& path, const std::string& content);

/// Validate manifest invariants (path counts, step bounds, format).
void validate_manifest(const RunManifest& manifest);

[[nodiscard]] std::vector<Record> run_estimate(const RunManifest& manifest);
[[nodiscard]] std::vector<Record> run_limit(const RunManifest& manifest);
[[nodiscard]] std::vector<Record> run_sweep_eps(const RunManifest& manifest);
[[nodiscard]] std::vector<Record> run_sweep_t(const RunManifest& manifest);

/// Reduced-scale invariant suites of every primary module; prints one line
/// per suite with timing to `out`. Returns true when all pass.
bool run_selftest(const RunManifest& manifest, std::string& out);

/// Full command-line entry point; returns the process exit code.
int main_entry(int argc, const char* const* argv);

}  // namespace ssrlab::cli
