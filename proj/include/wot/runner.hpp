#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/density.hpp"
#include "wot/oracles.hpp"
#include "wot/quadrature.hpp"

namespace wot {

inline constexpr const char* kToolName = "wiener-ot";
std::string tool_version();

enum class JobKind { Solve, VerifyMa, VerifyDual, VerifyBound, Cascade, Inequalities, OracleCompare };

std::string_view to_string(JobKind kind);
JobKind job_kind_from_string(std::string_view name);

struct JobSpec {
  std::string name;
  JobKind kind = JobKind::Solve;
  nlohmann::json params = nlohmann::json::object();
};

struct ExperimentConfig {
  nlohmann::json raw;
  std::string source_text;
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "wiener-ot-out";
  std::map<std::string, PotentialDensity> densities;
  std::map<std::string, GridSpec> grids;
  std::vector<JobSpec> jobs;
};

// Throws Error(ConfigInvalid) on any schema or reference problem.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  int jobs = 1;
  bool compare_only = false;
};

struct FileRecord {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct JobOutcome {
  std::string name;
  std::string kind;
  std::string status;  // "pass", "fail", "error"
  std::string error;
  std::string started_at;
  double wall_time_s = 0.0;
  std::vector<FileRecord> files;
  nlohmann::json resolved = nlohmann::json::object();
  nlohmann::json summary = nlohmann::json::object();
};

struct RunOutcome {
  int exit_code = 0;
  std::filesystem::path out_dir;
  std::vector<JobOutcome> jobs;
};

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// One-page text summary of a finished run; throws Error(ManifestMissing).
std::string report_run(const std::filesystem::path& run_dir);

struct CompareRow {
  std::string method;
  bool applicable = false;
  double cost = 0.0;
  double phi_gap = 0.0;  // against the first applicable method
  double runtime_s = 0.0;
  std::string note;
};

// Methods: gaussian, quantile (alias 1d), separable, entropic. `grid` must be a
// truncated-uniform mesh when entropic is requested. Throws NoApplicableMethod
// when fewer than two methods apply.
std::vector<CompareRow> oracle_compare(const PotentialDensity& rho, const PotentialDensity& nu,
                                       const std::vector<std::string>& methods, const GridPtr& grid);

std::string sha256_hex(std::string_view bytes);

}  // namespace wot
