#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace triomix {

inline constexpr const char* kVersion = "1.0.0";

// Settings of one CLI run; every field lands in the manifest so a run can be
// reproduced from it bit for bit.
struct RunConfig {
  std::string command;  // fit | sweep | subsets | simulate | bootstrap
  std::string input_path;
  std::string input_format = "beta-csv";
  std::string output_dir = ".";
  std::size_t k = 0;
  std::size_t k_min = 2;
  std::size_t k_max = 6;
  double tol = 1e-7;
  std::size_t max_iter = 500;
  std::size_t n_restarts = 5;
  std::uint64_t seed = 0;
  bool screen = false;
  double cutoff = 0.5;
  std::size_t subset_size = 0;
  double miss_budget = 1.0;
  std::size_t forced_subsets = 0;  // 0 = derive the count from the budget
  std::string scenario;
  std::size_t replicates = 1;
  std::size_t bootstrap_reps = 100;
};

// Runs the requested pipeline, writing its artifacts into output_dir.
// Returns 0 on success; on failure writes error.json there and returns 1.
int run_pipeline(const RunConfig& config);

void write_manifest(const RunConfig& config,
                    const std::map<std::string, std::string>& extra,
                    const std::string& path);

// Parses a manifest back into the config that produced it.
RunConfig read_manifest(const std::string& path);

}  // namespace triomix
