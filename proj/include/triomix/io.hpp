#pragma once

#include <string>
#include <vector>

#include "triomix/data.hpp"
#include "triomix/em.hpp"
#include "triomix/model_select.hpp"

namespace triomix {

struct IngestReport {
  std::size_t n_rows = 0;
  std::size_t n_clipped = 0;  // boundary values moved into the open interval
  std::vector<std::string> warnings;
};

// Long-format CSV readers.
//   beta-csv:      site_id,role,subject_id,value          (value in [0,1])
//   intensity-csv: site_id,role,subject_id,methylated,unmethylated
// Intensities become beta values via M / (100 + M + U). Site and subject
// order follow first appearance in the file; every (site, role, subject)
// cell must appear exactly once. Errors carry the offending line number.
TriadDataset ingest_triads(const std::string& path, const std::string& format,
                           IngestReport* report = nullptr);

// Inverse of the beta-csv reader: site-major, roles mother/father/child,
// full precision. Re-ingesting reproduces the dataset exactly.
void export_triads(const TriadDataset& data, const std::string& path);

struct SiteScreen {
  std::string site_id;
  double mother_child_corr = 0.0;
  double father_child_corr = 0.0;
  bool passed = false;
  bool degenerate = false;  // zero variance in some role; always excluded
};

struct ScreenOutcome {
  TriadDataset filtered;
  std::vector<SiteScreen> sites;  // one per input site, input order
  std::size_t n_excluded = 0;
};

// Keeps sites whose mother-child and father-child Pearson correlations
// (across triads) both reach the cutoff.
ScreenOutcome screen_sites(const TriadDataset& data, double cutoff);

// Report writers. All emit a header row and print doubles with %.17g so a
// rerun under the same seed is byte-identical.
void write_assignments_csv(const std::string& path, const TriadDataset& data,
                           const MixtureState& state);
void write_coefficients_csv(const std::string& path, const MixtureState& state,
                            const std::vector<std::array<double, 3>>* se = nullptr);
void write_bic_curve_csv(const std::string& path,
                         const std::vector<BicRecord>& records);

std::string format_double(double v);

}  // namespace triomix
