#include "triomix/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace triomix {

namespace {

constexpr double kIntensityOffset = 100.0;  // c in beta = M / (c + M + U)
constexpr std::size_t kMaxListedCells = 20;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line_no,
                    const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse " +
                             what + " '" + text + "'");
  }
}

int role_index(const std::string& role, std::size_t line_no) {
  if (role == "mother") return 0;
  if (role == "father") return 1;
  if (role == "child") return 2;
  throw std::runtime_error("line " + std::to_string(line_no) + ": unknown role '" +
                           role + "' (expected mother, father or child)");
}

struct ParsedRow {
  std::size_t site = 0;
  std::size_t subject = 0;
  int role = 0;
  double value = 0.0;
};

double pearson(std::span<const double> x, std::span<const double> y, bool* degenerate) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

TriadDataset ingest_triads(const std::string& path, const std::string& format,
                           IngestReport* report) {
  const bool intensity = format == "intensity-csv";
  if (!intensity && format != "beta-csv")
    throw std::invalid_argument("ingest_triads: unknown format '" + format + "'");

  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_triads: cannot open '" + path + "'");

  IngestReport local;
  IngestReport& rep = report ? *report : local;

  const std::string expected_header =
      intensity ? "site_id,role,subject_id,methylated,unmethylated"
                : "site_id,role,subject_id,value";
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    throw std::runtime_error("ingest_triads: '" + path + "' is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header)
    throw std::runtime_error("line 1: expected header '" + expected_header +
                             "', got '" + line + "'");

  std::unordered_map<std::string, std::size_t> site_index, subject_index;
  std::vector<std::string> site_ids, subject_ids;
  std::vector<ParsedRow> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::size_t expected = intensity ? 5 : 4;
    if (fields.size() != expected)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(expected) + " fields, got " +
                               std::to_string(fields.size()));

    ParsedRow row;
    row.role = role_index(fields[1], line_no);
    auto [site_it, site_new] = site_index.try_emplace(fields[0], site_ids.size());
    if (site_new) site_ids.push_back(fields[0]);
    row.site = site_it->second;
    auto [subj_it, subj_new] = subject_index.try_emplace(fields[2], subject_ids.size());
    if (subj_new) subject_ids.push_back(fields[2]);
    row.subject = subj_it->second;

    if (intensity) {
      const double m = parse_number(fields[3], line_no, "methylated intensity");
      const double u = parse_number(fields[4], line_no, "unmethylated intensity");
      if (!(m >= 0.0) || !(u >= 0.0) || !std::isfinite(m) || !std::isfinite(u))
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": intensities must be finite and nonnegative");
      row.value = m / (kIntensityOffset + m + u);
    } else {
      row.value = parse_number(fields[3], line_no, "beta value");
      if (!(row.value >= 0.0) || !(row.value <= 1.0))
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": beta value must lie in [0,1], got " + fields[3]);
    }
    const auto [clipped, was_clipped] = clip_unit(row.value);
    if (was_clipped) {
      ++rep.n_clipped;
      if (rep.warnings.size() < kMaxListedCells)
        rep.warnings.push_back("line " + std::to_string(line_no) +
                               ": boundary value clipped into the open interval");
    }
    row.value = clipped;
    rows.push_back(row);
    ++rep.n_rows;
  }

  const std::size_t j_total = site_ids.size();
  const std::size_t i_total = subject_ids.size();
  if (j_total == 0 || i_total == 0)
    throw std::runtime_error("ingest_triads: no data rows in '" + path + "'");

  TriadDataset data;
  data.n_sites = j_total;
  data.n_triads = i_total;
  data.site_ids = std::move(site_ids);
  data.subject_ids = std::move(subject_ids);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  data.mother_values.assign(j_total * i_total, nan);
  data.father_values.assign(j_total * i_total, nan);
  data.child_values.assign(j_total * i_total, nan);

  for (const ParsedRow& row : rows) {
    auto& matrix = row.role == 0   ? data.mother_values
                   : row.role == 1 ? data.father_values
                                   : data.child_values;
    double& cell = matrix[row.site * i_total + row.subject];
    if (!std::isnan(cell))
      throw std::runtime_error("duplicate cell: site " + data.site_ids[row.site] +
                               ", role " +
                               (row.role == 0   ? std::string("mother")
                                : row.role == 1 ? std::string("father")
                                                : std::string("child")) +
                               ", subject " + data.subject_ids[row.subject]);
    cell = row.value;
  }

  std::vector<std::string> missing;
  const char* role_names[] = {"mother", "father", "child"};
  for (std::size_t j = 0; j < j_total && missing.size() <= kMaxListedCells; ++j)
    for (int r = 0; r < 3; ++r) {
      const auto& matrix = r == 0   ? data.mother_values
                           : r == 1 ? data.father_values
                                    : data.child_values;
      for (std::size_t i = 0; i < i_total; ++i)
        if (std::isnan(matrix[j * i_total + i]) && missing.size() <= kMaxListedCells)
          missing.push_back("(" + data.site_ids[j] + ", " + role_names[r] + ", " +
                            data.subject_ids[i] + ")");
    }
  if (!missing.empty()) {
    std::string msg = "incomplete triads, missing cells:";
    for (std::size_t i = 0; i < std::min(missing.size(), kMaxListedCells); ++i)
      msg += " " + missing[i];
    if (missing.size() > kMaxListedCells) msg += " ...";
    throw std::runtime_error(msg);
  }

  data.validate();
  return data;
}

void export_triads(const TriadDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_triads: cannot write '" + path + "'");
  out << "site_id,role,subject_id,value\n";
  const char* role_names[] = {"mother", "father", "child"};
  for (std::size_t j = 0; j < data.n_sites; ++j)
    for (int r = 0; r < 3; ++r) {
      const auto row = r == 0 ? data.mother_row(j) : r == 1 ? data.father_row(j)
                                                            : data.child_row(j);
      for (std::size_t i = 0; i < data.n_triads; ++i)
        out << data.site_ids[j] << ',' << role_names[r] << ',' << data.subject_ids[i]
            << ',' << format_double(row[i]) << '\n';
    }
  if (!out) throw std::runtime_error("export_triads: write failed for '" + path + "'");
}

ScreenOutcome screen_sites(const TriadDataset& data, double cutoff) {
  if (cutoff < 0.0 || cutoff > 1.0)
    throw std::invalid_argument("screen_sites: cutoff must lie in [0,1]");

  ScreenOutcome out;
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < data.n_sites; ++j) {
    SiteScreen s;
    s.site_id = data.site_ids[j];
    bool degenerate = false;
    s.mother_child_corr = pearson(data.child_row(j), data.mother_row(j), &degenerate);
    s.father_child_corr = pearson(data.child_row(j), data.father_row(j), &degenerate);
    s.degenerate = degenerate;
    s.passed = !degenerate && s.mother_child_corr >= cutoff &&
               s.father_child_corr >= cutoff;
    if (s.passed)
      kept.push_back(j);
    else
      ++out.n_excluded;
    out.sites.push_back(std::move(s));
  }

  out.filtered.n_triads = data.n_triads;
  out.filtered.n_sites = kept.size();
  out.filtered.subject_ids = data.subject_ids;
  for (std::size_t j : kept) {
    out.filtered.site_ids.push_back(data.site_ids[j]);
    const auto append = [&](const std::vector<double>& src, std::vector<double>& dst) {
      dst.insert(dst.end(), src.begin() + j * data.n_triads,
                 src.begin() + (j + 1) * data.n_triads);
    };
    append(data.mother_values, out.filtered.mother_values);
    append(data.father_values, out.filtered.father_values);
    append(data.child_values, out.filtered.child_values);
  }
  return out;
}

void write_assignments_csv(const std::string& path, const TriadDataset& data,
                           const MixtureState& state) {
  if (data.n_sites != state.n_sites)
    throw std::invalid_argument("write_assignments_csv: dataset/state mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "site_id,cluster";
  for (std::size_t k = 0; k < state.n_clusters; ++k) out << ",resp_" << k;
  out << '\n';
  const auto hard = hard_assignments(state);
  for (std::size_t j = 0; j < state.n_sites; ++j) {
    out << data.site_ids[j] << ',' << hard[j];
    for (std::size_t k = 0; k < state.n_clusters; ++k)
      out << ',' << format_double(state.resp(j, k));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_coefficients_csv(const std::string& path, const MixtureState& state,
                            const std::vector<std::array<double, 3>>* se) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "cluster,gamma0,gamma1,gamma2";
  if (se) out << ",se_gamma0,se_gamma1,se_gamma2";
  out << ",pi,n_sites\n";
  const auto hard = hard_assignments(state);
  std::vector<std::size_t> sizes(state.n_clusters, 0);
  for (std::size_t a : hard) ++sizes[a];
  for (std::size_t k = 0; k < state.n_clusters; ++k) {
    const ClusterCoefficients& g = state.coefficients[k];
    out << k << ',' << format_double(g.gamma0) << ',' << format_double(g.gamma1) << ','
        << format_double(g.gamma2);
    if (se)
      out << ',' << format_double((*se)[k][0]) << ',' << format_double((*se)[k][1])
          << ',' << format_double((*se)[k][2]);
    out << ',' << format_double(state.mixing[k]) << ',' << sizes[k] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_bic_curve_csv(const std::string& path,
                         const std::vector<BicRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "k,bic\n";
  for (const BicRecord& r : records)
    out << r.n_clusters << ',' << format_double(r.bic) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace triomix
