// csv.hpp - CSV emission and parsing for trajectories and ensembles.

#pragma once

#include "orderlab/core.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace orderlab {

/// Shortest round-trip decimal for a double, 17 significant digits.
std::string format17(double value);

/// Like format17, but NaN becomes the empty cell.
std::string csv_cell(double value);

/// Columns: step,train_loss,test_loss,step_displacement,dist_to_anchor.
/// One row per executed step (1..n); absent losses are empty cells.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

/// Column-oriented CSV contents; empty cells parse as NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return header.empty() ? 0 : columns[0].size(); }
  const std::vector<double>& column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// FNV-1a 64-bit hash of a byte string, hex-encoded. Used for artifact
/// hashes in run manifests.
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace orderlab
