#include "orderlab/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace orderlab {

std::string format17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string csv_cell(double value) {
  if (std::isnan(value)) return "";
  return format17(value);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "step,train_loss,test_loss,step_displacement,dist_to_anchor\n";
  for (std::size_t m = 1; m < traj.records.size(); ++m) {
    const TrajectoryRecord& rec = traj.records[m];
    out << rec.step << ',' << csv_cell(rec.train_loss) << ','
        << csv_cell(rec.test_loss) << ',' << csv_cell(rec.step_displacement)
        << ',' << csv_cell(rec.dist_to_anchor) << '\n';
  }
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  throw ConfigError("no such CSV column: " + name);
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  std::stringstream head(line);
  std::string cell;
  while (std::getline(head, cell, ',')) table.header.push_back(cell);
  table.columns.resize(table.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (!std::getline(row, cell, ',')) cell.clear();
      table.columns[i].push_back(cell.empty() ? kNaN : std::stod(cell));
    }
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  return read_csv(in);
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace orderlab
