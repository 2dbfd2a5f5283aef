#include "coagflux/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "coagflux/errors.hpp"

namespace coagflux {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

void write_profile_csv(const std::filesystem::path& path, const GridDensity& f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << "x_center,x_lo,x_hi,f_value\n";
  const SizeGrid& g = *f.grid;
  for (int i = 0; i < g.n_cells; ++i) {
    out << format_double(g.centers[i]) << ',' << format_double(g.edges[i]) << ','
        << format_double(g.edges[i + 1]) << ',' << format_double(f.values[i])
        << '\n';
  }
}

void write_flux_csv(const std::filesystem::path& path, const FluxProfile& flux) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << "z_edge,J_value\n";
  const SizeGrid& g = *flux.grid;
  for (size_t e = 0; e < flux.values.size(); ++e)
    out << format_double(g.edges[e]) << ',' << format_double(flux.values[e])
        << '\n';
}

GridDensity read_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("x_center", 0) != 0)
    throw ConfigError("profile file missing the x_center header: " + path.string());
  std::vector<double> centers, lo, hi, vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double cols[4];
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(row, field, c < 3 ? ',' : '\n'))
        throw ConfigError("malformed profile row: " + line);
      try {
        cols[c] = std::stod(field);
      } catch (const std::exception&) {
        throw ConfigError("non-numeric profile field: " + field);
      }
    }
    centers.push_back(cols[0]);
    lo.push_back(cols[1]);
    hi.push_back(cols[2]);
    vals.push_back(cols[3]);
  }
  if (centers.size() < 2) throw ConfigError("profile file has too few rows");
  auto grid = std::make_shared<SizeGrid>();
  grid->n_cells = static_cast<int>(centers.size());
  grid->x_min = lo.front();
  grid->x_max = hi.back();
  grid->edges = lo;
  grid->edges.push_back(hi.back());
  grid->centers = centers;
  grid->widths.resize(centers.size());
  for (size_t i = 0; i < centers.size(); ++i) {
    if (std::abs(hi[i] - grid->edges[i + 1]) > 1e-12 * hi[i])
      throw ConfigError("profile cells are not contiguous");
    grid->widths[i] = hi[i] - lo[i];
    if (!(grid->widths[i] > 0.0)) throw ConfigError("profile cell has zero width");
  }
  grid->ratio = grid->edges[1] / grid->edges[0];
  GridDensity f;
  f.grid = std::move(grid);
  f.values = std::move(vals);
  return f;
}

} // namespace coagflux
