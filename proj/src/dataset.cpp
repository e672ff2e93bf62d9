#include "dosegp/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dosegp/errors.hpp"

namespace dosegp {

namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite())
    throw InputError(std::string(what) + ": non-finite value");
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& path, int row) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(path + ": row " + std::to_string(row) +
                     ": cannot parse '" + s + "' as a number");
  }
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path,
                                               std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  header = split_line(line);
  std::vector<std::vector<double>> rows;
  int rownum = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++rownum;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw InputError(path + ": row " + std::to_string(rownum) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(header.size()));
    std::vector<double> r;
    r.reserve(cells.size());
    for (const auto& c : cells) r.push_back(parse_double(c, path, rownum));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InputError(path + ": no data rows");
  return rows;
}

}  // namespace

void ObservationalDataset::validate() const {
  if (y.size() < 1) throw InputError("observational data: no rows");
  if (x.size() != y.size() || z.rows() != y.size())
    throw InputError("observational data: inconsistent row counts");
  if (!stratum.empty() && static_cast<Eigen::Index>(stratum.size()) != y.size())
    throw InputError("observational data: stratum column length mismatch");
  require_finite(y, "observational y");
  require_finite(x, "observational x");
  if (!z.allFinite()) throw InputError("observational z: non-finite value");
}

Eigen::MatrixXd ObservationalDataset::inputs() const {
  Eigen::MatrixXd m(n(), 1 + p());
  m.col(0) = x;
  if (p() > 0) m.rightCols(p()) = z;
  return m;
}

void InterventionalDataset::validate() const {
  if (x.size() != y.size())
    throw InputError("interventional data: inconsistent row counts");
  require_finite(y, "interventional y");
  require_finite(x, "interventional x");
}

void InterventionalDataset::append(double dose, double outcome) {
  const Eigen::Index m0 = y.size();
  y.conservativeResize(m0 + 1);
  x.conservativeResize(m0 + 1);
  y(m0) = outcome;
  x(m0) = dose;
}

ObservationalDataset read_observational_csv(const std::string& path) {
  std::vector<std::string> header;
  auto rows = read_csv_rows(path, header);
  if (header.size() < 2 || header[0] != "y" || header[1] != "x")
    throw InputError(path + ": expected header y,x,z1,..");
  bool has_stratum = header.size() > 2 && header.back() == "stratum";
  const Eigen::Index p =
      static_cast<Eigen::Index>(header.size()) - 2 - (has_stratum ? 1 : 0);
  ObservationalDataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  d.y.resize(n);
  d.x.resize(n);
  d.z.resize(n, p);
  if (has_stratum) d.stratum.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y(i) = rows[i][0];
    d.x(i) = rows[i][1];
    for (Eigen::Index j = 0; j < p; ++j) d.z(i, j) = rows[i][2 + j];
    if (has_stratum) {
      double s = rows[i][2 + p];
      if (s != std::floor(s))
        throw InputError(path + ": stratum values must be integers");
      d.stratum[i] = static_cast<int>(s);
    }
  }
  d.validate();
  return d;
}

void write_observational_csv(const std::string& path,
                             const ObservationalDataset& d) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "y,x";
  for (Eigen::Index j = 0; j < d.p(); ++j) out << ",z" << (j + 1);
  if (!d.stratum.empty()) out << ",stratum";
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d.y(i));
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g", d.x(i));
    out << ',' << buf;
    for (Eigen::Index j = 0; j < d.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.z(i, j));
      out << ',' << buf;
    }
    if (!d.stratum.empty()) out << ',' << d.stratum[i];
    out << "\n";
  }
}

InterventionalDataset read_interventional_csv(const std::string& path) {
  std::vector<std::string> header;
  auto rows = read_csv_rows(path, header);
  if (header.size() != 2 || header[0] != "y" || header[1] != "x")
    throw InputError(path + ": expected header y,x");
  InterventionalDataset d;
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  d.y.resize(m);
  d.x.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d.y(i) = rows[i][0];
    d.x(i) = rows[i][1];
  }
  d.validate();
  return d;
}

void write_interventional_csv(const std::string& path,
                              const InterventionalDataset& d) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "y,x\n";
  char buf[32];
  for (Eigen::Index i = 0; i < d.m(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d.y(i));
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g", d.x(i));
    out << ',' << buf << "\n";
  }
}

double sample_mean(const Eigen::VectorXd& v) {
  if (v.size() < 1) throw InputError("sample_mean: empty vector");
  return v.mean();
}

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw InputError("sample_variance: need at least 2 values");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace dosegp
