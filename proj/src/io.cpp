#include "glemor/io.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace glemor::io {

Sparse load_market_sparse(const std::string& path) {
  Sparse A;
  if (!Eigen::loadMarket(A, path))
    throw std::runtime_error("failed to read Matrix Market file: " + path);
  return A;
}

void save_market_sparse(const std::string& path, const Sparse& A) {
  if (!Eigen::saveMarket(A, path))
    throw std::runtime_error("failed to write Matrix Market file: " + path);
}

Dense load_market_auto(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string banner;
  std::getline(in, banner);
  in.close();
  if (banner.find("coordinate") != std::string::npos)
    return Dense(load_market_sparse(path));
  return load_market_dense(path);
}

Dense load_market_dense(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("not a Matrix Market file: " + path);
  if (line.find("array") == std::string::npos)
    throw std::runtime_error("expected dense (array) Matrix Market format: " + path);
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream hdr(line);
  long rows = 0, cols = 0;
  hdr >> rows >> cols;
  if (rows < 0 || cols < 0) throw std::runtime_error("bad dimensions in " + path);
  Dense A(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i)
      if (!(in >> A(i, j))) throw std::runtime_error("truncated data in " + path);
  return A;
}

void save_market_dense(const std::string& path, const Dense& A) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "%%MatrixMarket matrix array real general\n";
  out << A.rows() << " " << A.cols() << "\n";
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) out << A(i, j) << "\n";
}

Dense load_factor_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint32_t rows = 0, cols = 0;
  unsigned char hdr[8];
  if (!in.read(reinterpret_cast<char*>(hdr), 8)) throw std::runtime_error("truncated " + path);
  rows = std::uint32_t(hdr[0]) | std::uint32_t(hdr[1]) << 8 | std::uint32_t(hdr[2]) << 16 |
         std::uint32_t(hdr[3]) << 24;
  cols = std::uint32_t(hdr[4]) | std::uint32_t(hdr[5]) << 8 | std::uint32_t(hdr[6]) << 16 |
         std::uint32_t(hdr[7]) << 24;
  Dense Z(rows, cols);
  if (!in.read(reinterpret_cast<char*>(Z.data()),
               std::streamsize(sizeof(double)) * rows * cols))
    throw std::runtime_error("truncated " + path);
  return Z;
}

void save_factor_blob(const std::string& path, const Dense& Z) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  auto rows = std::uint32_t(Z.rows()), cols = std::uint32_t(Z.cols());
  unsigned char hdr[8] = {
      (unsigned char)(rows & 0xff),       (unsigned char)(rows >> 8 & 0xff),
      (unsigned char)(rows >> 16 & 0xff), (unsigned char)(rows >> 24 & 0xff),
      (unsigned char)(cols & 0xff),       (unsigned char)(cols >> 8 & 0xff),
      (unsigned char)(cols >> 16 & 0xff), (unsigned char)(cols >> 24 & 0xff)};
  out.write(reinterpret_cast<const char*>(hdr), 8);
  out.write(reinterpret_cast<const char*>(Z.data()),
            std::streamsize(sizeof(double)) * rows * cols);
}

namespace {
std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad config line: " + line);
    cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? std::stod(get(section, key, "")) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  return has(section, key) ? std::stol(get(section, key, "")) : fallback;
}

void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# " << comment << "\n";
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  out << std::setprecision(16);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

}  // namespace glemor::io
