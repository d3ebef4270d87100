#ifndef GLEMOR_IO_HPP
#define GLEMOR_IO_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <string>
#include <vector>

namespace glemor::io {

using Dense = Eigen::MatrixXd;
using Sparse = Eigen::SparseMatrix<double>;

// Matrix Market, coordinate format for sparse, array format for dense.
Sparse load_market_sparse(const std::string& path);
void save_market_sparse(const std::string& path, const Sparse& A);
Dense load_market_dense(const std::string& path);
void save_market_dense(const std::string& path, const Dense& A);

// Reads either format, densified; picks the loader from the banner line.
Dense load_market_auto(const std::string& path);

// Column-major float64 blob with an 8-byte little-endian header: uint32 rows, uint32 cols.
Dense load_factor_blob(const std::string& path);
void save_factor_blob(const std::string& path, const Dense& Z);

// Sectioned key = value text config.  Lines starting with '#' or ';' are comments.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// CSV with one leading '#' comment line naming the mirrored result.
void write_csv(const std::string& path, const std::string& comment,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace glemor::io

#endif
