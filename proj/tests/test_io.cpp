#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "glemor/io.hpp"
#include "test_support.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

using glemor::io::Config;
using testsup::Dense;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string("io_test_") + name;
}

}  // namespace

TEST_CASE("config parses sections, comments and typed lookups") {
  Config c = Config::parse_string(
      "# leading comment\n"
      "[gle]\n"
      "tol = 1e-8\n"
      "max_outer=200\n"
      "; alt comment\n"
      "[sim]\n"
      "t_final = 2.0\n"
      "label = fast run\n");
  CHECK(c.has("gle", "tol"));
  CHECK(!c.has("gle", "missing"));
  CHECK(c.get_double("gle", "tol", 0.0) == doctest::Approx(1e-8));
  CHECK(c.get_int("gle", "max_outer", 0) == 200);
  CHECK(c.get_double("sim", "t_final", 0.0) == doctest::Approx(2.0));
  CHECK(c.get("sim", "label", "") == "fast run");
  CHECK(c.get("sim", "absent", "dflt") == "dflt");
  CHECK(c.get_int("sim", "absent", 7) == 7);
}

TEST_CASE("dense matrix market round-trip") {
  Dense M = testsup::random_dense(5, 3, 11);
  const std::string p = tmp_path("dense.mtx");
  glemor::io::save_market_dense(p, M);
  Dense R = glemor::io::load_market_dense(p);
  REQUIRE(R.rows() == 5);
  REQUIRE(R.cols() == 3);
  CHECK((R - M).norm() <= 1e-14 * M.norm());
  std::remove(p.c_str());
}

TEST_CASE("sparse matrix market round-trip") {
  glemor::io::Sparse A(6, 6);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < 6; ++i) trips.emplace_back(i, i, -2.0 - i);
  for (int i = 0; i + 1 < 6; ++i) trips.emplace_back(i + 1, i, 0.5);
  A.setFromTriplets(trips.begin(), trips.end());
  const std::string p = tmp_path("sparse.mtx");
  glemor::io::save_market_sparse(p, A);
  glemor::io::Sparse B = glemor::io::load_market_sparse(p);
  REQUIRE(B.rows() == 6);
  CHECK((Dense(B) - Dense(A)).norm() <= 1e-14 * Dense(A).norm());
  std::remove(p.c_str());
}

TEST_CASE("factor blob round-trip with 8-byte little-endian header") {
  Dense Z = testsup::random_dense(7, 4, 3);
  const std::string p = tmp_path("factor.bin");
  glemor::io::save_factor_blob(p, Z);

  std::ifstream in(p, std::ios::binary);
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  auto u32 = [&](int off) {
    return std::uint32_t(hdr[off]) | (std::uint32_t(hdr[off + 1]) << 8) |
           (std::uint32_t(hdr[off + 2]) << 16) | (std::uint32_t(hdr[off + 3]) << 24);
  };
  CHECK(u32(0) == 7);
  CHECK(u32(4) == 4);
  double first;
  in.read(reinterpret_cast<char*>(&first), 8);
  CHECK(first == Z(0, 0));  // column-major: (0,0) leads
  in.close();

  Dense R = glemor::io::load_factor_blob(p);
  REQUIRE(R.rows() == 7);
  REQUIRE(R.cols() == 4);
  CHECK((R - Z).norm() == 0.0);
  std::remove(p.c_str());
}

TEST_CASE("csv writer emits comment, header and rows") {
  const std::string p = tmp_path("table.csv");
  glemor::io::write_csv(p, "mirrors table1", {"tol", "bound"}, {{1e-2, 3e-3}, {1e-4, 5e-5}});
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ", 0) == 0);
  CHECK(line.find("mirrors table1") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "tol,bound");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  std::remove(p.c_str());
}
