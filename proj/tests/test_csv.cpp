#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "reference.hpp"
#include "wspice/csv_io.hpp"
#include "wspice/errors.hpp"

using namespace wspice;

namespace {

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    csv::read_matrix(in, "m.csv");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedInput);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("csv") {

TEST_CASE("complex matrices round-trip through a file exactly") {
  const CMatrix m = ref::gaussian(4, 3, 1);
  const auto path = std::filesystem::temp_directory_path() / "wspice_csv_roundtrip.csv";
  csv::write_matrix(path, m);
  CHECK(csv::read_matrix(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("real matrices round-trip and complex files with zero imaginary parts read as real") {
  RMatrix m(2, 2);
  m << 1.5, -2.0, 3.25, 0.0;
  const auto path = std::filesystem::temp_directory_path() / "wspice_csv_real.csv";
  csv::write_real_matrix(path, m);
  CHECK(csv::read_real_matrix(path) == m);
  csv::write_matrix(path, m.cast<cplx>());
  CHECK(csv::read_real_matrix(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("interleaved layout") {
  std::istringstream in("1,2,complex\n1,2,3,-4\n");
  const CMatrix m = csv::read_matrix(in);
  CHECK(m(0, 0) == cplx(1, 2));
  CHECK(m(0, 1) == cplx(3, -4));
}

TEST_CASE("diagnostics carry source and line number") {
  CHECK(error_of("2,1,complex\n1,0\n1,x\n").rfind("m.csv:3:", 0) == 0);
  CHECK(error_of("2,1,complex\n1,0\n").find("expected 2 data rows") != std::string::npos);
  CHECK(error_of("1,2,complex\n1,0\n").rfind("m.csv:2:", 0) == 0);
  CHECK(error_of("1,1,quaternion\n1\n").find("unknown element tag") != std::string::npos);
  CHECK(error_of("").find("missing header") != std::string::npos);
  CHECK(error_of("0,1,real\n").find("bad dimension") != std::string::npos);
  CHECK(error_of("1,1,real\n1\n2\n").find("trailing data") != std::string::npos);
}

TEST_CASE("missing files are reported") {
  CHECK_THROWS_AS(csv::read_matrix(std::filesystem::path("/nonexistent/wspice.csv")), Error);
}

}
