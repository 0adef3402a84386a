#include "wspice/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "wspice/errors.hpp"

namespace wspice::csv {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::MalformedInput, source + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& source, std::size_t line) {
  if (s.empty()) fail(source, line, "empty field");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(source, line, "not a number: '" + s + "'");
  return v;
}

Index parse_dim(const std::string& s, const std::string& source, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
    fail(source, line, "bad dimension '" + s + "'");
  }
  return static_cast<Index>(v);
}

struct Parsed {
  CMatrix m;
  bool complex = true;
};

Parsed parse(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) fail(source, lineno + 1, "missing header row");
  const auto header = split(line);
  if (header.size() != 3) fail(source, lineno, "header must be 'n_rows,n_cols,complex|real'");
  const Index rows = parse_dim(header[0], source, lineno);
  const Index cols = parse_dim(header[1], source, lineno);
  Parsed out;
  if (header[2] == "complex") {
    out.complex = true;
  } else if (header[2] == "real") {
    out.complex = false;
  } else {
    fail(source, lineno, "unknown element tag '" + header[2] + "'");
  }

  const std::size_t width = out.complex ? 2 * static_cast<std::size_t>(cols) : static_cast<std::size_t>(cols);
  out.m.resize(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!next_line()) fail(source, lineno + 1, "expected " + std::to_string(rows) + " data rows");
    const auto fields = split(line);
    if (fields.size() != width) {
      fail(source, lineno, "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    for (Index c = 0; c < cols; ++c) {
      if (out.complex) {
        out.m(r, c) = cplx(parse_double(fields[2 * c], source, lineno), parse_double(fields[2 * c + 1], source, lineno));
      } else {
        out.m(r, c) = cplx(parse_double(fields[c], source, lineno), 0.0);
      }
    }
  }
  if (next_line()) fail(source, lineno, "trailing data after " + std::to_string(rows) + " rows");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MalformedInput, path.string() + ": cannot open file");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::MalformedInput, path.string() + ": cannot write file");
  out.precision(17);
  return out;
}

}  // namespace

CMatrix read_matrix(std::istream& in, const std::string& source) { return parse(in, source).m; }

CMatrix read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in, path.string());
}

RMatrix read_real_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  Parsed p = parse(in, path.string());
  if (p.complex && p.m.imag().cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorKind::MalformedInput, path.string() + ": expected real-valued entries");
  }
  return p.m.real();
}

void write_matrix(std::ostream& out, const CMatrix& m) {
  out << m.rows() << ',' << m.cols() << ",complex\n";
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c).real() << ',' << m(r, c).imag();
    }
    out << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const CMatrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

void write_real_matrix(std::ostream& out, const RMatrix& m) {
  out << m.rows() << ',' << m.cols() << ",real\n";
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

void write_real_matrix(const std::filesystem::path& path, const RMatrix& m) {
  auto out = open_out(path);
  write_real_matrix(out, m);
}

}  // namespace wspice::csv
