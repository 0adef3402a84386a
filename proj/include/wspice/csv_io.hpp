#pragma once

// Matrix CSV format shared by all tools:
//
//   <n_rows>,<n_cols>,complex
//   re(0,0),im(0,0),re(0,1),im(0,1),...
//
// A `real` tag in place of `complex` stores one value per column. Parse
// failures throw Error(MalformedInput) with a "<source>:<line>:" prefix.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "wspice/linmodel.hpp"

namespace wspice::csv {

CMatrix read_matrix(std::istream& in, const std::string& source = "<stream>");
CMatrix read_matrix(const std::filesystem::path& path);

/// Reads a `real`-tagged file, or a `complex` one whose imaginary parts are all zero.
RMatrix read_real_matrix(const std::filesystem::path& path);

void write_matrix(std::ostream& out, const CMatrix& m);
void write_matrix(const std::filesystem::path& path, const CMatrix& m);
void write_real_matrix(std::ostream& out, const RMatrix& m);
void write_real_matrix(const std::filesystem::path& path, const RMatrix& m);

}  // namespace wspice::csv
