#pragma once

#include <iosfwd>
#include <string>

#include "knlab/sources.hpp"

namespace knlab {

enum class GridEncoding { csv, binary_le };

/// Grid source file: a text header followed by the samples.
///
///     knlab-grid 1
///     spacing <h>
///     origin <x> <y> <z>           lower corner of the box
///     cells <nx> <ny> <nz>
///     components T00 T01 ... T33   any permutation of the 16 labels
///     encoding csv | binary-le
///     data
///
/// After `data` come nx*ny*nz cells, x index fastest, then y, then z. With
/// `csv` each cell is one line of 16 comma-separated values in the declared
/// component order; with `binary-le` each cell is 16 IEEE-754 doubles in
/// little-endian byte order. Blank lines and `#` comments are allowed in the
/// header only.
GridSource read_grid(std::istream& in, const std::string& origin = "<stream>");
GridSource read_grid_file(const std::string& path);

void write_grid(std::ostream& out, const GridSource& grid, GridEncoding encoding = GridEncoding::csv);
void write_grid_file(const std::string& path, const GridSource& grid, GridEncoding encoding = GridEncoding::csv);

}  // namespace knlab
