#include "knlab/grid_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "knlab/error.hpp"

namespace knlab {

namespace {

double parse_double(const std::string& tok, const std::string& origin, int line) {
  double v = 0.0;
  const char* begin = tok.data();
  if (!tok.empty() && tok.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(origin, line, "bad number '" + tok + "'");
  }
  return v;
}

int parse_component(const std::string& label) {
  if (label.size() != 3 || label[0] != 'T' || label[1] < '0' || label[1] > '3' || label[2] < '0' ||
      label[2] > '3') {
    return -1;
  }
  return 4 * (label[1] - '0') + (label[2] - '0');
}

}  // namespace

GridSource read_grid(std::istream& in, const std::string& origin) {
  GridSource g;
  std::vector<int> order;
  std::string encoding;
  bool have_spacing = false, have_origin = false, have_cells = false;
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw ParseError(origin, 1, "empty grid file");
  ++lineno;
  {
    std::istringstream ss(line);
    std::string magic, version;
    ss >> magic >> version;
    if (magic != "knlab-grid" || version != "1") {
      throw ParseError(origin, lineno, "expected 'knlab-grid 1' header");
    }
  }

  bool in_data = false;
  while (!in_data && std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    if (key == "spacing") {
      if (tok.size() != 2) throw ParseError(origin, lineno, "expected 'spacing <h>'");
      g.spacing = parse_double(tok[1], origin, lineno);
      have_spacing = true;
    } else if (key == "origin") {
      if (tok.size() != 4) throw ParseError(origin, lineno, "expected 'origin <x> <y> <z>'");
      for (int d = 0; d < 3; ++d) g.origin[d] = parse_double(tok[d + 1], origin, lineno);
      have_origin = true;
    } else if (key == "cells") {
      if (tok.size() != 4) throw ParseError(origin, lineno, "expected 'cells <nx> <ny> <nz>'");
      for (int d = 0; d < 3; ++d) {
        const double v = parse_double(tok[d + 1], origin, lineno);
        if (v != static_cast<int>(v) || v <= 0) throw ParseError(origin, lineno, "cell counts must be positive integers");
        g.cells[d] = static_cast<int>(v);
      }
      have_cells = true;
    } else if (key == "components") {
      if (tok.size() != 17) throw ParseError(origin, lineno, "expected 16 component labels");
      std::vector<bool> seen(16, false);
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const int c = parse_component(tok[k]);
        if (c < 0 || seen[c]) throw ParseError(origin, lineno, "bad or repeated component label '" + tok[k] + "'");
        seen[c] = true;
        order.push_back(c);
      }
    } else if (key == "encoding") {
      if (tok.size() != 2 || (tok[1] != "csv" && tok[1] != "binary-le")) {
        throw ParseError(origin, lineno, "expected 'encoding csv' or 'encoding binary-le'");
      }
      encoding = tok[1];
    } else if (key == "data") {
      in_data = true;
    } else {
      throw ParseError(origin, lineno, "unknown header key '" + key + "'");
    }
  }
  if (!in_data) throw ParseError(origin, lineno, "missing 'data' line");
  if (!have_spacing || !have_origin || !have_cells || order.empty() || encoding.empty()) {
    throw ParseError(origin, lineno, "header must define spacing, origin, cells, components and encoding");
  }

  const std::size_t n = g.cell_count();
  g.data.assign(16 * n, 0.0);
  if (encoding == "csv") {
    for (std::size_t cell = 0; cell < n; ++cell) {
      if (!std::getline(in, line)) {
        throw ParseError(origin, lineno + 1, "expected " + std::to_string(n) + " data rows, got " + std::to_string(cell));
      }
      ++lineno;
      std::istringstream ss(line);
      std::string field;
      int k = 0;
      while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
        if (k >= 16) throw ParseError(origin, lineno, "more than 16 values in row");
        g.data[16 * cell + order[k]] = parse_double(field, origin, lineno);
        ++k;
      }
      if (k != 16) throw ParseError(origin, lineno, "expected 16 values, got " + std::to_string(k));
    }
  } else {
    std::vector<unsigned char> buf(16 * n * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw ParseError(origin, lineno + 1, "binary payload truncated");
    }
    for (std::size_t v = 0; v < 16 * n; ++v) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[8 * v + b];
      const std::size_t cell = v / 16;
      g.data[16 * cell + order[v % 16]] = std::bit_cast<double>(bits);
    }
  }
  try {
    validate_part(g);
  } catch (const std::invalid_argument& err) {
    throw ParseError(origin, lineno, err.what());
  }
  return g;
}

GridSource read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open grid file '" + path + "'");
  return read_grid(in, path);
}

void write_grid(std::ostream& out, const GridSource& g, GridEncoding encoding) {
  std::ostringstream head;
  head.precision(17);
  head << "knlab-grid 1\n"
       << "spacing " << g.spacing << "\n"
       << "origin " << g.origin[0] << ' ' << g.origin[1] << ' ' << g.origin[2] << "\n"
       << "cells " << g.cells[0] << ' ' << g.cells[1] << ' ' << g.cells[2] << "\n"
       << "components";
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) head << " T" << a << b;
  head << "\nencoding " << (encoding == GridEncoding::csv ? "csv" : "binary-le") << "\ndata\n";
  out << head.str();
  const std::size_t n = g.cell_count();
  if (encoding == GridEncoding::csv) {
    char buf[32];
    for (std::size_t cell = 0; cell < n; ++cell) {
      for (int k = 0; k < 16; ++k) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, g.data[16 * cell + k]);
        (void)ec;
        if (k) out.put(',');
        out.write(buf, ptr - buf);
      }
      out.put('\n');
    }
  } else {
    for (double v : g.data) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      out.write(bytes, 8);
    }
  }
}

void write_grid_file(const std::string& path, const GridSource& grid, GridEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write grid file '" + path + "'");
  write_grid(out, grid, encoding);
}

}  // namespace knlab
