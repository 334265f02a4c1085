// CSV emission with shortest round-trip numeric formatting.
#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pnp {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct CsvWriter {
  std::ostream& os;
  bool first_in_row = true;

  explicit CsvWriter(std::ostream& s) : os(s) {}

  CsvWriter& cell(const std::string& s) {
    if (!first_in_row) os << ",";
    os << s;
    first_in_row = false;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(long v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }
  void endrow() {
    os << "\n";
    first_in_row = true;
  }
};

}  // namespace pnp
