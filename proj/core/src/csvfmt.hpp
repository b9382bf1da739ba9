#pragma once

#include <cstdio>
#include <string>

// CSV numeric formatting: 9 significant digits, shortest form.
namespace irsc::csvfmt {

inline std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

}  // namespace irsc::csvfmt
