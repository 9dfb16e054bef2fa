#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace cfarnet {

/// Locale-independent shortest-stable rendering used by every CSV writer.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace cfarnet
