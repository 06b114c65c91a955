#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Core>

#include "srf/error.hpp"

namespace srf {

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

/// One line per row, comma separated, full precision.
template <typename Derived>
void write_csv(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(static_cast<double>(m(r, c)));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing CSV");
}

/// Binary 8-bit PGM (P5), min-max normalized; a constant image maps to 0.
template <typename Derived>
void write_pgm(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
  const Eigen::Index h = m.rows();
  const Eigen::Index w = m.cols();
  out << "P5\n" << w << ' ' << h << "\n255\n";
  const double lo = h * w > 0 ? static_cast<double>(m.minCoeff()) : 0.0;
  const double hi = h * w > 0 ? static_cast<double>(m.maxCoeff()) : 0.0;
  const double range = hi - lo;
  std::string payload(static_cast<std::size_t>(h * w), '\0');
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      double level = 0.0;
      if (range > 0.0) level = std::round(255.0 * (static_cast<double>(m(r, c)) - lo) / range);
      payload[static_cast<std::size_t>(r * w + c)] =
          static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0.0, 255.0)));
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing PGM");
}

}  // namespace srf
