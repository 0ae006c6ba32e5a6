#include "nestco/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nestco/error.hpp"

namespace nestco {

double standard_normal(Rng& rng) {
  // 1 - u keeps the logarithm argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (!is) throw ParseError("malformed generator state", 0);
  return rng;
}

}  // namespace nestco
