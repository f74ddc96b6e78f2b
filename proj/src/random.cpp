#include "quadnav/random.hpp"

#include <sstream>
#include <stdexcept>

namespace quadnav {

std::string RandomSource::save() const {
  std::ostringstream out;
  out << engine << ' ' << normal;
  return out.str();
}

void RandomSource::load(const std::string& text) {
  std::istringstream in(text);
  in >> engine >> normal;
  if (!in) throw std::runtime_error("corrupt random-source state");
}

}  // namespace quadnav
