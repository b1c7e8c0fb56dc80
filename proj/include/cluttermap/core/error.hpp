#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace cluttermap {

// All recoverable failures in the library throw this.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  append_all(os, rest...);
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
  std::ostringstream os;
  detail::append_all(os, parts...);
  throw Error(os.str());
}

template <typename... Parts>
void require(bool cond, const Parts&... parts) {
  if (!cond) fail(parts...);
}

}  // namespace cluttermap
