#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lidkit {

namespace detail {

inline void cat_one(std::ostringstream&) {}

template <typename T, typename... Rest>
void cat_one(std::ostringstream& oss, T&& v, Rest&&... rest) {
  oss << std::forward<T>(v);
  cat_one(oss, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream oss;
  oss.precision(17);
  detail::cat_one(oss, std::forward<Args>(args)...);
  return oss.str();
}

// Thrown for malformed inputs: bad indices, bad files, bad config values.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical routine cannot proceed (NaN loss, singular matrix).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] void fail_input(Args&&... args) {
  throw InputError(cat(std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void fail_numeric(Args&&... args) {
  throw NumericError(cat(std::forward<Args>(args)...));
}

// Verbosity from LIDKIT_LOG: 0 = quiet, 1 = progress (default), 2 = debug.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("LIDKIT_LOG");
    if (!env) return 1;
    return std::atoi(env);
  }();
  return level;
}

template <typename... Args>
void log_warn(Args&&... args) {
  if (log_level() >= 1)
    std::cerr << "warning: " << cat(std::forward<Args>(args)...) << "\n";
}

template <typename... Args>
void log_info(Args&&... args) {
  if (log_level() >= 1)
    std::cerr << cat(std::forward<Args>(args)...) << "\n";
}

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_level() >= 2)
    std::cerr << cat(std::forward<Args>(args)...) << "\n";
}

}  // namespace lidkit
