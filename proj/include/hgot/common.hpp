#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hgot {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy shared across the library. The CLI maps these to stable
// exit codes: ConfigError -> 2, DataError -> 3, NumericalError -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Misuse of a stateful API (e.g. backward before forward).
class StateError : public std::runtime_error {
 public:
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Derives an independent RNG stream from a base seed and a tag, so that
// e.g. parameter init and graph generation never share a stream.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace hgot
