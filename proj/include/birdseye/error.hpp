#pragma once

#include <stdexcept>
#include <string>

namespace birdseye {

// Input outside an operation's mathematical domain (bad pixel, zero vector, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Correspondence set that does not determine a homography.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pixel on (or numerically at) the image of the ground plane's line at infinity.
struct HorizonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-order pose stream input.
struct StreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TeachError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operator command rejected by the engine.
struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace birdseye
