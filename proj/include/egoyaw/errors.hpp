#pragma once

#include <stdexcept>
#include <string>

namespace egoyaw {

// A 3D point could not be projected (at or behind the image plane).
class ProjectionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Fitting could not produce a model or a box.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content or unreadable/unwritable path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace egoyaw
