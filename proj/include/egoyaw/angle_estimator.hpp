#pragma once

#include "egoyaw/track.hpp"

namespace egoyaw {

/// Maps a crop descriptor to a local angle. Implementations must be
/// deterministic and safe to call concurrently.
class AngleEstimator {
 public:
  virtual ~AngleEstimator() = default;
  virtual Angle predict(const CropDescriptor& crop) const = 0;
};

}  // namespace egoyaw
