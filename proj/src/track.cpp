#include "egoyaw/track.hpp"

#include <stdexcept>
#include <string>

namespace egoyaw {

CropDescriptor ObservationTrack::crop(std::size_t k) const {
  const TrackFrame& f = frames.at(k);
  return {Angle(f.crop_feature.value_or(0.0)), track_id, f.frame};
}

void validate_track(const ObservationTrack& track) {
  const std::string where = "track " + std::to_string(track.track_id);
  if (track.frames.empty()) throw std::invalid_argument(where + ": no frames");
  for (std::size_t k = 0; k < track.frames.size(); ++k) {
    if (!track.frames[k].box.valid()) {
      throw std::invalid_argument(where + ": degenerate 2D box at frame " +
                                  std::to_string(track.frames[k].frame));
    }
    if (k > 0 && !(track.frames[k].timestamp > track.frames[k - 1].timestamp)) {
      throw std::invalid_argument(where + ": timestamps not strictly increasing at frame " +
                                  std::to_string(track.frames[k].frame));
    }
  }
}

}  // namespace egoyaw
