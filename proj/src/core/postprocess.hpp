#pragma once

#include <span>
#include <string>
#include <vector>

#include "frames.hpp"
#include "tracking.hpp"

namespace offtrack::postprocess {

struct RemovalStats {
  std::size_t entries_removed = 0;
  std::size_t tracks_removed = 0;
};

// Drops entries whose raw box holds no points, then tracks left without entries.
std::vector<tracking::Tracklet> remove_empty(std::span<const tracking::Tracklet> tracks, const FrameSource& frames,
                                             RemovalStats* stats = nullptr);

// One refined track set per TTA variant, already mapped back to the original frame.
struct TtaVariantTracks {
  std::string tag;
  std::vector<tracking::Tracklet> tracks;
};

// Heading median after folding every heading into the hemisphere of a
// reference. The reference is the best-scored heading of the majority
// hemisphere, so one flipped variant cannot drag the others around.
double merge_headings(std::span<const double> yaws, std::span<const double> scores);

// Per (track, frame): score-weighted center and size, folded heading median,
// mean score. Frames missing from some variants merge whatever is present.
std::vector<tracking::Tracklet> tta_merge(std::span<const TtaVariantTracks> variants);

}  // namespace offtrack::postprocess
