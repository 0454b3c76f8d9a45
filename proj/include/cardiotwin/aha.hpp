#pragma once

#include <array>
#include <span>
#include <vector>

#include "cardiotwin/geometry.hpp"

// AHA 17-segment fixture. The band edges are expressed in apex distance
// d = 1 - ab (0 at the base plane, 1 at the apex). Sectors are measured in
// rt, which is 0 at the anterior LV/RV junction and increases towards the
// septum. The infarct catalog reads the same constants.
namespace cardiotwin::aha {

inline constexpr double kBasalEnd = 0.35;    // d in [0, 0.35)      -> segments 1-6
inline constexpr double kMidEnd = 0.70;      // d in [0.35, 0.70)   -> segments 7-12
inline constexpr double kApicalEnd = 0.95;   // d in [0.70, 0.95]   -> segments 13-16
                                             // d > 0.95            -> segment 17

/// Basal segment for each rt sextant in rt order (mid = basal + 6).
inline constexpr std::array<int, 6> kBasalSextant = {2, 3, 4, 5, 6, 1};

/// Apical quadrants are centred on the septum (rt = 1/6).
inline constexpr double kSeptumCenterRt = 1.0 / 6.0;
inline constexpr std::array<int, 4> kApicalQuadrant = {14, 15, 16, 13};

inline constexpr int kSegmentCount = 17;

/// Segment id in 1..17 for an LV location; throws DomainError for RV nodes
/// or coordinates outside [0,1].
int segment(double ab, double rt, geometry::Ventricle tv);

/// Per-node segment ids; RV nodes get 0.
std::vector<int> segments(const geometry::VentricularCoords& coords);

}  // namespace cardiotwin::aha
