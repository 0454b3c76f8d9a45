#include "cardiotwin/aha.hpp"

#include <cmath>
#include <sstream>

#include "cardiotwin/errors.hpp"

namespace cardiotwin::aha {

int segment(double ab, double rt, geometry::Ventricle tv) {
  if (tv != geometry::Ventricle::lv) throw DomainError("AHA segments are defined for LV nodes only");
  if (!(ab >= 0.0 && ab <= 1.0) || !(rt >= 0.0 && rt < 1.0)) {
    std::ostringstream ss;
    ss << "coordinates out of range: ab=" << ab << " rt=" << rt;
    throw DomainError(ss.str());
  }
  const double d = 1.0 - ab;
  if (d > kApicalEnd) return 17;
  if (d >= kMidEnd) {
    double shifted = rt - kSeptumCenterRt + 0.125;
    shifted -= std::floor(shifted);
    int q = std::min(3, static_cast<int>(shifted * 4.0));
    return kApicalQuadrant[q];
  }
  int sextant = std::min(5, static_cast<int>(rt * 6.0));
  int basal = kBasalSextant[sextant];
  return d < kBasalEnd ? basal : basal + 6;
}

std::vector<int> segments(const geometry::VentricularCoords& coords) {
  std::vector<int> out(coords.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (coords.tv[i] == geometry::Ventricle::lv) out[i] = segment(coords.ab[i], coords.rt[i], coords.tv[i]);
  return out;
}

}  // namespace cardiotwin::aha
