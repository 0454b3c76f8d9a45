#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cardiotwin/mesh.hpp"

namespace cardiotwin::geometry {

/// Idealized biventricle, all lengths in cm. The LV is a pair of
/// prolate half-ellipsoids (endo/epi) truncated at the base plane z = 0 with
/// the apex towards -z. The RV cavity is a third ellipsoid displaced towards
/// patient right (-y) and clipped by the LV epicardium; the RV free wall is
/// that ellipsoid inflated by `rv_wall`. +x is anterior.
struct WallParams {
  double lv_endo_radius = 2.0;
  double lv_endo_half_length = 4.0;
  double lv_wall = 0.9;
  double rv_endo_radius_x = 2.4;
  double rv_endo_radius_y = 2.4;
  double rv_endo_half_length = 3.6;
  double rv_offset = 1.7;
  double rv_wall = 0.4;

  /// Throws ParameterError for non-positive radii, walls not thinner than the
  /// cavity they enclose, an LV wall of at most 2 * edge_target, or an RV
  /// cavity that does not clear the LV epicardium.
  void validate(double edge_target) const;
};

Mesh generate_idealized_biventricle(const WallParams& params, double edge_target, std::uint64_t seed);

enum class Ventricle : std::uint8_t { lv = 0, rv = 1 };

struct VentricularCoords {
  std::vector<double> tm;  // 1 endocardium, 0 epicardium
  std::vector<double> ab;  // 0 apex, 1 base
  std::vector<double> rt;  // [0,1), 0 at the anterior LV/RV junction
  std::vector<Ventricle> tv;

  std::size_t size() const { return tm.size(); }
};

/// tm: max of two harmonic fields, one per ventricle (own endo = 1, epi and
/// the other endo = 0, base insulated). ab: normalized height along the
/// frame axis. rt: angle about the axis from frame.rt_zero towards
/// frame.rt_quarter. tv: harmonic field between LV endo (1) and RV endo (0)
/// split at 0.5. Requires surface tags on every boundary node
/// (TopologyError otherwise).
VentricularCoords compute_ventricular_coordinates(const Mesh& mesh);

struct FiberFrame {
  Vec3 f, s, n;
};

struct FiberField {
  std::vector<FiberFrame> frames;     // one per tet
  std::vector<std::uint8_t> fallback;  // 1 where the frame came from neighbours
};

/// Local orthonormal (circumferential, longitudinal, transmural) basis of a
/// tet, transmural pointing towards the endocardium. The tm gradient is
/// recovered (volume-weighted nodal average, then averaged over the tet's
/// nodes) so tets whose nodes all sit on one surface still get a direction.
/// `valid` is false when that gradient vanishes or is parallel to the axis.
struct LocalFrame {
  Vec3 circumferential, longitudinal, transmural;
  bool valid = false;
};

std::vector<LocalFrame> local_frames(const Mesh& mesh, const VentricularCoords& coords);

/// Rule-based fibres: helix angle interpolated linearly in tm from
/// alpha_epi (tm = 0) to alpha_endo (tm = 1), sheet = transmural, normal =
/// f x s. Tets without a valid local frame get the re-orthonormalized
/// average of their valid neighbours and are flagged.
FiberField assign_fibers(const Mesh& mesh, const VentricularCoords& coords, double alpha_endo_deg = 60.0,
                         double alpha_epi_deg = -60.0);

/// Helix angle (degrees) of fibre direction f within a local frame.
double helix_angle_deg(const Vec3& f, const LocalFrame& frame);

enum class Electrode : std::uint8_t { RA = 0, LA, LL, V1, V2, V3, V4, V5, V6 };
inline constexpr std::size_t kElectrodeCount = 9;
inline constexpr std::array<std::string_view, kElectrodeCount> kElectrodeNames = {
    "RA", "LA", "LL", "V1", "V2", "V3", "V4", "V5", "V6"};

struct ElectrodeSet {
  std::array<Vec3, kElectrodeCount> positions;

  const Vec3& operator[](Electrode e) const { return positions[static_cast<std::size_t>(e)]; }
  Vec3& operator[](Electrode e) { return positions[static_cast<std::size_t>(e)]; }
};

/// Standard-layout electrode geometry relative to the mesh bounding box.
/// Precordial electrodes sit on a horizontal arc around the long axis
/// (angles measured from +x anterior towards +y left); limb electrodes sit at
/// torso-scale offsets.
struct ElectrodeLayout {
  std::array<double, 6> precordial_angles_deg = {-30.0, -5.0, 20.0, 45.0, 70.0, 95.0};
  double chest_margin = 2.5;          // cm beyond the widest node
  double precordial_depth = 0.45;     // fraction of the base-apex height
  double torso_scale = 2.5;           // limb offsets in units of the heart radius
  double min_clearance = 1.0;         // cm, PlacementError below this
};

ElectrodeSet place_electrodes(const Mesh& mesh, const ElectrodeLayout& layout = {});

}  // namespace cardiotwin::geometry
