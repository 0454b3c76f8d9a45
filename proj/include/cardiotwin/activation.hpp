#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cardiotwin/geometry.hpp"
#include "cardiotwin/infarct.hpp"

namespace cardiotwin::activation {

using Tensor = Eigen::Matrix3d;

struct ConductionParams {
  double v_fiber = 65.0;  // cm/s
  double v_sheet = 51.0;
  double v_normal = 48.0;
  double scar_scale = 0.1;
  double bz_scale = 0.5;

  /// Throws ParameterError unless all velocities > 0 and
  /// 0 < scar_scale <= bz_scale <= 1.
  void validate() const;
};

/// Element label by majority over its four nodes; ties go to the slower
/// class (scar before bz before normal).
infarct::Tissue element_tissue(const Tet& tet, const infarct::TissueMap& tissue);

/// V = s^2 (vf^2 f f^T + vs^2 s s^T + vn^2 n n^T) per element, in cm^2/s^2,
/// with s the scale of the element's tissue class. Throws ValidationError
/// when a fibre triad is not orthonormal within 1e-6.
std::vector<Tensor> build_velocity_tensor(const Mesh& mesh, const geometry::FiberField& fibers,
                                          const infarct::TissueMap& tissue, const ConductionParams& params);

/// Uniform tensor for every element (fixtures, isotropic slabs).
std::vector<Tensor> uniform_tensor(const Mesh& mesh, const Tensor& v);

struct Root {
  std::uint32_t node;
  double t_ms;
};
using RootSet = std::vector<Root>;

struct ActivationMap {
  std::vector<double> t_ms;  // +inf where unreached
  std::size_t unreached = 0;

  bool reached(std::size_t i) const;
};

struct EikonalOptions {
  double tol_ms = 0.01;
  std::size_t max_updates_per_node = 10000;
};

/// Fast iterative method on tetrahedra: every node is updated from the
/// opposite face of each incident tet under the element metric V^-1
/// (exact minimisation over the face, then its edges and vertices).
/// Roots keep their onset time exactly. Nodes not connected to a root stay
/// at +inf and are counted in `unreached`.
/// Throws ValidationError for an empty root set, negative onsets, bad node
/// indices or a tensor that is not symmetric positive definite.
ActivationMap solve_eikonal(const Mesh& mesh, const std::vector<Tensor>& tensors, const RootSet& roots,
                            const EikonalOptions& options = {});

/// Largest |t(x) - local_update(x)| over reached non-root nodes; after
/// convergence this is bounded by tol_ms.
double eikonal_residual(const Mesh& mesh, const std::vector<Tensor>& tensors, const RootSet& roots,
                        const ActivationMap& map);

/// Target coordinates of the surrogate root set (tm > 0.9 endocardium,
/// ab in [0.4, 0.7]). Order: LV septal, LV anterior, LV posterior, RV
/// anterior, RV posterior.
struct RootTarget {
  geometry::Ventricle tv;
  double ab;
  double rt;
};
inline constexpr std::array<RootTarget, 5> kRootTargets = {{
    {geometry::Ventricle::lv, 0.55, 1.0 / 6.0},
    {geometry::Ventricle::lv, 0.60, 11.0 / 12.0},
    {geometry::Ventricle::lv, 0.55, 7.0 / 12.0},
    {geometry::Ventricle::rv, 0.60, 0.10},
    {geometry::Ventricle::rv, 0.45, 0.25},
}};

/// Five roots at t = 0: for each target, the tm > 0.9 node of the right
/// ventricle closest in (ab, circular rt), ties to the lowest index.
/// Throws ValidationError when a ventricle has no candidate node.
RootSet default_root_set(const geometry::VentricularCoords& coords);

}  // namespace cardiotwin::activation
