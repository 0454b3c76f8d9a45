#include "cardiotwin/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"

namespace cardiotwin::activation {

using infarct::Tissue;

void ConductionParams::validate() const {
  if (!(v_fiber > 0.0 && v_sheet > 0.0 && v_normal > 0.0))
    throw ParameterError("conduction: velocities must be positive");
  if (!(scar_scale > 0.0 && scar_scale <= bz_scale && bz_scale <= 1.0))
    throw ParameterError("conduction: need 0 < scar_scale <= bz_scale <= 1");
}

bool ActivationMap::reached(std::size_t i) const { return std::isfinite(t_ms[i]); }

Tissue element_tissue(const Tet& tet, const infarct::TissueMap& tissue) {
  int count[3] = {0, 0, 0};
  for (auto v : tet) ++count[static_cast<int>(tissue.labels[v])];
  int best = std::max({count[0], count[1], count[2]});
  for (Tissue t : {Tissue::scar, Tissue::bz, Tissue::normal})
    if (count[static_cast<int>(t)] == best) return t;
  return Tissue::normal;
}

std::vector<Tensor> build_velocity_tensor(const Mesh& mesh, const geometry::FiberField& fibers,
                                          const infarct::TissueMap& tissue, const ConductionParams& params) {
  params.validate();
  const std::size_t m = mesh.tets.size();
  if (fibers.frames.size() != m) throw ValidationError("fibre field does not match the mesh");
  if (tissue.size() != mesh.nodes.size()) throw ValidationError("tissue map does not match the mesh");
  std::vector<Tensor> out(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& fr = fibers.frames[t];
    Eigen::Matrix3d q;
    q << fr.f, fr.s, fr.n;
    if (!((q.transpose() * q - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6)) {
      std::ostringstream ss;
      ss << "fibre triad of element " << t << " is not orthonormal";
      throw ValidationError(ss.str());
    }
    double s = 1.0;
    switch (element_tissue(mesh.tets[t], tissue)) {
      case Tissue::scar: s = params.scar_scale; break;
      case Tissue::bz: s = params.bz_scale; break;
      case Tissue::normal: break;
    }
    out[t] = s * s *
             (params.v_fiber * params.v_fiber * fr.f * fr.f.transpose() +
              params.v_sheet * params.v_sheet * fr.s * fr.s.transpose() +
              params.v_normal * params.v_normal * fr.n * fr.n.transpose());
  }
  return out;
}

std::vector<Tensor> uniform_tensor(const Mesh& mesh, const Tensor& v) { return std::vector<Tensor>(mesh.tets.size(), v); }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Travel-time metric in ms^2/cm^2.
std::vector<Eigen::Matrix3d> metrics(const std::vector<Tensor>& tensors) {
  std::vector<Eigen::Matrix3d> out(tensors.size());
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const Tensor& v = tensors[t];
    double scale = v.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !((v - v.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale)) {
      std::ostringstream ss;
      ss << "velocity tensor of element " << t << " is not symmetric";
      throw ValidationError(ss.str());
    }
    Eigen::LLT<Eigen::Matrix3d> llt(v);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
      std::ostringstream ss;
      ss << "velocity tensor of element " << t << " is not positive definite";
      throw ValidationError(ss.str());
    }
    out[t] = 1e6 * llt.solve(Eigen::Matrix3d::Identity());
    out[t] = 0.5 * (out[t] + out[t].transpose());
  }
  return out;
}

double vertex_time(const Vec3& x, const Vec3& v, double tv, const Eigen::Matrix3d& m) {
  Vec3 d = x - v;
  return tv + std::sqrt(d.dot(m * d));
}

/// Minimum over the open segment a-b; endpoints are handled by the caller.
double edge_time(const Vec3& x, const Vec3& a, const Vec3& b, double ta, double tb, const Eigen::Matrix3d& m) {
  const Vec3 d = b - a, d0 = x - a;
  const Vec3 md = m * d;
  const double A = d.dot(md), B = -d0.dot(md), C = d0.dot(m * d0);
  const double delta = tb - ta;
  if (!(A > delta * delta)) return kInf;
  const double disc = std::max(0.0, A * C - B * B);
  const double s = (-B - delta * std::sqrt(disc / (A - delta * delta))) / A;
  if (!(s > 0.0 && s < 1.0)) return kInf;
  return ta + delta * s + std::sqrt(std::max(0.0, A * s * s + 2.0 * B * s + C));
}

/// Minimum of t(y) + |x - y|_M over the triangle (a, b, c) with linear t.
double face_time(const Vec3& x, const std::array<const Vec3*, 3>& p, const std::array<double, 3>& t,
                 const Eigen::Matrix3d& m) {
  double best = kInf;
  int finite = 0;
  for (int i = 0; i < 3; ++i)
    if (std::isfinite(t[i])) {
      ++finite;
      best = std::min(best, vertex_time(x, *p[i], t[i], m));
    }
  if (finite == 0) return kInf;

  if (finite == 3) {
    const Vec3& c = *p[2];
    Eigen::Matrix<double, 3, 2> e;
    e.col(0) = *p[0] - c;
    e.col(1) = *p[1] - c;
    const Vec3 e0 = x - c;
    const Eigen::Matrix<double, 3, 2> me = m * e;
    const Eigen::Matrix2d P = e.transpose() * me;
    const Eigen::Vector2d b = me.transpose() * e0;
    const Eigen::Vector2d delta(t[0] - t[2], t[1] - t[2]);
    const double det = P.determinant();
    if (det > 1e-14 * P.squaredNorm()) {
      Eigen::Matrix2d pinv;
      pinv << P(1, 1), -P(0, 1), -P(1, 0), P(0, 0);
      pinv /= det;
      const double q_min = e0.dot(m * e0) - b.dot(pinv * b);
      const double kappa = delta.dot(pinv * delta);
      if (kappa < 1.0 && q_min > 0.0) {
        const double s = std::sqrt(q_min / (1.0 - kappa));
        const Eigen::Vector2d lam = pinv * (b - delta * s);
        if (lam[0] >= 0.0 && lam[1] >= 0.0 && lam[0] + lam[1] <= 1.0)
          return std::min(best, t[2] + delta.dot(lam) + s);
      }
    }
  }
  for (int i = 0; i < 3; ++i) {
    int j = (i + 1) % 3;
    if (std::isfinite(t[i]) && std::isfinite(t[j])) best = std::min(best, edge_time(x, *p[i], *p[j], t[i], t[j], m));
  }
  return best;
}

class Updater {
 public:
  Updater(const Mesh& mesh, const std::vector<Tensor>& tensors)
      : mesh_(mesh), incident_(node_to_tets(mesh)), metric_(metrics(tensors)) {}

  double update(std::uint32_t x, const std::vector<double>& t) const {
    double best = kInf;
    const Vec3& px = mesh_.nodes[x];
    for (auto e : incident_[x]) {
      const Tet& k = mesh_.tets[e];
      std::array<const Vec3*, 3> p;
      std::array<double, 3> tt;
      int j = 0;
      for (auto v : k) {
        if (v == x) continue;
        p[j] = &mesh_.nodes[v];
        tt[j] = t[v];
        ++j;
      }
      best = std::min(best, face_time(px, p, tt, metric_[e]));
    }
    return best;
  }

 private:
  const Mesh& mesh_;
  Csr incident_;
  std::vector<Eigen::Matrix3d> metric_;
};

void check_inputs(const Mesh& mesh, const std::vector<Tensor>& tensors, const RootSet& roots) {
  if (tensors.size() != mesh.tets.size()) throw ValidationError("one velocity tensor per element is required");
  if (roots.empty()) throw ValidationError("root set is empty");
  for (const auto& r : roots) {
    if (r.node >= mesh.nodes.size()) throw ValidationError("root node index out of range");
    if (!(r.t_ms >= 0.0) || !std::isfinite(r.t_ms)) throw ValidationError("root onset times must be finite and >= 0");
  }
}

}  // namespace

ActivationMap solve_eikonal(const Mesh& mesh, const std::vector<Tensor>& tensors, const RootSet& roots,
                            const EikonalOptions& options) {
  check_inputs(mesh, tensors, roots);
  const std::size_t n = mesh.nodes.size();
  const Updater updater(mesh, tensors);
  const Csr neighbors = node_neighbors(mesh);

  std::vector<double> t(n, kInf);
  std::vector<std::uint8_t> fixed(n, 0), active(n, 0);
  for (const auto& r : roots) {
    t[r.node] = std::min(t[r.node], r.t_ms);
    fixed[r.node] = 1;
  }
  std::vector<std::uint32_t> list;
  for (const auto& r : roots)
    for (auto nb : neighbors[r.node])
      if (!fixed[nb] && !active[nb]) {
        active[nb] = 1;
        list.push_back(nb);
      }

  const double tol = options.tol_ms;
  const std::size_t budget = options.max_updates_per_node * std::max<std::size_t>(n, 1);
  std::size_t updates = 0;
  std::vector<std::uint32_t> next;
  while (!list.empty()) {
    next.clear();
    for (auto x : list) {
      const double p = t[x];
      const double q = updater.update(x, t);
      ++updates;
      if (q < p) t[x] = q;
      if (std::isfinite(q) && std::abs(p - q) < tol) {
        active[x] = 0;
        for (auto nb : neighbors[x]) {
          if (fixed[nb] || active[nb]) continue;
          const double qn = updater.update(nb, t);
          ++updates;
          if (qn < t[nb]) {
            t[nb] = qn;
            active[nb] = 1;
            next.push_back(nb);
          }
        }
      } else {
        next.push_back(x);
      }
    }
    list.swap(next);
    if (updates > budget) throw IntegrationError("eikonal iteration budget exhausted before convergence");
  }

  ActivationMap map;
  map.t_ms = std::move(t);
  map.unreached = static_cast<std::size_t>(std::count_if(map.t_ms.begin(), map.t_ms.end(),
                                                         [](double v) { return !std::isfinite(v); }));
  if (map.unreached > 0) {
    std::ostringstream ss;
    ss << map.unreached << " nodes are not connected to any root and stay unactivated";
    log::warn(ss.str());
  }
  return map;
}

double eikonal_residual(const Mesh& mesh, const std::vector<Tensor>& tensors, const RootSet& roots,
                        const ActivationMap& map) {
  check_inputs(mesh, tensors, roots);
  const Updater updater(mesh, tensors);
  std::vector<std::uint8_t> fixed(mesh.nodes.size(), 0);
  for (const auto& r : roots) fixed[r.node] = 1;
  double worst = 0.0;
  for (std::uint32_t x = 0; x < mesh.nodes.size(); ++x) {
    if (fixed[x] || !map.reached(x)) continue;
    worst = std::max(worst, std::abs(map.t_ms[x] - updater.update(x, map.t_ms)));
  }
  return worst;
}

RootSet default_root_set(const geometry::VentricularCoords& coords) {
  RootSet roots;
  for (const auto& target : kRootTargets) {
    double best = kInf;
    std::int64_t pick = -1;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords.tv[i] != target.tv || !(coords.tm[i] > 0.9)) continue;
      double drt = std::abs(coords.rt[i] - target.rt);
      drt = std::min(drt, 1.0 - drt);
      double d = (coords.ab[i] - target.ab) * (coords.ab[i] - target.ab) + drt * drt;
      if (d < best) {
        best = d;
        pick = static_cast<std::int64_t>(i);
      }
    }
    if (pick < 0) throw ValidationError("no endocardial node available for an activation root");
    roots.push_back({static_cast<std::uint32_t>(pick), 0.0});
  }
  return roots;
}

}  // namespace cardiotwin::activation
