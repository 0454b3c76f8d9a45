#pragma once

#include <string>

#include "cardiotwin/activation.hpp"
#include "cardiotwin/config.hpp"
#include "cardiotwin/geometry.hpp"
#include "cardiotwin/infarct.hpp"
#include "cardiotwin/mesh_io.hpp"

namespace cardiotwin::pipeline {

/// A mesh with everything the forward model needs besides tissue labels.
struct Annotated {
  Mesh mesh;
  geometry::VentricularCoords coords;
  geometry::FiberField fibers;
  geometry::ElectrodeSet electrodes;
};

/// Coordinates, fibres and electrodes for a freshly generated mesh.
Annotated annotate(Mesh mesh, const RunConfig& config);

/// Generates and annotates the idealized biventricle described by config.
Annotated build_biventricle(const RunConfig& config);

/// Field names used in .ctmesh files.
inline constexpr const char* kFieldTm = "tm";
inline constexpr const char* kFieldAb = "ab";
inline constexpr const char* kFieldRt = "rt";
inline constexpr const char* kFieldTv = "tv";
inline constexpr const char* kFieldAha = "aha_segment";
inline constexpr const char* kFieldFibers = "fibers";  // elem x 9 (f, s, n)
inline constexpr const char* kFieldFiberFallback = "fiber_fallback";
inline constexpr const char* kFieldElectrodes = "electrodes";  // global 27
inline constexpr const char* kFieldTissue = "tissue";
inline constexpr const char* kFieldNoise = "noise";
inline constexpr const char* kFieldActivation = "t_a_ms";
inline constexpr const char* kFieldRoots = "roots";  // global (node, t) pairs
inline constexpr const char* kFieldApd = "apd_ms";
inline constexpr const char* kFieldScenario = "scenario";
inline constexpr const char* kFieldConfig = "config";

MeshFile to_file(const Annotated& a);

/// Reads the annotations from `file`. Missing coordinates, fibres or
/// electrodes are recomputed from the mesh (imported meshes must then carry
/// a "surface" field).
Annotated from_file(const MeshFile& file, const RunConfig& config);

void store_tissue(MeshFile& file, const infarct::TissueMap& tissue);
/// All-normal when the file has no tissue field.
infarct::TissueMap load_tissue(const MeshFile& file);

void store_activation(MeshFile& file, const activation::ActivationMap& map, const activation::RootSet& roots);
activation::ActivationMap load_activation(const MeshFile& file);

}  // namespace cardiotwin::pipeline
