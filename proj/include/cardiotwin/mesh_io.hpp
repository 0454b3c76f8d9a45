#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cardiotwin/mesh.hpp"

namespace cardiotwin {

/// Where a named field lives. `global` holds a free-length f64 vector and
/// `text` a UTF-8 string; both are extensions of the node/elem kinds.
enum class FieldKind : std::uint8_t { node = 0, elem = 1, global = 2, text = 3 };

struct Field {
  FieldKind kind = FieldKind::node;
  std::uint32_t components = 1;
  std::vector<double> data;  // row-major entity x component
  std::string text;          // only for FieldKind::text
};

/// Mesh plus named fields, the in-memory form of a `.ctmesh` file.
///
/// Layout (little-endian):
///   "CTMESH1\n"
///   [node_count u64][nodes f64 x 3 x N]
///   [tet_count u64][tets u32 x 4 x M]
///   repeated until EOF:
///     [name_len u32][name bytes][kind u8][components u32][payload]
/// where payload is f64 x components x N (node), x M (elem), f64 x
/// components (global) or `components` raw bytes (text).
/// Mesh annotations travel as fields "surface" (node), "frame" (global,
/// 12 values) and "edge_target" (global, 1 value).
struct MeshFile {
  Mesh mesh;
  std::map<std::string, Field> fields;

  bool has(const std::string& name) const { return fields.count(name) != 0; }

  void set_node_field(const std::string& name, std::span<const double> data, std::uint32_t components = 1);
  void set_elem_field(const std::string& name, std::span<const double> data, std::uint32_t components = 1);
  void set_global(const std::string& name, std::span<const double> data);
  void set_text(const std::string& name, std::string text);

  /// Returns the field data; throws ValidationError when absent or of the
  /// wrong kind/component count.
  const std::vector<double>& node_field(const std::string& name, std::uint32_t components = 1) const;
  const std::vector<double>& elem_field(const std::string& name, std::uint32_t components = 1) const;
  const std::string& text(const std::string& name) const;
};

void write_ctmesh(const std::filesystem::path& path, const MeshFile& file);
MeshFile read_ctmesh(const std::filesystem::path& path);

}  // namespace cardiotwin
