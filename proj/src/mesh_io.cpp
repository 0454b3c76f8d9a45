#include "cardiotwin/mesh_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "cardiotwin/errors.hpp"

namespace cardiotwin {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr char kMagic[] = "CTMESH1\n";

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_array(std::ostream& os, const T* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated file: " + path.string());
  return v;
}

template <typename T>
void get_array(std::istream& is, T* data, std::size_t n, const std::filesystem::path& path) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T))))
    throw IoError("truncated file: " + path.string());
}

std::size_t entity_count(const MeshFile& f, FieldKind kind) {
  switch (kind) {
    case FieldKind::node: return f.mesh.nodes.size();
    case FieldKind::elem: return f.mesh.tets.size();
    default: return 1;
  }
}

const Field& lookup(const MeshFile& f, const std::string& name, FieldKind kind, std::uint32_t components) {
  auto it = f.fields.find(name);
  if (it == f.fields.end()) throw ValidationError("mesh has no field '" + name + "'");
  if (it->second.kind != kind || it->second.components != components) {
    std::ostringstream ss;
    ss << "field '" << name << "' has kind " << int(it->second.kind) << " x" << it->second.components
       << ", expected kind " << int(kind) << " x" << components;
    throw ValidationError(ss.str());
  }
  return it->second;
}

}  // namespace

void MeshFile::set_node_field(const std::string& name, std::span<const double> data, std::uint32_t components) {
  if (data.size() != mesh.nodes.size() * components)
    throw ValidationError("node field '" + name + "' has wrong length");
  fields[name] = Field{FieldKind::node, components, {data.begin(), data.end()}, {}};
}

void MeshFile::set_elem_field(const std::string& name, std::span<const double> data, std::uint32_t components) {
  if (data.size() != mesh.tets.size() * components)
    throw ValidationError("element field '" + name + "' has wrong length");
  fields[name] = Field{FieldKind::elem, components, {data.begin(), data.end()}, {}};
}

void MeshFile::set_global(const std::string& name, std::span<const double> data) {
  fields[name] = Field{FieldKind::global, static_cast<std::uint32_t>(data.size()), {data.begin(), data.end()}, {}};
}

void MeshFile::set_text(const std::string& name, std::string text) {
  auto n = static_cast<std::uint32_t>(text.size());
  fields[name] = Field{FieldKind::text, n, {}, std::move(text)};
}

const std::vector<double>& MeshFile::node_field(const std::string& name, std::uint32_t components) const {
  return lookup(*this, name, FieldKind::node, components).data;
}

const std::vector<double>& MeshFile::elem_field(const std::string& name, std::uint32_t components) const {
  return lookup(*this, name, FieldKind::elem, components).data;
}

const std::string& MeshFile::text(const std::string& name) const {
  auto it = fields.find(name);
  if (it == fields.end() || it->second.kind != FieldKind::text)
    throw ValidationError("mesh has no text field '" + name + "'");
  return it->second.text;
}

void write_ctmesh(const std::filesystem::path& path, const MeshFile& in) {
  MeshFile f = in;
  const Mesh& m = f.mesh;
  if (!m.surface.empty()) {
    std::vector<double> s(m.surface.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(m.surface[i]);
    f.set_node_field("surface", s);
  }
  const HeartFrame& fr = m.frame;
  std::vector<double> frame;
  for (const Vec3* v : {&fr.base_center, &fr.axis, &fr.rt_zero, &fr.rt_quarter})
    frame.insert(frame.end(), v->data(), v->data() + 3);
  f.set_global("frame", frame);
  f.set_global("edge_target", std::vector<double>{m.edge_target});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, 8);
  put<std::uint64_t>(os, m.nodes.size());
  for (const auto& p : m.nodes) put_array(os, p.data(), 3);
  put<std::uint64_t>(os, m.tets.size());
  for (const auto& t : m.tets) put_array(os, t.data(), 4);
  for (const auto& [name, field] : f.fields) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(field.kind));
    put<std::uint32_t>(os, field.components);
    if (field.kind == FieldKind::text)
      os.write(field.text.data(), static_cast<std::streamsize>(field.text.size()));
    else
      put_array(os, field.data.data(), field.data.size());
  }
  if (!os) throw IoError("write failed: " + path.string());
}

MeshFile read_ctmesh(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != std::string(kMagic, 8))
    throw IoError("not a CTMESH1 file: " + path.string());
  MeshFile f;
  auto n = get<std::uint64_t>(is, path);
  f.mesh.nodes.resize(n);
  for (auto& p : f.mesh.nodes) get_array(is, p.data(), 3, path);
  auto m = get<std::uint64_t>(is, path);
  f.mesh.tets.resize(m);
  for (auto& t : f.mesh.tets) get_array(is, t.data(), 4, path);

  while (is.peek() != std::char_traits<char>::eof()) {
    auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw IoError("corrupt field name length in " + path.string());
    std::string name(len, '\0');
    get_array(is, name.data(), len, path);
    auto kind_raw = get<std::uint8_t>(is, path);
    if (kind_raw > 3) throw IoError("unknown field kind in " + path.string());
    Field field;
    field.kind = static_cast<FieldKind>(kind_raw);
    field.components = get<std::uint32_t>(is, path);
    if (field.kind == FieldKind::text) {
      field.text.resize(field.components);
      get_array(is, field.text.data(), field.components, path);
    } else {
      field.data.resize(static_cast<std::size_t>(field.components) * entity_count(f, field.kind));
      get_array(is, field.data.data(), field.data.size(), path);
    }
    f.fields[name] = std::move(field);
  }

  for (auto v : f.mesh.tets)
    for (auto i : v)
      if (i >= n) throw ValidationError("tet index out of range in " + path.string());

  if (auto it = f.fields.find("surface"); it != f.fields.end()) {
    f.mesh.surface.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = it->second.data[i];
      if (v < 0 || v > 4) throw ValidationError("invalid surface tag in " + path.string());
      f.mesh.surface[i] = static_cast<SurfaceTag>(static_cast<int>(v));
    }
    f.fields.erase(it);
  }
  if (auto it = f.fields.find("frame"); it != f.fields.end() && it->second.data.size() == 12) {
    const auto& d = it->second.data;
    f.mesh.frame.base_center = Vec3(d[0], d[1], d[2]);
    f.mesh.frame.axis = Vec3(d[3], d[4], d[5]);
    f.mesh.frame.rt_zero = Vec3(d[6], d[7], d[8]);
    f.mesh.frame.rt_quarter = Vec3(d[9], d[10], d[11]);
    f.fields.erase(it);
  }
  if (auto it = f.fields.find("edge_target"); it != f.fields.end() && it->second.data.size() == 1) {
    f.mesh.edge_target = it->second.data[0];
    f.fields.erase(it);
  }
  return f;
}

}  // namespace cardiotwin
