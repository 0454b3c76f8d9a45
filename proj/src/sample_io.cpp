#include "cardiotwin/sample_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "cardiotwin/ecg.hpp"
#include "cardiotwin/errors.hpp"
#include "cardiotwin/mesh_io.hpp"

namespace cardiotwin::cohort {

namespace {

constexpr char kMagic[] = "CTSAMP1\n";
constexpr std::size_t kMagicLen = 8;
constexpr std::size_t kLeads = 8;
constexpr const char* kManifestHeader = "file,mesh_id,scenario,transmurality,seed,sha256,split,status";

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated sample: " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  for (float f : v) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(os, u);
  }
}

std::vector<float> get_floats(std::istream& is, std::size_t n, const std::string& what) {
  std::vector<float> v(n);
  for (auto& f : v) {
    std::uint32_t u = get_u32(is, what);
    std::memcpy(&f, &u, 4);
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_schema_meta(const CohortSample& s, std::vector<std::string>& problems) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(s.metadata);
  } catch (const std::exception& e) {
    problems.push_back(std::string("metadata is not valid JSON: ") + e.what());
    return;
  }
  for (const char* key : {"format", "V", "T", "leads", "x_columns", "labels", "scenario", "seed", "mesh_id"})
    if (!meta.contains(key)) problems.push_back(std::string("metadata lacks '") + key + "'");
  if (meta.contains("V") && meta["V"] != s.nodes) problems.push_back("metadata V disagrees with the payload");
  if (meta.contains("T") && meta["T"] != s.samples) problems.push_back("metadata T disagrees with the payload");
}

ValidationReport validate_file(const std::filesystem::path& path, std::size_t expected_nodes,
                               std::size_t expected_samples) {
  ValidationReport r;
  const std::string ext = path.extension().string();
  const std::string where = path.string() + ": ";
  try {
    if (ext == ".ctsamp") {
      const auto s = read_sample(path);
      for (auto& p : check_sample(s, expected_nodes, expected_samples)) r.problems.push_back(where + p);
      std::vector<std::string> meta_problems;
      check_schema_meta(s, meta_problems);
      for (auto& p : meta_problems) r.problems.push_back(where + p);
    } else if (ext == ".ctecg") {
      const auto e = ecg::read_ctecg(path);
      if (e.samples() != expected_samples)
        r.problems.push_back(where + "expected " + std::to_string(expected_samples) + " samples, found " +
                             std::to_string(e.samples()));
      for (const auto& lead : e.leads)
        for (double v : lead)
          if (!std::isfinite(v)) {
            r.problems.push_back(where + "non-finite lead value");
            goto done;
          }
    done:;
    } else if (ext == ".ctmesh") {
      validate_mesh(read_ctmesh(path).mesh);
    } else {
      r.problems.push_back(where + "unknown file type");
    }
  } catch (const std::exception& e) {
    r.problems.push_back(where + e.what());
  }
  r.checked = 1;
  return r;
}

void validate_rows(const std::filesystem::path& dir, const std::vector<ManifestRow>& rows, std::size_t expected_nodes,
                   std::size_t expected_samples, ValidationReport& report) {
  for (const auto& row : rows) {
    ++report.checked;
    if (row.status.rfind("ok", 0) != 0) {
      report.problems.push_back(row.file + ": run " + row.status);
      continue;
    }
    const auto path = dir / row.file;
    if (!std::filesystem::exists(path)) {
      report.problems.push_back(row.file + ": missing");
      continue;
    }
    if (sha256_file(path) != row.sha256) report.problems.push_back(row.file + ": checksum mismatch");
    auto sub = validate_file(path, expected_nodes, expected_samples);
    for (auto& p : sub.problems) report.problems.push_back(std::move(p));
  }
}

}  // namespace

std::vector<std::uint8_t> CohortSample::one_hot() const {
  std::vector<std::uint8_t> out(y.size() * kLabelCount, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= kLabelCount) throw ValidationError("label out of range at node " + std::to_string(i));
    out[i * kLabelCount + y[i]] = 1;
  }
  return out;
}

void write_sample(const std::filesystem::path& path, const CohortSample& s) {
  if (s.x.size() != s.nodes * kXColumns || s.y.size() != s.nodes || s.s.size() != s.samples * kLeads)
    throw ValidationError("sample arrays disagree with V/T");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, kMagicLen);
  put_u32(os, static_cast<std::uint32_t>(s.metadata.size()));
  os.write(s.metadata.data(), static_cast<std::streamsize>(s.metadata.size()));
  put_u32(os, static_cast<std::uint32_t>(s.nodes));
  put_u32(os, static_cast<std::uint32_t>(s.samples));
  put_floats(os, s.x);
  put_floats(os, s.s);
  os.write(reinterpret_cast<const char*>(s.y.data()), static_cast<std::streamsize>(s.y.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

CohortSample read_sample(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw IoError(path.string() + " is not a CTSAMP1 file");
  CohortSample s;
  const std::uint32_t meta_len = get_u32(is, "metadata length");
  s.metadata.resize(meta_len);
  if (!is.read(s.metadata.data(), meta_len)) throw IoError("truncated sample: metadata");
  s.nodes = get_u32(is, "V");
  s.samples = get_u32(is, "T");
  s.x = get_floats(is, s.nodes * kXColumns, "X");
  s.s = get_floats(is, s.samples * kLeads, "S");
  s.y.resize(s.nodes);
  if (!is.read(reinterpret_cast<char*>(s.y.data()), static_cast<std::streamsize>(s.nodes)))
    throw IoError("truncated sample: Y");
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in " + path.string());
  return s;
}

std::vector<std::string> check_sample(const CohortSample& s, std::size_t expected_nodes,
                                      std::size_t expected_samples) {
  std::vector<std::string> p;
  if (s.nodes != expected_nodes)
    p.push_back("expected V = " + std::to_string(expected_nodes) + ", found " + std::to_string(s.nodes));
  if (s.samples != expected_samples)
    p.push_back("expected T = " + std::to_string(expected_samples) + ", found " + std::to_string(s.samples));
  if (s.x.size() != s.nodes * kXColumns) p.push_back("X is not V x 7");
  if (s.s.size() != s.samples * kLeads) p.push_back("S is not T x 8");
  if (s.y.size() != s.nodes) p.push_back("Y is not length V");
  for (float v : s.x)
    if (!std::isfinite(v)) {
      p.push_back("X holds non-finite values");
      break;
    }
  for (float v : s.s)
    if (!std::isfinite(v)) {
      p.push_back("S holds non-finite values");
      break;
    }
  for (auto y : s.y)
    if (y >= kLabelCount) {
      p.push_back("Y holds labels outside {0, 1, 2}");
      break;
    }
  return p;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kManifestHeader << "\n";
  for (const auto& r : rows)
    os << r.file << ',' << r.mesh_id << ',' << r.scenario << ',' << r.transmurality << ',' << r.seed << ','
       << r.sha256 << ',' << r.split << ',' << r.status << "\n";
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) throw IoError(path.string() + ": bad manifest header");
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
    ManifestRow r{c[0], c[1], c[2], c[3], 0, c[5], c[6], c[7]};
    try {
      std::size_t used = 0;
      r.seed = std::stoull(c[4], &used);
      if (used != c[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad seed '" + c[4] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

ValidationReport validate_path(const std::filesystem::path& path, std::size_t expected_nodes,
                               std::size_t expected_samples) {
  if (!std::filesystem::exists(path)) throw IoError(path.string() + " does not exist");
  if (!std::filesystem::is_directory(path)) return validate_file(path, expected_nodes, expected_samples);

  ValidationReport report;
  const auto manifest = path / kManifestName;
  if (!std::filesystem::exists(manifest)) {
    report.problems.push_back("missing " + std::string(kManifestName));
    return report;
  }
  const auto rows = read_manifest(manifest);
  if (rows.empty()) report.problems.push_back("manifest lists no samples");
  std::set<std::string> seen;
  for (const auto& r : rows)
    if (!seen.insert(r.file).second) report.problems.push_back(r.file + ": listed twice");
  validate_rows(path, rows, expected_nodes, expected_samples, report);
  const auto replicates = path / kReplicateManifestName;
  if (std::filesystem::exists(replicates))
    validate_rows(path, read_manifest(replicates), expected_nodes, expected_samples, report);
  return report;
}

}  // namespace cardiotwin::cohort
