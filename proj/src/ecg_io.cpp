#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cardiotwin/ecg.hpp"
#include "cardiotwin/errors.hpp"

namespace cardiotwin::ecg {

namespace {

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string lead_header() {
  std::string s;
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    if (l) s += ',';
    s += kLeadNames[l];
  }
  return s;
}

}  // namespace

void write_ctecg(const std::filesystem::path& path, const EcgRecord& record) {
  const std::size_t n = record.samples();
  for (const auto& lead : record.leads)
    if (lead.size() != n) throw ValidationError("record leads differ in length");
  if (record.metadata.find('\n') != std::string::npos) throw ValidationError("record metadata must be one line");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "# CTECG1\n"
     << "# leads: " << lead_header() << "\n"
     << "# samples: " << n << "\n"
     << "# sample_period_ms: " << format_g(record.sample_period, 17) << "\n"
     << "# scenario: " << record.scenario << "\n"
     << "# seed: " << record.seed << "\n"
     << "# normalized: " << (record.normalized ? 1 : 0) << "\n"
     << "# scale: " << format_g(record.scale, 17) << "\n"
     << "# metadata: " << record.metadata << "\n"
     << lead_header() << "\n";
  std::string line;
  for (std::size_t k = 0; k < n; ++k) {
    line.clear();
    for (std::size_t l = 0; l < kLeadCount; ++l) {
      if (l) line += ',';
      line += format_g(record.leads[l][k], 9);
    }
    line += '\n';
    os << line;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

EcgRecord read_ctecg(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  auto bad = [&](const std::string& why) { return ValidationError(path.string() + ": " + why); };

  std::string line;
  if (!std::getline(is, line) || line != "# CTECG1") throw bad("missing CTECG1 header");
  EcgRecord r;
  std::size_t samples = 0;
  bool have_samples = false, have_period = false;
  while (std::getline(is, line) && line.rfind("# ", 0) == 0) {
    auto colon = line.find(": ");
    std::string key = line.substr(2, colon == std::string::npos ? std::string::npos : colon - 2);
    std::string value = colon == std::string::npos ? "" : line.substr(colon + 2);
    if (key == "leads") {
      if (value != lead_header()) throw bad("unexpected lead set '" + value + "'");
    } else if (key == "samples") {
      samples = std::stoull(value);
      have_samples = true;
    } else if (key == "sample_period_ms") {
      r.sample_period = std::strtod(value.c_str(), nullptr);
      have_period = true;
    } else if (key == "scenario") {
      r.scenario = value;
    } else if (key == "seed") {
      r.seed = std::stoull(value);
    } else if (key == "normalized") {
      r.normalized = value == "1";
    } else if (key == "scale") {
      r.scale = std::strtod(value.c_str(), nullptr);
    } else if (key == "metadata") {
      r.metadata = value;
    }
  }
  if (!have_samples || !have_period) throw bad("header lacks samples or sample_period_ms");
  if (line != lead_header()) throw bad("missing CSV column header");
  for (auto& lead : r.leads) lead.resize(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    if (!std::getline(is, line)) throw bad("truncated sample rows");
    const char* p = line.c_str();
    for (std::size_t l = 0; l < kLeadCount; ++l) {
      char* end = nullptr;
      r.leads[l][k] = std::strtod(p, &end);
      if (end == p) throw bad("malformed sample row " + std::to_string(k));
      p = end;
      if (l + 1 < kLeadCount) {
        if (*p != ',') throw bad("malformed sample row " + std::to_string(k));
        ++p;
      } else if (*p != '\0') {
        throw bad("extra columns in sample row " + std::to_string(k));
      }
    }
  }
  if (std::getline(is, line) && !line.empty()) throw bad("trailing data after the sample rows");
  return r;
}

}  // namespace cardiotwin::ecg
