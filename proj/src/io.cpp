// SPDX-License-Identifier: Apache-2.0

#include "qptrap/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qptrap/errors.hpp"

namespace qptrap::io {

namespace {

constexpr std::size_t k_header_bytes = 64;
constexpr char k_magic[4] = {'A', 'B', 'S', 'R'};

void put_bytes(std::vector<char>& buf, std::size_t offset, const void* src, std::size_t n) {
  std::memcpy(buf.data() + offset, src, n);
}

template <typename T>
T take(const char* buf, std::size_t offset) {
  T v;
  std::memcpy(&v, buf + offset, sizeof(T));
  return v;
}

[[noreturn]] void io_fail(const std::string& path, const std::string& what) {
  throw IoError(path + ": " + what);
}

using nlohmann::ordered_json;

ordered_json fit_result_to_json(const lsq::FitResult& r) {
  ordered_json j;
  j["status"] = lsq::to_string(r.status);
  j["names"] = r.names;
  j["estimates"] = r.estimates;
  j["uncertainties"] = r.uncertainties;
  j["residual_norm"] = r.residual_norm;
  j["dof"] = r.dof;
  j["notes"] = r.notes;
  return j;
}

lsq::FitResult fit_result_from_json(const ordered_json& j) {
  lsq::FitResult r;
  const std::string s = j.at("status").get<std::string>();
  if (s == "converged")
    r.status = lsq::FitStatus::converged;
  else if (s == "singular")
    r.status = lsq::FitStatus::singular;
  else
    r.status = lsq::FitStatus::max_iter;
  r.names = j.at("names").get<std::vector<std::string>>();
  r.estimates = j.at("estimates").get<std::vector<double>>();
  r.uncertainties = j.at("uncertainties").get<std::vector<double>>();
  r.residual_norm = j.at("residual_norm").get<double>();
  r.dof = j.at("dof").get<int>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

ordered_json baselines_to_json(const fit::Baselines& b) {
  ordered_json arr = ordered_json::array();
  for (const auto& [depth, value] : b) {
    ordered_json e;
    e["delta_a_uev"] = depth;
    e["value_hz"] = value;
    arr.push_back(e);
  }
  return arr;
}

fit::Baselines baselines_from_json(const ordered_json& arr) {
  fit::Baselines b;
  for (const auto& e : arr) b[e.at("delta_a_uev").get<double>()] = e.at("value_hz").get<double>();
  return b;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_record(const std::string& path, const Record& record) {
  std::vector<char> header(k_header_bytes, 0);
  put_bytes(header, 0, k_magic, 4);
  const std::uint16_t version = record_format_version;
  put_bytes(header, 4, &version, 2);
  put_bytes(header, 8, &record.f_s, 8);
  const std::uint64_t count = record.size();
  put_bytes(header, 16, &count, 8);
  put_bytes(header, 24, &record.meta.temperature_k, 8);
  put_bytes(header, 32, &record.meta.flux, 8);
  put_bytes(header, 40, &record.meta.power_dbm, 8);
  put_bytes(header, 48, &record.meta.seed, 8);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(record.iq.data()),
            static_cast<std::streamsize>(record.iq.size() * sizeof(float)));
  if (!out) io_fail(path, "write failed");
}

Record read_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  std::vector<char> header(k_header_bytes);
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  if (in.gcount() != static_cast<std::streamsize>(k_header_bytes))
    io_fail(path, "truncated header");
  if (std::memcmp(header.data(), k_magic, 4) != 0) io_fail(path, "bad magic, not an ABSR record");
  const auto version = take<std::uint16_t>(header.data(), 4);
  if (version != record_format_version)
    io_fail(path, "unsupported record version " + std::to_string(version));

  Record rec;
  rec.f_s = take<double>(header.data(), 8);
  const auto count = take<std::uint64_t>(header.data(), 16);
  rec.meta.temperature_k = take<double>(header.data(), 24);
  rec.meta.flux = take<double>(header.data(), 32);
  rec.meta.power_dbm = take<double>(header.data(), 40);
  rec.meta.seed = take<std::uint64_t>(header.data(), 48);

  if (count > (1ull << 40)) io_fail(path, "implausible sample count");
  rec.iq.resize(2 * count);
  in.read(reinterpret_cast<char*>(rec.iq.data()),
          static_cast<std::streamsize>(rec.iq.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(rec.iq.size() * sizeof(float)))
    io_fail(path, "truncated payload");
  return rec;
}

void write_dataset(const std::string& path, const std::vector<fit::SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out << dataset_header << "\n";
  for (const fit::SweepRow& r : rows) {
    out << format_double(r.t_k) << ',' << format_double(r.flux) << ','
        << format_double(r.delta_a_uev) << ',' << format_double(r.gamma_trap_hz) << ','
        << format_double(r.gamma_release_hz) << ',' << format_double(r.n_bar) << ','
        << format_double(r.eff_fs_hz) << ',' << format_double(r.snr) << ',' << r.flags << "\n";
  }
  if (!out) io_fail(path, "write failed");
}

std::vector<fit::SweepRow> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line)) io_fail(path, "empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != dataset_header) io_fail(path, "unexpected dataset header: " + line);

  std::vector<fit::SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9)
      io_fail(path, "line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected 9");
    fit::SweepRow r;
    try {
      r.t_k = std::stod(fields[0]);
      r.flux = std::stod(fields[1]);
      r.delta_a_uev = std::stod(fields[2]);
      r.gamma_trap_hz = std::stod(fields[3]);
      r.gamma_release_hz = std::stod(fields[4]);
      r.n_bar = std::stod(fields[5]);
      r.eff_fs_hz = std::stod(fields[6]);
      r.snr = std::stod(fields[7]);
      r.flags = static_cast<std::uint32_t>(std::stoul(fields[8]));
    } catch (const std::exception&) {
      io_fail(path, "line " + std::to_string(line_no) + " has a malformed number");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  ordered_json j;
  j["format"] = "qptrap-manifest";
  j["version"] = 1;
  j["base_seed"] = manifest.base_seed;
  j["records"] = ordered_json::array();
  for (const ManifestEntry& e : manifest.entries) {
    ordered_json r;
    r["file"] = e.file;
    r["t_k"] = e.t_k;
    r["flux"] = e.flux;
    r["power_dbm"] = e.power_dbm;
    r["segment"] = e.segment;
    r["seed"] = e.seed;
    j["records"].push_back(r);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) io_fail(path, "write failed");
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    io_fail(path, std::string("not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "qptrap-manifest")
      io_fail(path, "not a qptrap manifest");
    Manifest m;
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      ManifestEntry e;
      e.file = r.at("file").get<std::string>();
      e.t_k = r.at("t_k").get<double>();
      e.flux = r.at("flux").get<double>();
      e.power_dbm = r.at("power_dbm").get<double>();
      e.segment = r.at("segment").get<int>();
      e.seed = r.at("seed").get<std::uint64_t>();
      m.entries.push_back(e);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    io_fail(path, std::string("malformed manifest: ") + e.what());
  }
}

void write_fit_report(const std::string& path, const FitReport& report) {
  ordered_json j;
  j["format"] = "qptrap-fit-report";
  j["version"] = 1;
  j["parameters"]["trap_stage1"] = fit_result_to_json(report.trap_stage1);
  j["parameters"]["trap_stage2"] = fit_result_to_json(report.trap_stage2);
  j["parameters"]["release"] = fit_result_to_json(report.release);
  j["alpha_m"] = ordered_json::array();
  for (const auto& [depth, r] : report.alpha_m) {
    ordered_json e = fit_result_to_json(r);
    e["delta_a_uev"] = depth;
    j["alpha_m"].push_back(e);
  }
  j["baselines"]["trap"] = baselines_to_json(report.trap0);
  j["baselines"]["release"] = baselines_to_json(report.release0);
  j["baselines"]["n_bar"] = baselines_to_json(report.nbar0);
  j["consistency"]["delta_a_uev"] = report.consistency.delta_a_uev;
  j["consistency"]["release_baseline_hz"] = report.consistency.release_baseline_hz;
  j["consistency"]["alpha_over_alpha_m_hz"] = report.consistency.alpha_over_alpha_m_hz;
  j["consistency"]["ratio"] = report.consistency.ratio;
  j["consistency"]["nrms"] = report.consistency.nrms;
  j["consistency"]["threshold"] = report.consistency.threshold;
  j["consistency"]["flagged"] = report.consistency.flagged;
  j["warnings"] = report.warnings;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) io_fail(path, "write failed");
}

FitReport read_fit_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    io_fail(path, std::string("not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "qptrap-fit-report")
      io_fail(path, "not a qptrap fit report");
    FitReport rep;
    rep.trap_stage1 = fit_result_from_json(j.at("parameters").at("trap_stage1"));
    rep.trap_stage2 = fit_result_from_json(j.at("parameters").at("trap_stage2"));
    rep.release = fit_result_from_json(j.at("parameters").at("release"));
    for (const auto& e : j.at("alpha_m"))
      rep.alpha_m.emplace(e.at("delta_a_uev").get<double>(), fit_result_from_json(e));
    rep.trap0 = baselines_from_json(j.at("baselines").at("trap"));
    rep.release0 = baselines_from_json(j.at("baselines").at("release"));
    rep.nbar0 = baselines_from_json(j.at("baselines").at("n_bar"));
    const auto& c = j.at("consistency");
    rep.consistency.delta_a_uev = c.at("delta_a_uev").get<std::vector<double>>();
    rep.consistency.release_baseline_hz =
        c.at("release_baseline_hz").get<std::vector<double>>();
    rep.consistency.alpha_over_alpha_m_hz =
        c.at("alpha_over_alpha_m_hz").get<std::vector<double>>();
    rep.consistency.ratio = c.at("ratio").get<std::vector<double>>();
    rep.consistency.nrms = c.at("nrms").get<double>();
    rep.consistency.threshold = c.at("threshold").get<double>();
    rep.consistency.flagged = c.at("flagged").get<bool>();
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    return rep;
  } catch (const nlohmann::json::exception& e) {
    io_fail(path, std::string("malformed fit report: ") + e.what());
  }
}

}  // namespace qptrap::io
