#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/retrieval.hpp"

namespace geoflow {

// Embedding dataset files (see docs/FORMATS.md):
//  * NDJSON: a header line declaring dimensions, then one record per line
//      {"id": str, "lat": f, "lon": f, "modality": "vgi"|"rsi", "vec": [...]}
//  * CSV: "id,lat,lon,modality,vec" with the vector packed as base64 of
//      little-endian 32-bit floats.

namespace detail {

inline const char* kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    std::uint32_t b = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) b |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) b |= static_cast<std::uint32_t>(data[i + 2]);
    out.push_back(kBase64Alphabet[(b >> 18) & 63]);
    out.push_back(kBase64Alphabet[(b >> 12) & 63]);
    out.push_back(i + 1 < len ? kBase64Alphabet[(b >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kBase64Alphabet[b & 63] : '=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s,
                                               long line) {
  auto value_of = [line](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    throw ParseError("invalid base64 character", line);
  };
  if (s.size() % 4 != 0) throw ParseError("base64 length not a multiple of 4", line);
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    const int pad = (s[i + 2] == '=' ? 2 : (s[i + 3] == '=' ? 1 : 0));
    std::uint32_t b = (static_cast<std::uint32_t>(value_of(s[i])) << 18) |
                      (static_cast<std::uint32_t>(value_of(s[i + 1])) << 12);
    if (pad < 2) b |= static_cast<std::uint32_t>(value_of(s[i + 2])) << 6;
    if (pad < 1) b |= static_cast<std::uint32_t>(value_of(s[i + 3]));
    out.push_back(static_cast<std::uint8_t>((b >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((b >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(b & 0xff));
  }
  return out;
}

inline std::string pack_vec_f32(const Eigen::VectorXd& v) {
  std::vector<std::uint8_t> bytes(v.size() * 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const float f = static_cast<float>(v[i]);
    std::memcpy(bytes.data() + 4 * i, &f, 4);
  }
  return base64_encode(bytes.data(), bytes.size());
}

inline Eigen::VectorXd unpack_vec_f32(const std::string& b64, long line) {
  const auto bytes = base64_decode(b64, line);
  if (bytes.size() % 4 != 0)
    throw ParseError("packed vector byte count not a multiple of 4", line);
  Eigen::VectorXd v(bytes.size() / 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    v[i] = static_cast<double>(f);
  }
  return v;
}

inline GeoCoord parse_geo(double lat, double lon, long line) {
  try {
    return GeoCoord::make(lat, lon);
  } catch (const DomainError& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace detail

inline void save_embeddings(const std::string& path,
                            const std::vector<EmbeddingRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  nlohmann::json header;
  header["format"] = "geoflow-embeddings";
  header["version"] = 1;
  for (const auto& r : records) {
    const char* key = r.modality == Modality::Vgi ? "vgi_dim" : "rsi_dim";
    if (!header.contains(key)) header[key] = r.vec.size();
  }
  os << header.dump() << "\n";
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["lat"] = r.geo.lat_deg;
    j["lon"] = r.geo.lon_deg;
    j["modality"] = to_string(r.modality);
    j["vec"] = std::vector<double>(r.vec.data(), r.vec.data() + r.vec.size());
    os << j.dump() << "\n";
  }
  if (!os) throw ParseError("write failure: " + path);
}

inline void save_embeddings_csv(const std::string& path,
                                const std::vector<EmbeddingRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "id,lat,lon,modality,vec\n";
  os.precision(17);
  for (const auto& r : records)
    os << r.id << ',' << r.geo.lat_deg << ',' << r.geo.lon_deg << ','
       << to_string(r.modality) << ',' << detail::pack_vec_f32(r.vec) << "\n";
  if (!os) throw ParseError("write failure: " + path);
}

inline std::vector<EmbeddingRecord> load_embeddings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open dataset: " + path);
  std::string line;
  long lineno = 0;
  std::vector<EmbeddingRecord> records;
  std::set<std::string> seen;
  std::optional<Eigen::Index> vgi_dim, rsi_dim;

  // first non-empty line decides the format
  std::string first;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    first = line;
    break;
  }
  if (first.empty()) throw ParseError("no records in " + path);

  auto check_dims = [&](const EmbeddingRecord& r, long ln) {
    auto& expected = r.modality == Modality::Vgi ? vgi_dim : rsi_dim;
    if (!expected) {
      expected = r.vec.size();
    } else if (*expected != r.vec.size()) {
      throw DimensionError("embedding dimension mismatch at line " +
                           std::to_string(ln) + " (got " +
                           std::to_string(r.vec.size()) + ", expected " +
                           std::to_string(*expected) + ")");
    }
    if (!r.vec.allFinite())
      throw ParseError("non-finite embedding value", ln);
  };
  auto add = [&](EmbeddingRecord r, long ln) {
    if (!seen.insert(r.id).second) throw DuplicateIdError(r.id);
    check_dims(r, ln);
    records.push_back(std::move(r));
  };

  if (!first.empty() && first[0] == '{') {
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(first);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad header: ") + e.what(), lineno);
    }
    if (header.value("format", "") != "geoflow-embeddings")
      throw ParseError("missing geoflow-embeddings header", lineno);
    if (header.contains("vgi_dim"))
      vgi_dim = header["vgi_dim"].get<Eigen::Index>();
    if (header.contains("rsi_dim"))
      rsi_dim = header["rsi_dim"].get<Eigen::Index>();
    while (std::getline(is, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad record: ") + e.what(), lineno);
      }
      try {
        EmbeddingRecord r;
        r.id = j.at("id").get<std::string>();
        r.geo = detail::parse_geo(j.at("lat").get<double>(),
                                  j.at("lon").get<double>(), lineno);
        r.modality = modality_from_string(j.at("modality").get<std::string>());
        const auto vec = j.at("vec").get<std::vector<double>>();
        r.vec = Eigen::Map<const Eigen::VectorXd>(vec.data(),
                                                  static_cast<Eigen::Index>(
                                                      vec.size()));
        add(std::move(r), lineno);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad record field: ") + e.what(), lineno);
      }
    }
  } else {
    // CSV variant
    if (first.rfind("id,", 0) != 0)
      throw ParseError("expected CSV header 'id,lat,lon,modality,vec'",
                       lineno);
    while (std::getline(is, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::stringstream ss(line);
      std::string id, lat, lon, modality, vec;
      if (!std::getline(ss, id, ',') || !std::getline(ss, lat, ',') ||
          !std::getline(ss, lon, ',') || !std::getline(ss, modality, ',') ||
          !std::getline(ss, vec))
        throw ParseError("malformed CSV row", lineno);
      EmbeddingRecord r;
      r.id = id;
      try {
        r.geo = detail::parse_geo(std::stod(lat), std::stod(lon), lineno);
      } catch (const std::invalid_argument&) {
        throw ParseError("bad coordinate value", lineno);
      }
      r.modality = modality_from_string(modality);
      r.vec = detail::unpack_vec_f32(vec, lineno);
      add(std::move(r), lineno);
    }
  }
  if (records.empty()) throw ParseError("no records in " + path);
  return records;
}

// Prediction / truth files for the eval command: CSV "id,lat,lon".
struct GeoRow {
  std::string id;
  GeoCoord geo;
};

inline std::vector<GeoRow> load_geo_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path);
  std::string line;
  long lineno = 0;
  std::vector<GeoRow> rows;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("id,", 0) == 0) continue;  // header
    std::stringstream ss(line);
    std::string id, lat, lon;
    if (!std::getline(ss, id, ',') || !std::getline(ss, lat, ',') ||
        !std::getline(ss, lon))
      throw ParseError("malformed row (want id,lat,lon)", lineno);
    if (!seen.insert(id).second) throw DuplicateIdError(id);
    try {
      rows.push_back({id, detail::parse_geo(std::stod(lat), std::stod(lon),
                                            lineno)});
    } catch (const std::invalid_argument&) {
      throw ParseError("bad coordinate value", lineno);
    }
  }
  if (rows.empty()) throw ParseError("no records in " + path);
  return rows;
}

inline void save_geo_csv(const std::string& path,
                         const std::vector<GeoRow>& rows) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "id,lat,lon\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.id << ',' << r.geo.lat_deg << ',' << r.geo.lon_deg << "\n";
  if (!os) throw ParseError("write failure: " + path);
}

}  // namespace geoflow
