#pragma once

// Debug dumps: the mesh as one JSON document, flow-state snapshots as a JSON
// header line followed by flat little-endian arrays.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sembench/error.hpp"
#include "sembench/mesh.hpp"
#include "sembench/state.hpp"

namespace sembench {

inline nlohmann::json mesh_to_json(const HexMesh& mesh) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& c : mesh.coords) coords.push_back({c[0], c[1], c[2]});
  return {{"header",
           {{"format", "sembench-mesh"},
            {"version", 1},
            {"p", mesh.order},
            {"E", mesh.num_elems},
            {"N", mesh.num_nodes},
            {"elems", mesh.elems},
            {"periodic", mesh.periodic},
            {"extents", mesh.extents}}},
          {"coords", coords},
          {"connec", mesh.connec}};
}

inline HexMesh mesh_from_json(const nlohmann::json& j) {
  const auto& h = j.at("header");
  if (h.value("format", "") != "sembench-mesh") throw ConfigError("not a sembench mesh dump");
  HexMesh m;
  m.order = h.at("p").get<int>();
  m.num_elems = h.at("E").get<std::size_t>();
  m.num_nodes = h.at("N").get<std::size_t>();
  m.elems = h.at("elems").get<std::array<int, 3>>();
  m.periodic = h.at("periodic").get<std::array<bool, 3>>();
  m.extents = h.at("extents").get<std::array<double, 3>>();
  m.coords = j.at("coords").get<std::vector<std::array<double, 3>>>();
  m.connec = j.at("connec").get<std::vector<index_t>>();
  const std::size_t q = m.nodes_per_elem();
  m.inv_atoijk.resize(q);
  for (std::size_t a = 0; a < q; ++a) m.inv_atoijk[a] = static_cast<index_t>(a);
  if (m.coords.size() != m.num_nodes || m.connec.size() != m.num_elems * q) {
    throw ConfigError("mesh dump sizes are inconsistent with its header");
  }
  return m;
}

inline void write_mesh(const std::string& path, const HexMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << mesh_to_json(mesh).dump() << '\n';
}

inline constexpr const char* kSnapshotFields[] = {"rho", "mom_x", "mom_y", "mom_z", "energy"};

template <typename Scalar>
void write_snapshot(std::ostream& os, const FlowState<Scalar>& s) {
  static_assert(std::endian::native == std::endian::little, "snapshots are little-endian");
  nlohmann::json header = {{"format", "sembench-state"},
                           {"version", 1},
                           {"precision", to_string(precision_of<Scalar>)},
                           {"scalar_bytes", sizeof(Scalar)},
                           {"num_nodes", s.size()},
                           {"fields", kSnapshotFields}};
  os << header.dump() << '\n';
  for (int f = 0; f < kNumConserved; ++f) {
    const auto& v = s.conserved(f);
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
  }
}

template <typename Scalar>
void write_snapshot(const std::string& path, const FlowState<Scalar>& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_snapshot(os, s);
}

/// Reads conserved fields back; primitives are left zeroed.
template <typename Scalar>
FlowState<Scalar> read_snapshot(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty snapshot");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "sembench-state") throw ConfigError("not a state snapshot");
  if (header.at("precision").get<std::string>() != to_string(precision_of<Scalar>)) {
    throw ConfigError("snapshot precision does not match the requested scalar type");
  }
  FlowState<Scalar> s(header.at("num_nodes").get<std::size_t>());
  for (int f = 0; f < kNumConserved; ++f) {
    auto& v = s.conserved(f);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
    if (!is) throw ConfigError("truncated snapshot");
  }
  return s;
}

}  // namespace sembench
