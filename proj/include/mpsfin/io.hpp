#pragma once

#include <filesystem>
#include <string>

#include "mpsfin/mps.hpp"
#include "mpsfin/paths.hpp"

#include "json.hpp"

namespace mpsfin {

// Paths CSV: header "t0,t1,..." or "t1,..." depending on whether the
// deterministic initial column is present, then one path per line. Floats
// are written in shortest round-trip form, so writing and re-reading is
// lossless and byte-stable.
void write_paths_csv(const std::filesystem::path& file, const PathSet& paths);
PathSet read_paths_csv(const std::filesystem::path& file, double dt = 0.0);

// Model file, binary little-endian:
//   magic "MPS1", u32 version = 1, u32 M, u32 m, f64 x_min, f64 x_max,
//   u32 bond_dims[M+1], then the site tensors in order, each row-major f64
//   with index order (left bond, physical, right bond).
void write_mps(const std::filesystem::path& file, const Mps& mps);
Mps read_mps(const std::filesystem::path& file);

// JSON with 2-space indentation, sorted keys and a trailing newline.
void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);

std::string format_double(double v); // shortest round-trip representation

} // namespace mpsfin
