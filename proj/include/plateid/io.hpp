#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plateid/assembly.hpp"
#include "plateid/constitutive.hpp"
#include "plateid/mesh.hpp"

namespace plateid {

namespace fs = std::filesystem;

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double x);

/// Mesh text format:
///   nodes <n>            then n lines "x y z"
///   elements <m>         then m lines of 6 node ids
///   boundaries <k>       then k lines "name count id id ..."
void write_mesh(const fs::path& path, const WedgeMesh& mesh);
WedgeMesh read_mesh(const fs::path& path);

/// One "ux uy uz" line per node.
void write_displacement(const fs::path& path, const DisplacementField& field);
DisplacementField read_displacement(const fs::path& path, const WedgeMesh& mesh);

/// n_el lines "element_id segment_id" (element ids from 0). Reading also
/// accepts a bare segment id per line.
void write_segment_map(const fs::path& path, const SegmentMap& segments);
SegmentMap read_segment_map(const fs::path& path);

/// One line per segment: "segment theta_1 ... theta_nf".
void write_params(const fs::path& path, const std::vector<MaterialParams>& params);
std::vector<MaterialParams> read_params(const fs::path& path);

/// n_b lines "name Rx Ry Rz".
void write_forces(const fs::path& path, const BoundaryForces& forces);
BoundaryForces read_forces(const fs::path& path);

/// One node id per line.
void write_node_list(const fs::path& path, const std::vector<std::size_t>& nodes);
std::vector<std::size_t> read_node_list(const fs::path& path);

/// "key=value" lines; '#' starts a comment. Duplicate keys are errors.
using KeyValues = std::map<std::string, std::string>;
void write_key_values(const fs::path& path, const KeyValues& kv);
KeyValues read_key_values(const fs::path& path);

/// Dense matrix dump, one row per line, plus a sidecar "<path>.rows" with
/// "free node dir" / "fixed boundary dir" per row.
void write_system(const fs::path& path, const EquilibriumSystem& system);

/// Writes `text` to `path`, creating parent directories.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace plateid
