#pragma once

#include "partgraph/mesh.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

namespace partgraph {

enum class MeshFormat { Off, PlyAscii };

struct LoadResult {
    TriangleMesh mesh;
    std::size_t degenerate_dropped = 0; // zero-area triangles removed on load
    std::size_t nonmanifold_edges = 0;  // edges with > 2 incident triangles
};

// Parses mesh bytes of the declared format and builds adjacency. Degenerate
// triangles are dropped and counted; non-manifold edges throw in strict mode
// and are truncated to their two largest triangles otherwise. Both formats
// skip '#' comments and blank lines; PLY must be ascii.
LoadResult load_mesh(std::string_view bytes, MeshFormat format, bool strict = false);

// Reads the file and picks the format from the extension (.off / .ply).
LoadResult load_mesh_file(const std::filesystem::path& path, bool strict = false);

// OFF text with shortest round-trip number formatting, so identical meshes
// serialize byte-identically.
std::string write_off(const TriangleMesh& mesh);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

} // namespace partgraph
