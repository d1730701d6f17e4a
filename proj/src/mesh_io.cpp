#include "partgraph/mesh_io.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/textio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace partgraph {

namespace {

Vector3 parse_vertex(std::string_view line) {
    const auto tokens = split_tokens(line);
    if (tokens.size() < 3) {
        throw ParseError("vertex line needs 3 coordinates: '" + std::string(line) + "'");
    }
    return {parse_double(tokens[0]), parse_double(tokens[1]), parse_double(tokens[2])};
}

Triangle parse_face(std::string_view line, Index vertex_count) {
    const auto tokens = split_tokens(line);
    if (tokens.size() < 4) {
        throw ParseError("face line needs a count and 3 indices: '" + std::string(line) + "'");
    }
    if (parse_int(tokens[0]) != 3) {
        throw ParseError("only triangular faces are supported: '" + std::string(line) + "'");
    }
    Triangle tri;
    for (int k = 0; k < 3; ++k) {
        const long long idx = parse_int(tokens[static_cast<std::size_t>(k) + 1]);
        if (idx < 0 || idx >= vertex_count) {
            throw ParseError("vertex index out of range: " + std::to_string(idx));
        }
        tri[static_cast<std::size_t>(k)] = static_cast<Index>(idx);
    }
    return tri;
}

void parse_off(std::string_view bytes, TriangleMesh& mesh) {
    LineReader reader(bytes);
    std::string_view line;
    if (!reader.next(line)) {
        throw ParseError("empty OFF file");
    }
    auto tokens = split_tokens(line);
    if (tokens.empty() || !tokens[0].starts_with("OFF")) {
        throw ParseError("missing OFF header");
    }
    // ModelNet ships files with the counts glued to the header ("OFF490 518 0")
    // or on the same line; both collapse to the counts tokens below.
    std::vector<std::string_view> counts;
    if (tokens[0].size() > 3) {
        counts.push_back(tokens[0].substr(3));
        counts.insert(counts.end(), tokens.begin() + 1, tokens.end());
    } else if (tokens.size() > 1) {
        counts.insert(counts.end(), tokens.begin() + 1, tokens.end());
    } else {
        if (!reader.next(line)) {
            throw ParseError("missing OFF counts line");
        }
        counts = split_tokens(line);
    }
    if (counts.size() < 2) {
        throw ParseError("OFF counts line needs vertex and face counts");
    }
    const long long nv = parse_int(counts[0]);
    const long long nf = parse_int(counts[1]);
    if (nv < 0 || nf < 0) {
        throw ParseError("negative OFF counts");
    }

    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long long i = 0; i < nv; ++i) {
        if (!reader.next(line)) {
            throw ParseError("OFF vertex count mismatch: expected " + std::to_string(nv));
        }
        mesh.vertices.push_back(parse_vertex(line));
    }
    mesh.triangles.reserve(static_cast<std::size_t>(nf));
    for (long long i = 0; i < nf; ++i) {
        if (!reader.next(line)) {
            throw ParseError("OFF face count mismatch: expected " + std::to_string(nf));
        }
        mesh.triangles.push_back(parse_face(line, mesh.vertex_count()));
    }
}

void parse_ply(std::string_view bytes, TriangleMesh& mesh) {
    LineReader reader(bytes);
    std::string_view line;
    if (!reader.next(line) || split_tokens(line) != std::vector<std::string_view>{"ply"}) {
        throw ParseError("missing ply magic");
    }

    long long n_vertices = -1;
    long long n_faces = -1;
    int x_pos = -1, y_pos = -1, z_pos = -1;
    int vertex_props = 0;
    bool in_vertex_element = false;
    bool saw_format = false;

    while (true) {
        if (!reader.next(line)) {
            throw ParseError("unterminated ply header");
        }
        const auto tokens = split_tokens(line);
        if (tokens.empty()) {
            continue;
        }
        if (tokens[0] == "end_header") {
            break;
        }
        if (tokens[0] == "comment" || tokens[0] == "obj_info") {
            continue;
        }
        if (tokens[0] == "format") {
            if (tokens.size() < 2 || tokens[1] != "ascii") {
                throw ParseError("only ascii ply is supported");
            }
            saw_format = true;
        } else if (tokens[0] == "element") {
            if (tokens.size() < 3) {
                throw ParseError("malformed element line");
            }
            in_vertex_element = tokens[1] == "vertex";
            if (tokens[1] == "vertex") {
                n_vertices = parse_int(tokens[2]);
            } else if (tokens[1] == "face") {
                n_faces = parse_int(tokens[2]);
            }
        } else if (tokens[0] == "property" && in_vertex_element) {
            if (tokens.size() >= 3 && tokens[1] != "list") {
                const std::string_view name = tokens.back();
                if (name == "x") x_pos = vertex_props;
                if (name == "y") y_pos = vertex_props;
                if (name == "z") z_pos = vertex_props;
                ++vertex_props;
            }
        }
    }
    if (!saw_format) {
        throw ParseError("ply header missing format line");
    }
    if (n_vertices < 0 || n_faces < 0) {
        throw ParseError("ply header missing vertex or face element");
    }
    if (x_pos < 0 || y_pos < 0 || z_pos < 0) {
        throw ParseError("ply vertex element missing x/y/z properties");
    }

    mesh.vertices.reserve(static_cast<std::size_t>(n_vertices));
    for (long long i = 0; i < n_vertices; ++i) {
        if (!reader.next(line)) {
            throw ParseError("ply vertex count mismatch");
        }
        const auto tokens = split_tokens(line);
        if (static_cast<int>(tokens.size()) < vertex_props) {
            throw ParseError("short ply vertex line: '" + std::string(line) + "'");
        }
        mesh.vertices.push_back({parse_double(tokens[static_cast<std::size_t>(x_pos)]),
                                 parse_double(tokens[static_cast<std::size_t>(y_pos)]),
                                 parse_double(tokens[static_cast<std::size_t>(z_pos)])});
    }
    mesh.triangles.reserve(static_cast<std::size_t>(n_faces));
    for (long long i = 0; i < n_faces; ++i) {
        if (!reader.next(line)) {
            throw ParseError("ply face count mismatch");
        }
        mesh.triangles.push_back(parse_face(line, mesh.vertex_count()));
    }
}

} // namespace

LoadResult load_mesh(std::string_view bytes, MeshFormat format, bool strict) {
    LoadResult result;
    switch (format) {
    case MeshFormat::Off:
        parse_off(bytes, result.mesh);
        break;
    case MeshFormat::PlyAscii:
        parse_ply(bytes, result.mesh);
        break;
    }

    // Drop zero-area triangles before any adjacency or normal work.
    std::vector<Triangle> kept;
    kept.reserve(result.mesh.triangles.size());
    TriangleMesh& mesh = result.mesh;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vector3 cross = mesh.triangle_cross(static_cast<Index>(t));
        if (cross.norm() < 1e-12) {
            ++result.degenerate_dropped;
        } else {
            kept.push_back(mesh.triangles[t]);
        }
    }
    mesh.triangles = std::move(kept);
    result.nonmanifold_edges = build_adjacency(mesh, strict);
    return result;
}

LoadResult load_mesh_file(const std::filesystem::path& path, bool strict) {
    const std::string ext = path.extension().string();
    MeshFormat format;
    if (ext == ".off" || ext == ".OFF") {
        format = MeshFormat::Off;
    } else if (ext == ".ply" || ext == ".PLY") {
        format = MeshFormat::PlyAscii;
    } else {
        throw ParseError("unknown mesh extension: " + path.string());
    }
    return load_mesh(read_text_file(path), format, strict);
}

std::string write_off(const TriangleMesh& mesh) {
    std::string out = "OFF\n";
    out += std::to_string(mesh.vertices.size()) + " " + std::to_string(mesh.triangles.size()) + " 0\n";
    for (const Vector3& v : mesh.vertices) {
        out += format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z()) + "\n";
    }
    for (const Triangle& t : mesh.triangles) {
        out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write file: " + tmp.string());
        }
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
    std::filesystem::rename(tmp, path);
}

} // namespace partgraph
