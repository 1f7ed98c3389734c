#include "specdeform/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "specdeform/error.hpp"

namespace specdeform {

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;

  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Content lines with comments stripped, paired with their 1-based line number.
std::vector<std::pair<std::size_t, std::string_view>> content_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(start, end - start);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!split_ws(line).empty()) lines.emplace_back(number, line);
    start = end + 1;
  }
  return lines;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + msg);
}

double to_double(std::string_view tok, std::size_t line) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_error(line, "invalid number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) parse_error(line, "non-finite coordinate");
  return v;
}

long long to_integer(std::string_view tok, std::size_t line) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_error(line, "invalid integer '" + std::string(tok) + "'");
  return v;
}

TriangleMesh build(std::vector<double>& coords, std::vector<int>& tris) {
  const auto n = static_cast<Eigen::Index>(coords.size() / 3);
  const auto f = static_cast<Eigen::Index>(tris.size() / 3);
  Coordinates v(n, 3);
  Triangles t(f, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) v(i, c) = coords[static_cast<std::size_t>(3 * i + c)];
  for (Eigen::Index i = 0; i < f; ++i)
    for (int c = 0; c < 3; ++c) t(i, c) = tris[static_cast<std::size_t>(3 * i + c)];
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh parse_off(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw Error(ErrorKind::Parse, "empty OFF content");

  auto header = split_ws(lines[0].second);
  if (header.front() != "OFF") parse_error(lines[0].first, "missing OFF header");
  header.erase(header.begin());
  std::size_t next = 1;
  if (header.empty()) {
    if (lines.size() < 2) throw Error(ErrorKind::Parse, "missing OFF counts line");
    header = split_ws(lines[1].second);
    next = 2;
  }
  const std::size_t count_line = lines[next - 1].first;
  if (header.size() != 3) parse_error(count_line, "expected 'N F E' counts");
  const long long nv = to_integer(header[0], count_line);
  const long long nf = to_integer(header[1], count_line);
  if (nv < 0 || nf < 0) parse_error(count_line, "negative element count");

  std::vector<double> coords;
  std::vector<int> tris;
  coords.reserve(static_cast<std::size_t>(nv) * 3);
  tris.reserve(static_cast<std::size_t>(nf) * 3);

  for (long long i = 0; i < nv; ++i, ++next) {
    if (next >= lines.size())
      throw Error(ErrorKind::Parse, "count mismatch: header declares " + std::to_string(nv) +
                                        " vertices but only " + std::to_string(i) + " are listed");
    const auto [ln, line] = lines[next];
    const auto tok = split_ws(line);
    if (tok.size() != 3)
      parse_error(ln, "count mismatch: expected vertex record " + std::to_string(i) + " of " +
                          std::to_string(nv) + " with 3 coordinates");
    for (const auto& t : tok) coords.push_back(to_double(t, ln));
  }
  for (long long i = 0; i < nf; ++i, ++next) {
    if (next >= lines.size())
      throw Error(ErrorKind::Parse, "count mismatch: header declares " + std::to_string(nf) +
                                        " faces but only " + std::to_string(i) + " are listed");
    const auto [ln, line] = lines[next];
    const auto tok = split_ws(line);
    const long long arity = to_integer(tok[0], ln);
    if (arity != 3) parse_error(ln, "non-triangle face with " + std::to_string(arity) + " vertices");
    if (tok.size() != 4) parse_error(ln, "face record must list exactly 3 indices");
    for (std::size_t c = 1; c < 4; ++c) {
      const long long idx = to_integer(tok[c], ln);
      if (idx < 0 || idx >= nv) parse_error(ln, "face index " + std::to_string(idx) + " out of range");
      tris.push_back(static_cast<int>(idx));
    }
  }
  if (next != lines.size()) parse_error(lines[next].first, "count mismatch: trailing records after declared elements");
  return build(coords, tris);
}

TriangleMesh parse_obj(std::string_view text) {
  std::vector<double> coords;
  std::vector<int> tris;
  struct PendingFace {
    std::size_t line;
    long long idx[3];
  };
  std::vector<PendingFace> faces;

  for (const auto& [ln, line] : content_lines(text)) {
    const auto tok = split_ws(line);
    if (tok[0] == "v") {
      if (tok.size() < 4) parse_error(ln, "vertex record needs 3 coordinates");
      for (std::size_t c = 1; c < 4; ++c) coords.push_back(to_double(tok[c], ln));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) parse_error(ln, "non-triangle face with " + std::to_string(tok.size() - 1) + " vertices");
      PendingFace face{ln, {}};
      const long long nv_so_far = static_cast<long long>(coords.size() / 3);
      for (std::size_t c = 1; c < 4; ++c) {
        auto ref = tok[c];
        if (auto slash = ref.find('/'); slash != std::string_view::npos) ref = ref.substr(0, slash);
        long long idx = to_integer(ref, ln);
        if (idx < 0) idx = nv_so_far + idx + 1;  // relative reference
        face.idx[c - 1] = idx - 1;
      }
      faces.push_back(face);
    }
    // vn, vt, o, g, s, usemtl, mtllib: ignored
  }
  const long long nv = static_cast<long long>(coords.size() / 3);
  for (const auto& face : faces) {
    for (long long idx : face.idx) {
      if (idx < 0 || idx >= nv) parse_error(face.line, "face index " + std::to_string(idx + 1) + " out of range");
      tris.push_back(static_cast<int>(idx));
    }
  }
  return build(coords, tris);
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::size_t count_components(std::size_t num_vertices, const Triangles& triangles) {
  DisjointSet ds(num_vertices);
  for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
    ds.unite(static_cast<std::size_t>(triangles(f, 0)), static_cast<std::size_t>(triangles(f, 1)));
    ds.unite(static_cast<std::size_t>(triangles(f, 1)), static_cast<std::size_t>(triangles(f, 2)));
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < num_vertices; ++i) roots += ds.find(i) == i;
  return roots;
}

TriangleMesh::TriangleMesh(Coordinates vertices, Triangles triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const auto n = vertices_.rows();
  if (n < 3) throw Error(ErrorKind::Validation, "mesh needs at least 3 vertices, got " + std::to_string(n));
  if (triangles_.rows() < 1) throw Error(ErrorKind::Validation, "mesh needs at least 1 triangle");
  for (Eigen::Index f = 0; f < triangles_.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int idx = triangles_(f, c);
      if (idx < 0 || idx >= n)
        throw Error(ErrorKind::Validation,
                    "triangle " + std::to_string(f) + " references vertex " + std::to_string(idx) + " out of range");
    }
    if (triangles_(f, 0) == triangles_(f, 1) || triangles_(f, 1) == triangles_(f, 2) ||
        triangles_(f, 0) == triangles_(f, 2))
      throw Error(ErrorKind::Validation, "triangle " + std::to_string(f) + " repeats a vertex");
  }
  const std::size_t components = count_components(static_cast<std::size_t>(n), triangles_);
  if (components != 1)
    throw Error(ErrorKind::Validation, "mesh is disconnected: " + std::to_string(components) + " components");
}

TriangleMesh parse_mesh(std::string_view content, MeshFormat format) {
  return format == MeshFormat::Off ? parse_off(content) : parse_obj(content);
}

std::string write_mesh(const TriangleMesh& mesh, MeshFormat format) {
  const auto& v = mesh.vertices();
  if (!v.allFinite()) throw Error(ErrorKind::Validation, "refusing to serialize mesh with non-finite coordinates");
  const auto& t = mesh.triangles();

  std::string out;
  out.reserve(static_cast<std::size_t>(v.rows()) * 64 + static_cast<std::size_t>(t.rows()) * 24);
  if (format == MeshFormat::Off) {
    out += "OFF\n";
    out += std::to_string(v.rows()) + ' ' + std::to_string(t.rows()) + " 0\n";
  }
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (format == MeshFormat::Obj) out += "v ";
    append_double(out, v(i, 0));
    out += ' ';
    append_double(out, v(i, 1));
    out += ' ';
    append_double(out, v(i, 2));
    out += '\n';
  }
  const int base = format == MeshFormat::Obj ? 1 : 0;
  for (Eigen::Index f = 0; f < t.rows(); ++f) {
    out += format == MeshFormat::Obj ? "f " : "3 ";
    out += std::to_string(t(f, 0) + base) + ' ' + std::to_string(t(f, 1) + base) + ' ' +
           std::to_string(t(f, 2) + base) + '\n';
  }
  return out;
}

MeshFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  throw Error(ErrorKind::Usage, "unknown mesh extension '" + ext + "' (expected .off or .obj)");
}

TriangleMesh read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_mesh(ss.str(), format_from_path(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_mesh_file(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const auto text = write_mesh(mesh, format_from_path(path));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

MeshFunction displacement_field(const DeformedState& state, const TriangleMesh& base) {
  if (state.num_vertices() != base.num_vertices())
    throw Error(ErrorKind::DimensionMismatch, "state has " + std::to_string(state.num_vertices()) +
                                                  " vertices, base mesh has " + std::to_string(base.num_vertices()));
  return MeshFunction((state.coordinates - base.vertices()).rowwise().norm());
}

double bounding_box_diagonal(const Coordinates& coords) {
  return (coords.colwise().maxCoeff() - coords.colwise().minCoeff()).norm();
}

}  // namespace specdeform
