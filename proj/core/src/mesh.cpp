#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>

#include "biopsym/anatomy.hpp"
#include "biopsym/error.hpp"

namespace biopsym {

void Aabb::validate() const {
  if (!min.allFinite() || !max.allFinite() || !(min.array() < max.array()).all()) {
    throw Error(Errc::degenerate_geometry, "bounding box requires min < max componentwise");
  }
}

void TriMesh::validate_indices() const {
  const auto n = vertices.size();
  for (const auto& tri : triangles) {
    for (auto idx : tri) {
      if (idx >= n) throw Error(Errc::invalid_argument, "triangle index out of range");
    }
  }
}

bool is_closed_manifold(const TriMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const auto a = t[e];
      const auto b = t[(e + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.contains({edge.second, edge.first})) return false;
  }
  return true;
}

double mesh_volume(const TriMesh& mesh) {
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    six_v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  return six_v / 6.0;
}

Aabb mesh_aabb(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw Error(Errc::invalid_argument, "bounding box of an empty mesh");
  Aabb box{mesh.vertices.front(), mesh.vertices.front()};
  for (const auto& v : mesh.vertices) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  return box;
}

namespace {

// Side of (qx, qy) relative to the projected directed edge a->b, with the
// query displaced by (eps, eps^2). Computed on the lexicographically ordered
// endpoints so that reversing the edge flips the sign exactly. Returns 0 only
// when the edge projects to a point.
int perturbed_side(const Vec3& a, const Vec3& b, double qx, double qy) {
  const bool swap = b.x() < a.x() || (b.x() == a.x() && b.y() < a.y());
  const Vec3& p = swap ? b : a;
  const Vec3& r = swap ? a : b;
  const double ex = r.x() - p.x();
  const double ey = r.y() - p.y();
  if (ex == 0.0 && ey == 0.0) return 0;
  const double d = ex * (qy - p.y()) - ey * (qx - p.x());
  int s;
  if (d > 0.0) {
    s = 1;
  } else if (d < 0.0) {
    s = -1;
  } else if (ey != 0.0) {
    s = ey < 0.0 ? 1 : -1;  // first-order term: -ey * eps
  } else {
    s = ex > 0.0 ? 1 : -1;  // second-order term: ex * eps^2
  }
  return swap ? -s : s;
}

double signed_area2(const Vec3& a, const Vec3& b, double qx, double qy) {
  return (b.x() - a.x()) * (qy - a.y()) - (b.y() - a.y()) * (qx - a.x());
}

}  // namespace

bool point_in_mesh(const TriMesh& mesh, const Vec3& p) {
  bool inside = false;
  const double qx = p.x();
  const double qy = p.y();
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];

    // Cheap reject on the projected bounding rectangle.
    if (qx < std::min({a.x(), b.x(), c.x()}) || qx > std::max({a.x(), b.x(), c.x()}) ||
        qy < std::min({a.y(), b.y(), c.y()}) || qy > std::max({a.y(), b.y(), c.y()})) {
      continue;
    }
    const int s0 = perturbed_side(a, b, qx, qy);
    const int s1 = perturbed_side(b, c, qx, qy);
    const int s2 = perturbed_side(c, a, qx, qy);
    if (s0 == 0 || s1 == 0 || s2 == 0 || s0 != s1 || s1 != s2) continue;

    const double wa = signed_area2(b, c, qx, qy);
    const double wb = signed_area2(c, a, qx, qy);
    const double wc = signed_area2(a, b, qx, qy);
    const double area = wa + wb + wc;
    if (area == 0.0) continue;
    const double z_hit = (wa * a.z() + wb * b.z() + wc * c.z()) / area;
    if (z_hit > p.z()) inside = !inside;
  }
  return inside;
}

namespace {

// Moller-Trumbore against the segment p0 + t*d. Barycentric tests are
// slightly inclusive so a hit on a shared edge is reported by both triangles;
// duplicates are merged by the caller.
std::optional<double> segment_triangle_hit(const Vec3& p0, const Vec3& d, const Vec3& a, const Vec3& b,
                                           const Vec3& c) {
  constexpr double kBaryTol = 1e-12;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = d.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = p0 - a;
  const double u = inv * s.dot(h);
  if (u < -kBaryTol || u > 1.0 + kBaryTol) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = inv * d.dot(q);
  if (v < -kBaryTol || u + v > 1.0 + kBaryTol) return std::nullopt;
  const double t = inv * e2.dot(q);
  if (t < 0.0 || t > 1.0) return std::nullopt;
  return t;
}

}  // namespace

InsideLength inside_length(const TriMesh& mesh, const Segment& seg) {
  constexpr double kMergeTol = 1e-9;
  const Vec3 d = seg.p1 - seg.p0;

  std::vector<double> cuts{0.0, 1.0};
  for (const auto& t : mesh.triangles) {
    if (auto hit = segment_triangle_hit(seg.p0, d, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])) {
      cuts.push_back(*hit);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> unique_cuts;
  for (double t : cuts) {
    if (unique_cuts.empty() || t - unique_cuts.back() > kMergeTol) unique_cuts.push_back(t);
  }
  // Keep the exact end parameter so the last interval closes at p1.
  if (unique_cuts.back() != 1.0) {
    if (unique_cuts.size() > 1 && 1.0 - unique_cuts.back() <= kMergeTol) {
      unique_cuts.back() = 1.0;
    } else {
      unique_cuts.push_back(1.0);
    }
  }

  InsideLength result;
  for (std::size_t i = 0; i + 1 < unique_cuts.size(); ++i) {
    const double ta = unique_cuts[i];
    const double tb = unique_cuts[i + 1];
    if (!point_in_mesh(mesh, seg.at(0.5 * (ta + tb)))) continue;
    if (!result.intervals.empty() && result.intervals.back().t1 == ta) {
      result.intervals.back().t1 = tb;
      result.intervals.back().exit = seg.at(tb);
    } else {
      result.intervals.push_back({ta, tb, seg.at(ta), seg.at(tb)});
    }
  }
  for (const auto& iv : result.intervals) result.length_mm += (iv.exit - iv.entry).norm();
  return result;
}

namespace {

TriMesh unit_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& v : mesh.vertices) v.normalize();
  mesh.triangles = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const auto& tri : mesh.triangles) {
      const auto ab = midpoint(tri[0], tri[1]);
      const auto bc = midpoint(tri[1], tri[2]);
      const auto ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(next);
  }
  return mesh;
}

constexpr int kMaxSubdivisions = 8;

}  // namespace

TriMesh generate_ellipsoid_mesh(const Vec3& center, const Vec3& semi_axes, int subdivisions) {
  if (!center.allFinite()) throw Error(Errc::invalid_argument, "ellipsoid center must be finite");
  if (!(semi_axes.array() > 0.0).all()) throw Error(Errc::invalid_argument, "ellipsoid semi-axes must be positive");
  if (subdivisions < 1 || subdivisions > kMaxSubdivisions) {
    throw Error(Errc::invalid_argument, "ellipsoid subdivisions must be in [1, 8]");
  }
  TriMesh mesh = unit_icosphere(subdivisions);
  for (auto& v : mesh.vertices) v = center + v.cwiseProduct(semi_axes);
  return mesh;
}

double icosphere_sagitta(int subdivisions) {
  if (subdivisions < 0 || subdivisions > kMaxSubdivisions) {
    throw Error(Errc::invalid_argument, "icosphere subdivisions must be in [0, 8]");
  }
  const TriMesh mesh = unit_icosphere(subdivisions);
  double min_dist = 1.0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).normalized();
    min_dist = std::min(min_dist, std::abs(n.dot(a)));
  }
  return 1.0 - min_dist;
}

TriMesh read_obj(std::istream& in) {
  TriMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(Errc::parse_error, "OBJ line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("expected 'v x y z'");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> tri{};
      std::string tok;
      int count = 0;
      while (ls >> tok) {
        if (count == 3) fail("only triangular faces are supported");
        // Accept "i", "i/t", "i//n", "i/t/n"; only the vertex index matters.
        const auto slash = tok.find('/');
        long long idx = 0;
        try {
          std::size_t used = 0;
          idx = std::stoll(tok.substr(0, slash), &used);
          if (used != tok.substr(0, slash).size()) fail("bad face index '" + tok + "'");
        } catch (const std::logic_error&) {
          fail("bad face index '" + tok + "'");
        }
        if (idx < 1 || static_cast<std::size_t>(idx) > mesh.vertices.size()) fail("face index out of range");
        tri[count++] = static_cast<std::uint32_t>(idx - 1);
      }
      if (count != 3) fail("only triangular faces are supported");
      mesh.triangles.push_back(tri);
    }
  }
  if (mesh.triangles.empty()) throw Error(Errc::parse_error, "OBJ contains no triangles");
  return mesh;
}

void write_obj(const TriMesh& mesh, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw Error(Errc::io_failure, "failed writing OBJ");
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open mesh " + path.string());
  return read_obj(in);
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
  write_obj(mesh, out);
}

}  // namespace biopsym
