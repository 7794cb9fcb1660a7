#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mtlpose/mesh.hpp"
#include "test_util.hpp"

using namespace mtlpose;

namespace {

using Tri = std::array<int, 3>;

// Triangle multiset keyed by vertex coordinates, invariant to a rotation of
// the index triple.
std::multiset<std::vector<double>> triangle_set(const TriMesh& m) {
    std::multiset<std::vector<double>> out;
    for (const Tri& t : m.triangles) {
        const int r = static_cast<int>(std::min_element(t.begin(), t.end()) - t.begin());
        std::vector<double> key;
        for (int k = 0; k < 3; ++k) {
            const Vec3& v = m.vertices[t[(r + k) % 3]];
            key.insert(key.end(), {v.x(), v.y(), v.z()});
        }
        out.insert(key);
    }
    return out;
}

// Closed 2-manifold: every undirected edge is shared by exactly two
// triangles, traversed once in each direction.
bool watertight(const TriMesh& m) {
    std::map<std::pair<int, int>, int> directed;
    for (const Tri& t : m.triangles)
        for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
    for (const auto& [e, n] : directed) {
        if (n != 1) return false;
        const auto it = directed.find({e.second, e.first});
        if (it == directed.end() || it->second != 1) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("box primitive") {
    const TriMesh box = gen_primitive(PrimitiveKind::box, 0.2);
    CHECK(box.vertices.size() == 8);
    CHECK(box.triangles.size() == 12);
    CHECK(extents(box).maxCoeff() == doctest::Approx(0.2));
    CHECK(extents(box).z() == doctest::Approx(0.2));
    const Vec3 e = extents(box);
    CHECK(e.x() != e.y());
    CHECK(e.y() != e.z());
    CHECK(e.x() != e.z());
}

TEST_CASE("cylinder ring construction") {
    CHECK(gen_primitive(PrimitiveKind::cylinder, 0.2, 16).vertices.size() == 2 * 16 + 2);
    CHECK(gen_primitive(PrimitiveKind::cylinder, 0.2, 5).vertices.size() == 2 * 5 + 2);
    CHECK_THROWS_AS(gen_primitive(PrimitiveKind::cylinder, 0.2, 2), ConfigError);
    CHECK_THROWS_AS(gen_primitive(PrimitiveKind::bowl, 0.2, 2), ConfigError);
    CHECK_NOTHROW(gen_primitive(PrimitiveKind::box, 0.2, 2));
}

TEST_CASE("primitives are closed, centered and fit the cube") {
    for (auto kind : {PrimitiveKind::box, PrimitiveKind::pyramid, PrimitiveKind::cylinder, PrimitiveKind::lshape,
                      PrimitiveKind::bowl}) {
        for (double s : {0.05, 0.2, 0.4}) {
            const TriMesh m = gen_primitive(kind, s);
            CAPTURE(std::string(to_string(kind)));
            CAPTURE(s);
            CHECK(watertight(m));
            CHECK(extents(m).maxCoeff() == doctest::Approx(s));
            Vec3 lo = m.vertices.front(), hi = lo;
            for (const auto& v : m.vertices) {
                lo = lo.cwiseMin(v);
                hi = hi.cwiseMax(v);
            }
            CHECK(((lo + hi) / 2).norm() < 1e-12);
            CHECK_NOTHROW(validate(m));
        }
        CHECK(primitive_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(primitive_from_string("torus"), ConfigError);
}

TEST_CASE("primitive scale range") {
    CHECK_THROWS_AS(gen_primitive(PrimitiveKind::box, 0.0), ConfigError);
    CHECK_THROWS_AS(gen_primitive(PrimitiveKind::box, -0.1), ConfigError);
    CHECK_THROWS_AS(gen_primitive(PrimitiveKind::box, 0.41), ConfigError);
    CHECK_NOTHROW(gen_primitive(PrimitiveKind::box, 0.4));
}

TEST_CASE("primitives are deterministic and distinct") {
    std::vector<std::multiset<std::vector<double>>> sets;
    for (auto kind : {PrimitiveKind::box, PrimitiveKind::pyramid, PrimitiveKind::cylinder, PrimitiveKind::lshape,
                      PrimitiveKind::bowl}) {
        CHECK(triangle_set(gen_primitive(kind, 0.2)) == triangle_set(gen_primitive(kind, 0.2)));
        sets.push_back(triangle_set(gen_primitive(kind, 0.2)));
    }
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j) CHECK(sets[i] != sets[j]);
}

TEST_CASE("sampling per primitive") {
    CHECK(default_sampling(PrimitiveKind::box) == SamplingKind::symmetric);
    CHECK(default_sampling(PrimitiveKind::pyramid) == SamplingKind::regular);
    CHECK(default_sampling(PrimitiveKind::lshape) == SamplingKind::regular);
    CHECK(default_sampling(PrimitiveKind::cylinder) == SamplingKind::rotation_invariant);
    CHECK(default_sampling(PrimitiveKind::bowl) == SamplingKind::rotation_invariant);
}

TEST_CASE("parse triangle") {
    const TriMesh m = parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 1 2 3\n");
    CHECK(m.vertices.size() == 3);
    REQUIRE(m.triangles.size() == 1);
    CHECK(m.triangles[0] == Tri{0, 1, 2});
}

TEST_CASE("parse fan triangulation") {
    const TriMesh m = parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0.1 0.1 0\nv 0 0.1 0\nf 1 2 3 4\n");
    REQUIRE(m.triangles.size() == 2);
    CHECK(m.triangles[0] == Tri{0, 1, 2});
    CHECK(m.triangles[1] == Tri{0, 2, 3});
}

TEST_CASE("parse ignores other lines and slash suffixes") {
    const TriMesh m = parse_mesh(
        "# comment\no thing\nvn 0 0 1\nvt 0 0\n\nv 0 0 0\nv 0.1 0 0\nv 0 0.1 0\ns off\nf 1/1/1 2//1 3/2\n");
    CHECK(m.vertices.size() == 3);
    REQUIRE(m.triangles.size() == 1);
    CHECK(m.triangles[0] == Tri{0, 1, 2});
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 1 2 9\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    try {
        parse_mesh("v 0 0 0\nv 0.1 zero 0\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 1 2\n"), ParseError);
    CHECK_THROWS_AS(parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 1 2 x\n"), ParseError);
    CHECK_THROWS_AS(parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0 0.1 0\nf 0 1 2\n"), ParseError);
}

TEST_CASE("parse validation") {
    CHECK_THROWS_AS(parse_mesh("v 0 0 0\nv 0.5 0 0\nv 0 0.1 0\nf 1 2 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_mesh("v 0 0 0\nv 0.1 0 0\nv 0.2 0 0\nf 1 2 3\n"), ConfigError);
}

TEST_CASE("mesh file round trip") {
    const auto dir = test::temp_dir("mesh");
    for (auto kind : {PrimitiveKind::box, PrimitiveKind::pyramid, PrimitiveKind::cylinder, PrimitiveKind::lshape,
                      PrimitiveKind::bowl}) {
        const TriMesh m = gen_primitive(kind, 0.2);
        const auto path = dir / (std::string(to_string(kind)) + ".obj");
        save_mesh_file(m, path);
        const TriMesh back = parse_mesh_file(path);
        CHECK(back.name == to_string(kind));
        CHECK(back.vertices == m.vertices);
        CHECK(triangle_set(back) == triangle_set(m));
        CHECK(serialize_mesh(back) == serialize_mesh(m));
    }
    CHECK_THROWS_AS(parse_mesh_file(dir / "missing.obj"), ConfigError);
}
