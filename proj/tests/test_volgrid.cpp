#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scarline/morphology.hpp"
#include "scarline/phantom.hpp"
#include "scarline/resample.hpp"
#include "scarline/volume_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

using namespace scarline;

namespace {

std::string tmp_dir() {
    auto p = std::filesystem::temp_directory_path() / "scarline_volgrid_tests";
    std::filesystem::create_directories(p);
    return p.string();
}

GridGeometry small_grid(int nx, int ny, int nz, Vec3 sp = {1, 1, 1}, Vec3 org = {0, 0, 0}) {
    return GridGeometry{{nx, ny, nz}, sp, org};
}

// brute-force exact EDT: distance from every voxel to the nearest mask voxel
std::vector<double> oracle_sq_distance(const LabelVolume& m, int label) {
    std::vector<Index3> src;
    const auto& g = m.geom;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (m.at(i, j, k) == label) src.push_back({i, j, k});
    std::vector<double> out(g.voxel_count(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& s : src) {
                    double dx = (i - s[0]) * g.spacing[0];
                    double dy = (j - s[1]) * g.spacing[1];
                    double dz = (k - s[2]) * g.spacing[2];
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                out[g.linear(i, j, k)] = best;
            }
    return out;
}

} // namespace

TEST_CASE("header round trip preserves payload bit-exactly") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> u(-100, 100);
    ScalarVolume v = ScalarVolume::zeros(small_grid(5, 4, 3, {0.7, 1.25, 2.0}, {-3.5, 0.25, 11.0}));
    for (auto& x : v.data) x = u(rng);

    std::string base = tmp_dir() + "/rt_scalar.hdr";
    write_volume(base, v);
    ScalarVolume r = read_scalar_volume(base);
    CHECK(r.geom == v.geom);
    REQUIRE(r.data.size() == v.data.size());
    for (std::size_t i = 0; i < v.data.size(); ++i)
        CHECK(std::memcmp(&r.data[i], &v.data[i], sizeof(float)) == 0);

    LabelVolume lv = LabelVolume::zeros(small_grid(4, 4, 2));
    lv.data = {0, 1, 2, 0, 1, 1, 2, 0, 0, 0, 0, 1, 2, 2, 1, 0,
               0, 1, 2, 0, 1, 1, 2, 0, 0, 0, 0, 1, 2, 2, 1, 0};
    lv.label_table = {{1, "LA"}, {2, "PV"}};
    std::string lbase = tmp_dir() + "/rt_labels.hdr";
    write_volume(lbase, lv);
    LabelVolume lr = read_label_volume(lbase);
    CHECK(lr.geom == lv.geom);
    CHECK(lr.data == lv.data);
    CHECK(lr.label_table == lv.label_table);
}

TEST_CASE("truncated payload and bad headers are rejected") {
    ScalarVolume v = ScalarVolume::zeros(small_grid(4, 4, 4));
    std::string base = tmp_dir() + "/bad.hdr";
    write_volume(base, v);

    // truncate the raw file
    std::string raw = tmp_dir() + "/bad.raw";
    std::filesystem::resize_file(raw, 16);
    CHECK_THROWS_AS(read_volume(base), std::runtime_error);

    std::string hdr2 = tmp_dir() + "/bad2.hdr";
    {
        std::ofstream f(hdr2);
        f << "dims: 2 2 2\nspacing: 1 1 1\norigin: 0 0 0\ndtype: f64\npayload: bad2.raw\n";
    }
    CHECK_THROWS(read_volume(hdr2));

    std::string hdr3 = tmp_dir() + "/bad3.hdr";
    {
        std::ofstream f(hdr3);
        f << "dims: 0 2 2\nspacing: 1 1 1\ndtype: f32\npayload: bad.raw\n";
    }
    CHECK_THROWS(read_volume(hdr3));

    std::string hdr4 = tmp_dir() + "/bad4.hdr";
    {
        std::ofstream f(hdr4);
        f << "dims: 2 2 2\nspacing: 1 -1 1\ndtype: f32\npayload: bad.raw\n";
    }
    CHECK_THROWS(read_volume(hdr4));
}

TEST_CASE("label table must cover every id present") {
    LabelVolume lv = LabelVolume::zeros(small_grid(2, 2, 1));
    lv.data = {0, 3, 0, 0};
    lv.label_table = {{1, "LA"}};
    CHECK_THROWS_AS(lv.validate(), std::invalid_argument);
    lv.label_table[3] = "PV";
    CHECK_NOTHROW(lv.validate());
    lv.label_table.clear(); // unnamed maps are allowed
    CHECK_NOTHROW(lv.validate());
}

TEST_CASE("identity resample reproduces the volume") {
    PhantomSpec spec;
    spec.geom = small_grid(12, 10, 8, {1.5, 1.0, 2.0}, {3, -2, 0});
    spec.noise_sigma = 4.0;
    spec.seed = 5;
    ShellSpec sh;
    sh.center_mm = {10, 3, 7};
    sh.radius_mm = 3;
    sh.thickness_mm = 2;
    spec.shells.push_back(sh);
    Phantom ph = make_phantom(spec);

    ScalarVolume out = resample(ph.image, TransformChain::identity(), ph.image.geom);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(std::abs(out.data[i] - ph.image.data[i]) <= 1e-12);
}

TEST_CASE("translation by exactly one voxel produces a shifted copy") {
    ScalarVolume v = ScalarVolume::zeros(small_grid(6, 5, 4, {2, 1, 1.5}));
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(0, 50);
    for (auto& x : v.data) x = u(rng);

    // chain maps target points into the source: out(i) = src(i + 1 voxel x)
    TransformChain c = TransformChain::from_affine(AffineTransform::translation({2, 0, 0}));
    ScalarVolume out = resample(v, c, v.geom, -1.0f);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 6; ++i) {
                float expect = (i + 1 < 6) ? v.at(i + 1, j, k) : -1.0f;
                CHECK(out.at(i, j, k) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("trilinear sampling matches analytic interpolation at random interior points") {
    ScalarVolume v = ScalarVolume::zeros(small_grid(9, 9, 9));
    std::mt19937 rng(17);
    std::uniform_real_distribution<float> u(-5, 5);
    for (auto& x : v.data) x = u(rng);

    std::uniform_real_distribution<double> pos(0.0, 7.999);
    for (int n = 0; n < 50; ++n) {
        Vec3 p = {pos(rng), pos(rng), pos(rng)};
        TrilinearSample s = sample_trilinear(v, p);
        REQUIRE(s.inside);
        int i = static_cast<int>(p[0]), j = static_cast<int>(p[1]), k = static_cast<int>(p[2]);
        double fx = p[0] - i, fy = p[1] - j, fz = p[2] - k;
        double expect = 0;
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                    expect += w * v.at(i + di, j + dj, k + dk);
                }
        CHECK(s.value == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("nearest-neighbor ties round away from the origin") {
    LabelVolume src = LabelVolume::zeros(small_grid(4, 4, 4));
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                src.at(i, j, k) = static_cast<std::uint16_t>(i + 4 * j + 16 * k);

    // half-voxel shift: target center 0 maps to source index 0.5 -> voxel 1
    TransformChain c = TransformChain::from_affine(AffineTransform::translation({0.5, 0, 0}));
    LabelVolume out = resample_labels(src, c, src.geom);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                int expect = (i + 1 < 4) ? (i + 1) + 4 * j + 16 * k : 0; // outside -> background
                CHECK(out.at(i, j, k) == expect);
            }

    // shift the other way: index -0.5 ties away from origin -> voxel -1 -> outside
    TransformChain c2 = TransformChain::from_affine(AffineTransform::translation({-0.5, 0, 0}));
    LabelVolume out2 = resample_labels(src, c2, src.geom);
    for (int j = 0; j < 4; ++j)
        CHECK(out2.at(0, j, 0) == 0);
    // interior ties (index 0.5) round up, away from the origin
    CHECK(out2.at(1, 0, 0) == src.at(1, 0, 0));
}

TEST_CASE("degenerate affine is rejected") {
    AffineTransform a;
    a.m = {1, 0, 0, 2, 0, 0, 0, 0, 1}; // rank 2
    TransformChain c = TransformChain::from_affine(a);
    ScalarVolume v = ScalarVolume::zeros(small_grid(3, 3, 3));
    CHECK_THROWS_AS(resample(v, c, v.geom), std::invalid_argument);
    CHECK_THROWS_AS(a.inverse(), std::invalid_argument);
}

TEST_CASE("distance transform matches the brute-force oracle") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 6; ++trial) {
        GridGeometry g = small_grid(9 + trial, 8, 7, {1.0 + 0.3 * trial, 0.8, 1.7});
        LabelVolume m = LabelVolume::zeros(g);
        std::uniform_real_distribution<double> u(0, 1);
        int placed = 0;
        for (auto& x : m.data)
            if (u(rng) < 0.04) { x = 1; ++placed; }
        if (placed == 0) m.data[rng() % m.data.size()] = 1;

        auto fast = squared_distance_field(m, 1);
        auto slow = oracle_sq_distance(m, 1);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9));
    }
}

TEST_CASE("dilation and erosion against the brute-force oracle on a 32-cube") {
    GridGeometry g = small_grid(32, 32, 32, {1.0, 1.0, 1.0});
    LabelVolume m = LabelVolume::zeros(g);
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> pos(4, 27);
    for (int n = 0; n < 40; ++n) m.at(pos(rng), pos(rng), pos(rng)) = 1;

    double r = 2.5;
    LabelVolume dil = dilate_mm(m, 1, r);
    auto d2 = oracle_sq_distance(m, 1);
    for (std::size_t i = 0; i < d2.size(); ++i)
        CHECK((dil.data[i] == 1) == (d2[i] <= r * r));

    LabelVolume ero = erode_mm(dil, 1, r);
    // opening-style duality: erode(dilate(M)) contains M
    for (std::size_t i = 0; i < m.data.size(); ++i)
        if (m.data[i] == 1) CHECK(ero.data[i] == 1);
}

TEST_CASE("unit dilation of a single voxel is the face-neighborhood cross") {
    GridGeometry g = small_grid(7, 7, 7);
    LabelVolume m = LabelVolume::zeros(g);
    m.at(3, 3, 3) = 1;
    LabelVolume d = dilate_mm(m, 1, 1.0);
    CHECK(d.count(1) == 7);
    CHECK(d.at(3, 3, 3) == 1);
    CHECK(d.at(2, 3, 3) == 1);
    CHECK(d.at(4, 3, 3) == 1);
    CHECK(d.at(3, 2, 3) == 1);
    CHECK(d.at(3, 4, 3) == 1);
    CHECK(d.at(3, 3, 2) == 1);
    CHECK(d.at(3, 3, 4) == 1);
}

TEST_CASE("anisotropic spacing shapes the metric ball") {
    GridGeometry g = small_grid(9, 9, 9, {1.0, 2.0, 1.0});
    LabelVolume m = LabelVolume::zeros(g);
    m.at(4, 4, 4) = 1;
    LabelVolume d = dilate_mm(m, 1, 2.0);
    CHECK(d.at(2, 4, 4) == 1); // 2mm along x
    CHECK(d.at(4, 5, 4) == 1); // 2mm along y (one voxel)
    CHECK(d.at(4, 6, 4) == 0); // 4mm along y is outside
}

TEST_CASE("morphology edge cases") {
    GridGeometry g = small_grid(5, 5, 5);
    LabelVolume m = LabelVolume::zeros(g);
    m.at(2, 2, 2) = 1;
    CHECK_THROWS_AS(dilate_mm(m, 7, 1.0), std::invalid_argument); // unknown label
    LabelVolume d0 = dilate_mm(m, 1, 0.0);
    CHECK(d0.data == m.data);
    LabelVolume e0 = erode_mm(m, 1, 0.0);
    CHECK(e0.data == m.data);
    LabelVolume egone = erode_mm(m, 1, 1.0);
    CHECK(egone.count(1) == 0); // erosion may empty the set
}

TEST_CASE("phantoms are deterministic and scar arcs land on the wall") {
    PhantomSpec spec;
    spec.geom = small_grid(40, 40, 40);
    spec.noise_sigma = 3.0;
    spec.seed = 77;
    ShellSpec sh;
    sh.center_mm = {19.5, 19.5, 19.5};
    sh.radius_mm = 10;
    sh.thickness_mm = 3;
    sh.interior_label = 1;
    sh.wall_label = 9;
    sh.interior_offset = 40;
    sh.wall_offset = 20;
    spec.shells.push_back(sh);
    ScarArc arc;
    arc.shell = 0;
    arc.theta0 = 0;
    arc.theta1 = 1.5707963267948966;
    arc.boost = 50;
    arc.label = 8;
    spec.arcs.push_back(arc);

    Phantom a = make_phantom(spec);
    Phantom b = make_phantom(spec);
    CHECK(a.image.data == b.image.data);
    CHECK(a.labels.data == b.labels.data);

    PhantomSpec other = spec;
    other.seed = 78;
    Phantom c = make_phantom(other);
    CHECK(a.image.data != c.image.data);
    CHECK(a.labels.data == c.labels.data); // seed only affects noise

    // the scar wedge covers exactly a quarter of the wall band
    std::size_t wall = a.labels.count(9), scar = a.labels.count(8);
    CHECK(scar > 0);
    CHECK(3 * scar == wall); // scar == (wall + scar) / 4 exactly, by symmetry
}

TEST_CASE("phantom spec files round trip and overlapping shells are rejected") {
    PhantomSpec spec;
    spec.geom = small_grid(24, 24, 24, {1.5, 1.5, 1.5}, {-1, 2, 0.5});
    spec.background = 2.5;
    spec.noise_sigma = 1.25;
    spec.seed = 99;
    ShellSpec sh;
    sh.center_mm = {17, 17, 17};
    sh.radius_mm = 6;
    sh.thickness_mm = 2;
    sh.interior_offset = 30;
    sh.wall_offset = 12;
    sh.wall_label = 9;
    spec.shells.push_back(sh);
    ScarArc arc;
    arc.theta0 = 0.25;
    arc.theta1 = 2.0;
    arc.boost = 44;
    spec.arcs.push_back(arc);

    std::string path = tmp_dir() + "/phantom_spec.txt";
    write_phantom_spec(path, spec);
    PhantomSpec r = read_phantom_spec(path);
    CHECK(r.geom == spec.geom);
    CHECK(r.background == spec.background);
    CHECK(r.seed == spec.seed);
    REQUIRE(r.shells.size() == 1);
    CHECK(r.shells[0].radius_mm == spec.shells[0].radius_mm);
    REQUIRE(r.arcs.size() == 1);
    CHECK(r.arcs[0].theta1 == spec.arcs[0].theta1);
    Phantom pa = make_phantom(spec), pb = make_phantom(r);
    CHECK(pa.image.data == pb.image.data);

    PhantomSpec bad = spec;
    ShellSpec sh2 = sh;
    sh2.center_mm = {20, 17, 17}; // 3mm apart, radii sum to 16
    sh2.interior_label = 2;
    bad.shells.push_back(sh2);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("transform chains round trip through files") {
    TransformChain chain;
    chain.global = AffineTransform::rigid({0, 0, 1}, 0.1, {12, 12, 12}, {1.5, -2.0, 0.25});
    LocalAffine loc;
    loc.label = 1;
    loc.center = {10, 11, 12};
    loc.radius = 6;
    loc.affine = AffineTransform::translation({0.5, 0, -0.25});
    chain.locals.push_back(loc);
    chain.blend_radius_mm = 7.5;
    FfdTransform ffd = FfdTransform::covering({0, 0, 0}, {24, 24, 24}, 8.0);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2, 2);
    for (auto& d : ffd.disp) d = {u(rng), u(rng), u(rng)};
    chain.ffd = ffd;

    std::string path = tmp_dir() + "/chain.txt";
    write_transform(path, chain);
    TransformChain r = read_transform(path);

    std::mt19937 rng2(9);
    std::uniform_real_distribution<double> pos(-2, 26);
    for (int n = 0; n < 40; ++n) {
        Vec3 p = {pos(rng2), pos(rng2), pos(rng2)};
        Vec3 a = chain.apply(p), b = r.apply(p);
        CHECK(norm(a - b) < 1e-12);
    }
}

TEST_CASE("chain evaluation degenerates to its parts") {
    AffineTransform g = AffineTransform::rigid({0, 1, 0}, 0.07, {5, 5, 5}, {0.5, 1, -2});
    TransformChain c = TransformChain::from_affine(g);
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> pos(-10, 20);
    for (int n = 0; n < 25; ++n) {
        Vec3 p = {pos(rng), pos(rng), pos(rng)};
        CHECK(norm(c.apply(p) - g.apply(p)) < 1e-12);
    }

    // FFD-only chain: displacement field itself
    TransformChain cf;
    FfdTransform ffd = FfdTransform::covering({0, 0, 0}, {10, 10, 10}, 5.0);
    for (auto& d : ffd.disp) d = {0.5, -0.25, 1.0};
    cf.ffd = ffd;
    // uniform control displacements give a uniform field inside the domain
    for (int n = 0; n < 20; ++n) {
        Vec3 p = {2.0 + n * 0.3, 5.0, 5.0};
        Vec3 q = cf.apply(p);
        CHECK(q[0] == doctest::Approx(p[0] + 0.5).epsilon(1e-9));
        CHECK(q[1] == doctest::Approx(p[1] - 0.25).epsilon(1e-9));
        CHECK(q[2] == doctest::Approx(p[2] + 1.0).epsilon(1e-9));
    }
}

TEST_CASE("ffd displacement matches direct basis evaluation at random points") {
    FfdTransform ffd = FfdTransform::covering({0, 0, 0}, {16, 16, 16}, 4.0);
    std::mt19937 rng(55);
    std::uniform_real_distribution<double> u(-3, 3);
    for (auto& d : ffd.disp) d = {u(rng), u(rng), u(rng)};

    auto b3 = [](double s) {
        s = std::abs(s);
        if (s < 1) return (4 - 6 * s * s + 3 * s * s * s) / 6.0;
        if (s < 2) { double t = 2 - s; return t * t * t / 6.0; }
        return 0.0;
    };
    std::uniform_real_distribution<double> pos(1.0, 15.0);
    for (int n = 0; n < 50; ++n) {
        Vec3 p = {pos(rng), pos(rng), pos(rng)};
        Vec3 direct{0, 0, 0};
        for (int gk = 0; gk < ffd.grid[2]; ++gk)
            for (int gj = 0; gj < ffd.grid[1]; ++gj)
                for (int gi = 0; gi < ffd.grid[0]; ++gi) {
                    double w = b3((p[0] - ffd.grid_origin[0]) / ffd.grid_spacing[0] - gi) *
                               b3((p[1] - ffd.grid_origin[1]) / ffd.grid_spacing[1] - gj) *
                               b3((p[2] - ffd.grid_origin[2]) / ffd.grid_spacing[2] - gk);
                    if (w == 0) continue;
                    const Vec3& c = ffd.disp[(static_cast<std::size_t>(gk) * ffd.grid[1] + gj) * ffd.grid[0] + gi];
                    direct = direct + w * c;
                }
        Vec3 got = ffd.displacement(p);
        CHECK(norm(got - direct) < 1e-9);
    }
}

TEST_CASE("downsampling halves dims and averages blocks") {
    ScalarVolume v = ScalarVolume::zeros(small_grid(4, 4, 2, {1, 1, 2}));
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i);
    ScalarVolume d = downsample2(v);
    CHECK(d.geom.dims == Index3{2, 2, 1});
    CHECK(d.geom.spacing == Vec3{2, 2, 4});
    // block (0,0,0): indices 0,1,4,5,16,17,20,21
    double expect = (0 + 1 + 4 + 5 + 16 + 17 + 20 + 21) / 8.0;
    CHECK(d.at(0, 0, 0) == doctest::Approx(expect));
}
