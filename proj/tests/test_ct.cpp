#include "doctest.h"

#include "dklct/ct.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace dklct;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dklct_ct_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("make_lines geometry") {
    SUBCASE("central ray spans the object") {
        const auto lines = make_lines({{0.0}, 3, 0.8});
        REQUIRE(lines.size() == 3);
        CHECK(lines[1].line.half_length == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(lines[1].line.center[0] == 0.0);
        CHECK(lines[1].line.center[1] == 0.0);
    }
    SUBCASE("offset at half the radius") {
        const auto lines = make_lines({{30.0}, 2, 1.0});
        REQUIRE(lines.size() == 2);
        for (const auto& l : lines) CHECK(l.line.half_length == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
    }
    SUBCASE("angle convention") {
        const auto lines = make_lines({{90.0}, 2, 1.0});
        // α = 90°: beams run along −x, foot points on the y axis
        CHECK(lines[0].line.direction[0] == doctest::Approx(-1.0));
        CHECK(std::abs(lines[0].line.direction[1]) < 1e-15);
        CHECK(std::abs(lines[0].line.center[0]) < 1e-15);
        CHECK(lines[0].line.center[1] == doctest::Approx(-0.5));
    }
    SUBCASE("circle identity, unit directions and perpendicular feet") {
        const auto geo = ProjectionGeometry::evenly_spaced(13, 0.0, 170.0, 185, 1.3);
        const auto lines = make_lines(geo);
        CHECK(lines.size() == 13 * 185);
        for (const auto& l : lines) {
            const double d = geo.detector_offset(l.detector);
            const auto& x0 = l.line.center;
            const auto& n = l.line.direction;
            CHECK(std::abs(l.line.half_length * l.line.half_length + d * d - 1.3 * 1.3) <= 1e-12);
            CHECK(std::abs(n[0] * n[0] + n[1] * n[1] - 1.0) <= 1e-12);
            CHECK(std::abs(x0[0] * n[0] + x0[1] * n[1]) <= 1e-12);
            CHECK(std::hypot(x0[0], x0[1]) == doctest::Approx(std::abs(d)).epsilon(1e-12));
        }
    }
    SUBCASE("detector offsets are cell midpoints") {
        const ProjectionGeometry geo{{0.0}, 4, 1.0};
        CHECK(geo.detector_offset(0) == doctest::Approx(-0.75));
        CHECK(geo.detector_offset(3) == doctest::Approx(0.75));
    }
    SUBCASE("invalid geometry") {
        CHECK_THROWS_AS(make_lines({{}, 3, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(make_lines({{0.0}, 0, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(make_lines({{0.0}, 3, 0.0}), std::invalid_argument);
    }
}

TEST_CASE("evenly spaced angles") {
    const auto geo = ProjectionGeometry::evenly_spaced(9, 0.0, 160.0, 185);
    REQUIRE(geo.projections() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(geo.angles_deg[i] == doctest::Approx(20.0 * static_cast<double>(i)));
    CHECK(make_lines(geo).size() == 1665);
}

TEST_CASE("Shepp-Logan phantom") {
    const auto img = shepp_logan(128, 128);
    CHECK(phantom_value(shepp_logan_ellipses(), 0.0, 0.0) == doctest::Approx(1.02).epsilon(1e-15));
    CHECK(phantom_value(shepp_logan_ellipses(), 0.95, 0.95) == 0.0);
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(127, 127) == 0.0);
    // mirror symmetric above the two unequal ventricles
    for (std::size_t iy = 0; iy < 128; ++iy) {
        if (img.y(iy) < 0.5) continue;
        for (std::size_t ix = 0; ix < 64; ++ix) CHECK(img.at(ix, iy) - img.at(127 - ix, iy) == 0.0);
    }
    bool asymmetric = false;
    for (std::size_t iy = 0; iy < 128; ++iy)
        for (std::size_t ix = 0; ix < 64; ++ix) asymmetric = asymmetric || img.at(ix, iy) != img.at(127 - ix, iy);
    CHECK(asymmetric);
    // the bright rim sits at the top of the image
    CHECK(phantom_value(shepp_logan_ellipses(), 0.0, 0.9) == doctest::Approx(2.0));
    CHECK(img.at(64, 5) == doctest::Approx(2.0));
}

TEST_CASE("exact phantom integrals") {
    const auto disc = disc_phantom(0.5, 2.0);
    const auto geo = ProjectionGeometry::evenly_spaced(5, 0.0, 144.0, 41);
    for (const auto& l : make_lines(geo)) {
        const double d = geo.detector_offset(l.detector);
        const double chord = std::abs(d) < 0.5 ? 2.0 * std::sqrt(0.25 - d * d) : 0.0;
        CHECK(phantom_line_integral(disc, l.line) == doctest::Approx(2.0 * chord).epsilon(1e-12));
    }
    // rotated ellipses against fine Simpson sampling of the indicator
    const auto ell = shepp_logan_ellipses();
    const PointFunction f = [&](std::span<const double> p) { return phantom_value(ell, p[0], p[1]); };
    for (const auto& l : make_lines(ProjectionGeometry::evenly_spaced(4, 10.0, 130.0, 9))) {
        const double fine = simpson_line_integral(f, l.line, 200001);
        CHECK(std::abs(phantom_line_integral(ell, l.line) - fine) < 1e-4);
    }
    // a segment that stops inside the ellipse is clipped
    const LineMeasurement half{{0.25, 0.0}, {1.0, 0.0}, 0.25, 0.0};
    CHECK(phantom_line_integral(disc_phantom(1.0), half) == doctest::Approx(0.5));
}

TEST_CASE("forward projection of a disc") {
    const double rr = 0.7;
    const auto geo = ProjectionGeometry::evenly_spaced(7, 0.0, 154.0, 41, rr);
    const auto disc = disc_phantom(rr);
    const PointFunction field = [&](std::span<const double> p) { return phantom_value(disc, p[0], p[1]); };
    const auto exact = forward_project(disc, geo);
    const auto simpson = forward_project(field, geo, 301);
    for (std::size_t p = 0; p < 7; ++p)
        for (std::size_t j = 0; j < 41; ++j) {
            const double d = geo.detector_offset(j);
            const double chord = 2.0 * std::sqrt(rr * rr - d * d);
            CHECK(std::abs(exact.values(p, j) - chord) < 1e-3);
            // Simpson on a jump is first order: at most 4h/3 per boundary crossing
            const double h = 2.0 * chord / 300.0;
            CHECK(std::abs(simpson.values(p, j) - chord) < 8.0 * h / 3.0);
        }
    CHECK(exact.values(0, 20) == doctest::Approx(2.0 * rr).epsilon(1e-14));

    // rasterized disc: the boundary is resolved to about one pixel
    const auto img = rasterize(disc_phantom(0.5), 1024, 1024);
    const auto geo1 = ProjectionGeometry::evenly_spaced(3, 0.0, 120.0, 21);
    const auto sino = forward_project(img, geo1, 301);
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t j = 0; j < 21; ++j) {
            const double d = geo1.detector_offset(j);
            const double chord = std::abs(d) < 0.5 ? 2.0 * std::sqrt(0.25 - d * d) : 0.0;
            CHECK(std::abs(sino.values(p, j) - chord) < 2e-2);
        }
}

TEST_CASE("projection properties") {
    const auto geo = ProjectionGeometry::evenly_spaced(9, 0.0, 160.0, 31);
    SUBCASE("zero image") {
        const auto s = forward_project(ImageGrid(32, 32), geo);
        for (double v : s.values.data()) CHECK(v == 0.0);
    }
    SUBCASE("linearity") {
        const auto a = shepp_logan(48, 48);
        const auto b = rasterize(disc_phantom(0.3), 48, 48);
        ImageGrid c(48, 48);
        for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] = 1.5 * a.values[i] - 0.7 * b.values[i];
        const auto sa = forward_project(a, geo, 101), sb = forward_project(b, geo, 101), sc = forward_project(c, geo, 101);
        for (std::size_t i = 0; i < sa.values.data().size(); ++i)
            CHECK(std::abs(sc.values.data()[i] - (1.5 * sa.values.data()[i] - 0.7 * sb.values.data()[i])) < 1e-10);
    }
    SUBCASE("rotational consistency for a centred disc") {
        const auto disc = disc_phantom(0.6);
        const PointFunction field = [&](std::span<const double> p) { return phantom_value(disc, p[0], p[1]); };
        for (const auto& s : {forward_project(disc, geo), forward_project(field, geo, 301)})
            for (std::size_t p = 1; p < 9; ++p)
                for (std::size_t j = 0; j < 31; ++j) CHECK(std::abs(s.values(p, j) - s.values(0, j)) < 1e-6);
    }
    SUBCASE("noise is seeded and added after projection") {
        const auto ell = shepp_logan_ellipses();
        const auto clean = forward_project(ell, geo);
        const auto n1 = forward_project(ell, geo, NoiseSpec{0.01, 7});
        const auto n2 = forward_project(ell, geo, NoiseSpec{0.01, 7});
        const auto n3 = forward_project(ell, geo, NoiseSpec{0.01, 8});
        CHECK(n1.values == n2.values);
        CHECK(!(n1.values == n3.values));
        double ss = 0.0;
        for (std::size_t i = 0; i < clean.values.data().size(); ++i)
            ss += std::pow(n1.values.data()[i] - clean.values.data()[i], 2);
        CHECK(std::sqrt(ss / static_cast<double>(clean.values.data().size())) == doctest::Approx(0.01).epsilon(0.1));
        CHECK_THROWS_AS(forward_project(ell, geo, NoiseSpec{-1.0, 0}), std::invalid_argument);
    }
}

TEST_CASE("bilinear sampling") {
    ImageGrid img(2, 2);
    img.at(0, 0) = 1.0;
    img.at(1, 0) = 2.0;
    img.at(0, 1) = 3.0;
    img.at(1, 1) = 4.0;
    CHECK(img.sample(-0.5, 0.5) == 1.0);
    CHECK(img.sample(0.5, -0.5) == 4.0);
    CHECK(img.sample(0.0, 0.0) == doctest::Approx(2.5));
    CHECK(img.sample(5.0, 0.0) == 0.0);
    const auto c = img.centers();
    CHECK(c(1, 0) == 0.5);
    CHECK(c(1, 1) == 0.5);
    CHECK(c(2, 1) == -0.5);
}

TEST_CASE("filtered back projection") {
    SUBCASE("dense-view disc recovers the interior") {
        const auto geo = ProjectionGeometry::evenly_spaced(180, 0.0, 179.0, 201);
        const auto sino = forward_project(disc_phantom(0.6), geo);
        const auto rec = fbp_reconstruct(sino, 64, 64);
        std::size_t checked = 0;
        for (std::size_t iy = 0; iy < 64; ++iy)
            for (std::size_t ix = 0; ix < 64; ++ix) {
                const double r = std::hypot(rec.x(ix), rec.y(iy));
                if (r < 0.5) {
                    CHECK(std::abs(rec.at(ix, iy) - 1.0) < 0.1);
                    ++checked;
                } else if (r > 0.7 && r < 0.95) {
                    CHECK(std::abs(rec.at(ix, iy)) < 0.1);
                }
            }
        CHECK(checked > 500);
    }
    SUBCASE("a single projection is smeared along the beam") {
        const auto geo = ProjectionGeometry{{0.0}, 64, 1.0};
        const auto rec = fbp_reconstruct(forward_project(disc_phantom(0.4), geo), 32, 32);
        // α = 0: beams run along y, so each column is constant
        for (std::size_t ix = 0; ix < 32; ++ix)
            for (std::size_t iy = 1; iy < 32; ++iy) CHECK(rec.at(ix, iy) == rec.at(ix, 0));
        bool varies = false;
        for (std::size_t ix = 1; ix < 32; ++ix) varies = varies || rec.at(ix, 0) != rec.at(0, 0);
        CHECK(varies);
    }
    SUBCASE("zero sinogram") {
        const Sinogram s{ProjectionGeometry::evenly_spaced(9, 0.0, 160.0, 31), Matrix(9, 31)};
        for (double v : fbp_reconstruct(s, 16, 16).values) CHECK(v == 0.0);
    }
    SUBCASE("sparse-view Shepp-Logan shows streaks") {
        const auto geo = ProjectionGeometry::evenly_spaced(9, 0.0, 160.0, 61);
        const auto rec = fbp_reconstruct(forward_project(shepp_logan_ellipses(), geo), 64, 64);
        CHECK(image_rmse(rec, shepp_logan(64, 64)) > 0.2);
    }
}

TEST_CASE("sinogram files") {
    const auto geo = ProjectionGeometry::evenly_spaced(9, 0.0, 160.0, 17, 0.9);
    const auto sino = forward_project(shepp_logan_ellipses(), geo, NoiseSpec{0.001, 3});
    const auto path = scratch("sino.csv");

    SUBCASE("round trip is exact") {
        save_sinogram(path, sino);
        const auto back = load_sinogram(path);
        CHECK(back.geometry.angles_deg == sino.geometry.angles_deg);
        CHECK(back.geometry.n_detectors == 17);
        CHECK(back.geometry.object_radius == 0.9);
        CHECK(back.values == sino.values);
        const auto text = slurp(path);
        CHECK(text.rfind("# angles_deg: ", 0) == 0);
        CHECK(text.find("# n_detectors: 17\n") != std::string::npos);
        CHECK(text.find("# object_radius: 0.90000000000000002\n") != std::string::npos);
    }
    SUBCASE("truncated file names the offending line") {
        save_sinogram(path, sino);
        auto text = slurp(path);
        text = text.substr(0, text.rfind(',', text.size() - 2));
        std::ofstream(path) << text << '\n';
        CHECK_THROWS_WITH_AS(load_sinogram(path), doctest::Contains("sino.csv:12"), FormatError);
    }
    SUBCASE("missing rows") {
        save_sinogram(path, sino);
        auto text = slurp(path);
        text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
        std::ofstream(path) << text;
        CHECK_THROWS_WITH_AS(load_sinogram(path), doctest::Contains("expected 9 projection rows, found 8"),
                             FormatError);
    }
    SUBCASE("bad number") {
        std::ofstream(path) << "# angles_deg: 0,90\n# n_detectors: 2\n# object_radius: 1\n1,2\n3,abc\n";
        CHECK_THROWS_WITH_AS(load_sinogram(path), doctest::Contains("sino.csv:5"), FormatError);
    }
    SUBCASE("missing header") {
        std::ofstream(path) << "# angles_deg: 0,90\n1,2\n";
        CHECK_THROWS_WITH_AS(load_sinogram(path), doctest::Contains("sino.csv:2"), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_sinogram(scratch("does_not_exist.csv")), std::runtime_error);
    }
    SUBCASE("shape mismatch on save") {
        Sinogram bad{geo, Matrix(3, 17)};
        CHECK_THROWS_AS(save_sinogram(path, bad), DimensionError);
    }
    SUBCASE("measurement list follows make_lines") {
        const auto lines = sinogram_lines(sino);
        const auto geo_lines = make_lines(geo);
        REQUIRE(lines.size() == geo_lines.size());
        for (std::size_t i = 0; i < lines.size(); ++i) {
            CHECK(lines[i].value == sino.values(geo_lines[i].projection, geo_lines[i].detector));
            CHECK(lines[i].center == geo_lines[i].line.center);
        }
    }
}

TEST_CASE("image files") {
    SUBCASE("constant zero image gives an all-zero PGM") {
        const auto path = scratch("zero.pgm");
        save_image_pgm(path, ImageGrid(4, 3));
        CHECK(slurp(path) == "P2\n4 3\n65535\n0 0 0 0\n0 0 0 0\n0 0 0 0\n");
        auto side = path;
        side += ".range";
        CHECK(slurp(side) == "min = 0\nmax = 0\n");
    }
    SUBCASE("min-max mapping and explicit range") {
        ImageGrid img(3, 1);
        img.values = {-1.0, 0.0, 1.0};
        const auto path = scratch("ramp.pgm");
        save_image_pgm(path, img);
        CHECK(slurp(path) == "P2\n3 1\n65535\n0 32768 65535\n");
        save_image_pgm(path, img, ValueRange{0.0, 2.0});
        CHECK(slurp(path) == "P2\n3 1\n65535\n0 0 32768\n");
        CHECK_THROWS_AS(save_image_pgm(path, img, ValueRange{1.0, 0.0}), std::invalid_argument);
    }
    SUBCASE("CSV round trip") {
        const auto img = shepp_logan(16, 12);
        ImageGrid noisy = img;
        for (std::size_t i = 0; i < noisy.values.size(); ++i) noisy.values[i] += 1e-3 * std::sin(static_cast<double>(i));
        const auto path = scratch("img.csv");
        save_image_csv(path, noisy);
        const auto back = load_image_csv(path);
        CHECK(back.nx == 16);
        CHECK(back.ny == 12);
        CHECK(back.values == noisy.values);
        std::ofstream(path) << "1,2\n3\n";
        CHECK_THROWS_WITH_AS(load_image_csv(path), doctest::Contains("img.csv:2"), FormatError);
    }
}

TEST_CASE("image RMSE") {
    ImageGrid a(2, 2), b(2, 2);
    b.values = {1.0, 1.0, 1.0, 1.0};
    CHECK(image_rmse(a, b) == 1.0);
    CHECK_THROWS_AS(image_rmse(a, ImageGrid(3, 2)), DimensionError);
}
