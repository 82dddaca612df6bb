#include <doctest.h>

#include <cmath>
#include <fstream>

#include "errors.hpp"
#include "image.hpp"
#include "manifest.hpp"
#include "rng.hpp"
#include "test_support.hpp"

using namespace sfv;

namespace {

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("a 1x1 white pixel decodes to ones") {
    test::TempDir dir("io_white");
    const std::string path = dir.file("white.ppm");
    write_bytes(path, std::string("P6\n1 1\n255\n") + "\xff\xff\xff");
    const Image img = load_ppm(path);
    REQUIRE(img.width == 1);
    REQUIRE(img.height == 1);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(img.pixels.at3(c, 0, 0) == 1.0);
    }
}

TEST_CASE("header comments and arbitrary whitespace are tolerated") {
    test::TempDir dir("io_comments");
    const std::string path = dir.file("commented.ppm");
    write_bytes(path, std::string("P6 # pixmap\n# a comment line\n 2\t1 \n255\n") +
                          std::string("\x00\x00\x00\xff\xff\xff", 6));
    const Image img = load_ppm(path);
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 1);
    CHECK(img.pixels.at3(0, 0, 0) == 0.0);
    CHECK(img.pixels.at3(0, 0, 1) == 1.0);
}

TEST_CASE("bad magic, truncation and wide maxval are distinct failures") {
    test::TempDir dir("io_errors");

    const std::string p5 = dir.file("gray.pgm");
    write_bytes(p5, "P5\n1 1\n255\nx");
    CHECK_THROWS_WITH_AS((void)load_ppm(p5), doctest::Contains("bad magic"), Error);

    const std::string truncated = dir.file("short.ppm");
    write_bytes(truncated, std::string("P6\n2 2\n255\n") + "\x01\x02\x03");
    CHECK_THROWS_WITH_AS((void)load_ppm(truncated), doctest::Contains("truncated raster"),
                         Error);

    const std::string wide = dir.file("wide.ppm");
    write_bytes(wide, "P6\n1 1\n65535\n??????");
    CHECK_THROWS_WITH_AS((void)load_ppm(wide), doctest::Contains("unsupported maxval"),
                         Error);
}

TEST_CASE("maxval below 255 rescales to the unit interval") {
    test::TempDir dir("io_maxval");
    const std::string path = dir.file("dim.ppm");
    write_bytes(path, std::string("P6\n1 1\n100\n") + std::string("\x64\x32\x00", 3));
    const Image img = load_ppm(path);
    CHECK(img.pixels.at3(0, 0, 0) == 1.0);
    CHECK(img.pixels.at3(1, 0, 0) == 0.5);
    CHECK(img.pixels.at3(2, 0, 0) == 0.0);
}

TEST_CASE("resize to the stored size is the identity") {
    Rng rng(7);
    const Image img = Image::from_pixels(test::random_tensor({3, 9, 11}, rng, 0.0, 1.0));
    const Image same = resize_bilinear(img, 11, 9);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        CHECK(std::fabs(same.pixels.data[i] - img.pixels.data[i]) < 1e-12);
    }
}

TEST_CASE("checkerboard upsampling matches the direct bilinear formula") {
    // 2x2 checkerboard: white at (0,0) and (1,1).
    Tensor pix({3, 2, 2});
    for (std::size_t c = 0; c < 3; ++c) {
        pix.at3(c, 0, 0) = 1.0;
        pix.at3(c, 1, 1) = 1.0;
    }
    const Image img = Image::from_pixels(pix);
    const Image up = resize_bilinear(img, 4, 4);

    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
            // Corner-aligned source coordinates in [0,1].
            const double gx = static_cast<double>(x) / 3.0;
            const double gy = static_cast<double>(y) / 3.0;
            // f(gx, gy) for this checkerboard: corners (0,0)=1,(1,0)=0,(0,1)=0,(1,1)=1
            const double expected =
                (1.0 - gx) * (1.0 - gy) * 1.0 + gx * (1.0 - gy) * 0.0 +
                (1.0 - gx) * gy * 0.0 + gx * gy * 1.0;
            CHECK(up.pixels.at3(0, y, x) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("ppm save then load round-trips to 8-bit precision") {
    test::TempDir dir("io_roundtrip");
    Rng rng(11);
    const Image img = Image::from_pixels(test::random_tensor({3, 6, 5}, rng, 0.0, 1.0));
    const std::string path = dir.file("img.ppm");
    save_ppm(img, path);
    const Image back = load_ppm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        CHECK(std::fabs(back.pixels.data[i] - img.pixels.data[i]) <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("overlay of a zero map is pure grayscale") {
    test::TempDir dir("io_overlay_zero");
    Rng rng(13);
    const Image img = Image::from_pixels(test::random_tensor({3, 4, 4}, rng, 0.0, 1.0));
    const Tensor zero_map({4, 4});
    const std::string path = dir.file("overlay.ppm");
    render_overlay(img, zero_map, path);
    const Image out = load_ppm(path);
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
            const double gray = (img.pixels.at3(0, y, x) + img.pixels.at3(1, y, x) +
                                 img.pixels.at3(2, y, x)) /
                                3.0;
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(std::fabs(out.pixels.at3(c, y, x) - gray) <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("the maximal saliency pixel renders fully warm") {
    test::TempDir dir("io_overlay_peak");
    Rng rng(17);
    const Image img = Image::from_pixels(test::random_tensor({3, 3, 3}, rng, 0.0, 1.0));
    Tensor map({3, 3});
    map.data[4] = -2.0;  // center, negative: magnitude drives the colormap
    const std::string path = dir.file("overlay.ppm");
    render_overlay(img, map, path);
    const Image out = load_ppm(path);
    CHECK(out.pixels.at3(0, 1, 1) == 1.0);
    CHECK(out.pixels.at3(1, 1, 1) == 0.0);
    CHECK(out.pixels.at3(2, 1, 1) == 0.0);
}

TEST_CASE("overlay rejects mismatched map dimensions") {
    Rng rng(19);
    const Image img = Image::from_pixels(test::random_tensor({3, 4, 4}, rng, 0.0, 1.0));
    const Tensor map({5, 4});
    CHECK_THROWS_AS(render_overlay(img, map, "/tmp/never_written.ppm"), Error);
}

TEST_CASE("overlay bytes are identical to the committed golden file") {
    test::TempDir dir("io_overlay_golden");
    const Image img = load_image(test::fixture_path("img_small_0.ppm"), 32);
    Tensor map({img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            map.data[y * img.width + x] = std::sin(static_cast<double>(x) / 3.0) *
                                          std::cos(static_cast<double>(y) / 5.0);
        }
    }
    const std::string path = dir.file("overlay.ppm");
    render_overlay(img, map, path);
    CHECK(read_bytes(path) == read_bytes(test::fixture_path("golden_overlay.ppm")));
}

TEST_CASE("saliency graymap rescales magnitudes to the full range") {
    test::TempDir dir("io_pgm");
    Tensor map({2, 2});
    map.data = {0.0, -0.5, 0.25, 1.0};
    const std::string path = dir.file("map.pgm");
    save_saliency_pgm(map, path);
    const std::string bytes = read_bytes(path);
    const std::string header = "P5\n2 2\n255\n";
    REQUIRE(bytes.substr(0, header.size()) == header);
    const unsigned char* raster =
        reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
    CHECK(raster[0] == 0);
    CHECK(raster[1] == 128);  // | -0.5 | / 1.0 * 255 rounded
    CHECK(raster[2] == 64);
    CHECK(raster[3] == 255);
}

TEST_CASE("manifest parsing handles comments and validates fields") {
    test::TempDir dir("manifest_parse");
    const std::string path = dir.file("set.tsv");
    write_bytes(path,
                "# header comment\n"
                "s1\timgs/a.ppm\t1.25\ttrain\n"
                "\n"
                "s2\timgs/b.ppm\t-0.5\tval\n"
                "s3\tc.ppm\t3\ttest\n");
    const ResponseManifest manifest = load_manifest(path);
    REQUIRE(manifest.entries.size() == 3);
    CHECK(manifest.entries[0].id == "s1");
    CHECK(manifest.entries[0].response == 1.25);
    CHECK(manifest.entries[0].split == Split::train);
    CHECK(manifest.entries[1].response == -0.5);
    CHECK(manifest.entries[2].split == Split::test);
    CHECK(manifest.resolve_path(manifest.entries[0]) ==
          (dir.path / "imgs/a.ppm").string());
    CHECK(manifest.split_indices(Split::val) == std::vector<std::size_t>{1});
}

TEST_CASE("manifest rejects malformed rows") {
    test::TempDir dir("manifest_bad");

    const std::string dup = dir.file("dup.tsv");
    write_bytes(dup, "s1\ta.ppm\t1\ttrain\ns1\tb.ppm\t2\tval\n");
    CHECK_THROWS_WITH_AS((void)load_manifest(dup), doctest::Contains("duplicate"), Error);

    const std::string cols = dir.file("cols.tsv");
    write_bytes(cols, "s1\ta.ppm\t1\n");
    CHECK_THROWS_WITH_AS((void)load_manifest(cols), doctest::Contains("4 tab-separated"),
                         Error);

    const std::string split = dir.file("split.tsv");
    write_bytes(split, "s1\ta.ppm\t1\tholdout\n");
    CHECK_THROWS_WITH_AS((void)load_manifest(split), doctest::Contains("unknown split"),
                         Error);

    const std::string resp = dir.file("resp.tsv");
    write_bytes(resp, "s1\ta.ppm\tabc\ttrain\n");
    CHECK_THROWS_WITH_AS((void)load_manifest(resp), doctest::Contains("bad response"),
                         Error);
}

TEST_CASE("manifest save then load round-trips") {
    test::TempDir dir("manifest_roundtrip");
    ResponseManifest manifest;
    manifest.entries = {
        {"a", "x/a.ppm", 0.125, Split::train},
        {"b", "x/b.ppm", -3.75, Split::val},
        {"c", "x/c.ppm", 2.0, Split::test},
    };
    const std::string path = dir.file("out.tsv");
    save_manifest(manifest, path);
    const ResponseManifest back = load_manifest(path);
    REQUIRE(back.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].id == manifest.entries[i].id);
        CHECK(back.entries[i].image_path == manifest.entries[i].image_path);
        CHECK(back.entries[i].response == manifest.entries[i].response);
        CHECK(back.entries[i].split == manifest.entries[i].split);
    }
}

TEST_SUITE_END();
