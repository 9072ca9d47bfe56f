#include "trajfield/tfz.hpp"

#include "trajfield/synth.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace trajfield;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("trajfield_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor files round-trip and validate their headers") {
    const fs::path dir = temp_dir("tensor");
    const std::vector<float> data = {1.5f, -2.0f, 0.25f, 9.0f, 0.0f, 3.0f};
    const std::uint32_t shape[] = {2, 3};
    tfz::write_tensor(dir / "a.tfz", data, shape);

    const tfz::Tensor t = tfz::read_tensor(dir / "a.tfz");
    CHECK(t.shape == std::vector<std::uint32_t>{2, 3});
    CHECK(t.data == data);

    // magic check
    {
        std::ofstream bad(dir / "bad.tfz", std::ios::binary);
        bad << "NOPE1234payload";
    }
    CHECK_THROWS_AS(tfz::read_tensor(dir / "bad.tfz"), IoError);

    // declared shape vs payload length
    {
        std::string bytes = slurp(dir / "a.tfz");
        bytes.pop_back();
        std::ofstream out(dir / "short.tfz", std::ios::binary);
        out << bytes;
    }
    CHECK_THROWS_AS(tfz::read_tensor(dir / "short.tfz"), IoError);

    const std::uint32_t wrong_shape[] = {4, 3};
    CHECK_THROWS_AS(tfz::write_tensor(dir / "b.tfz", data, wrong_shape), ShapeError);
}

TEST_CASE("field containers round-trip through f32 storage") {
    const fs::path dir = temp_dir("field");
    TrajectoryField field(3, 4, 5, CurveSpec::bspline(7));
    Rng rng(8);
    for (double& x : field.control_data()) x = rng.uniform(-4, 4);
    for (double& c : field.confidence_data()) c = rng.uniform(0.5, 2.0);
    field.set_pixel_valid(1, 2, 3, false);

    tfz::Provenance prov;
    prov.seed = 8;
    prov.preset = "test";
    tfz::write_field(dir, field, prov);
    const TrajectoryField back = tfz::read_field(dir);

    CHECK(back.num_frames() == 3);
    CHECK(back.height() == 4);
    CHECK(back.width() == 5);
    CHECK(back.spec().family == CurveFamily::bspline);
    CHECK(back.spec().num_control_points == 7);
    CHECK(back.timestamps() == field.timestamps());
    CHECK_FALSE(back.pixel_valid(1, 2, 3));
    CHECK(back.pixel_valid(0, 0, 0));
    for (std::size_t i = 0; i < field.control_data().size(); ++i)
        REQUIRE(back.control_data()[i] ==
                static_cast<double>(static_cast<float>(field.control_data()[i])));
}

TEST_CASE("manifest rewrite is byte-identical") {
    const fs::path dir = temp_dir("manifest");
    TrajectoryField field(2, 2, 2, CurveSpec::bspline(4));
    tfz::write_field(dir, field, tfz::Provenance{});

    const std::string original = slurp(dir / "manifest.json");
    const tfz::json parsed = tfz::read_manifest(dir);
    CHECK(tfz::dump_json(parsed) == original);

    // a second write of the loaded field reproduces the tensor bytes too
    const TrajectoryField back = tfz::read_field(dir);
    const fs::path dir2 = temp_dir("manifest2");
    tfz::write_field(dir2, back, tfz::Provenance{});
    CHECK(slurp(dir2 / "manifest.json") == original);
    CHECK(slurp(dir2 / "control_points.tfz") == slurp(dir / "control_points.tfz"));
    CHECK(slurp(dir2 / "confidences.tfz") == slurp(dir / "confidences.tfz"));
}

TEST_CASE("bundle containers round-trip") {
    const fs::path dir = temp_dir("bundle");
    const Scene scene = build_scene("mixed", 3);
    const GroundTruthBundle gt = generate_bundle(scene, 4, 16, 16, 3);

    tfz::Provenance prov;
    prov.seed = 3;
    prov.preset = "mixed";
    tfz::write_bundle(dir, gt, prov);
    const GroundTruthBundle back = tfz::read_bundle(dir);

    CHECK(back.num_frames == gt.num_frames);
    CHECK(back.height == gt.height);
    CHECK(back.width == gt.width);
    CHECK(back.timestamps == gt.timestamps);
    CHECK(back.valid == gt.valid);
    CHECK(back.visible == gt.visible);
    CHECK(back.static_mask == gt.static_mask);
    CHECK(back.rigid_labels == gt.rigid_labels);
    REQUIRE(back.correspondences.size() == gt.correspondences.size());
    for (std::size_t i = 0; i < gt.positions.size(); ++i)
        REQUIRE(back.positions[i] == static_cast<double>(static_cast<float>(gt.positions[i])));
    for (std::size_t i = 0; i < gt.cameras.size(); ++i) {
        CHECK(back.cameras[i].focal ==
              static_cast<double>(static_cast<float>(gt.cameras[i].focal)));
        CHECK(std::abs(back.cameras[i].rotation.dot(gt.cameras[i].rotation)) >
              1.0 - 1e-9);
    }

    CHECK_THROWS_AS(tfz::read_field(dir), IoError);  // wrong role
}

TEST_CASE("reading a missing container reports an IO error") {
    CHECK_THROWS_AS(tfz::read_manifest("/nonexistent/trajfield"), IoError);
    const fs::path dir = temp_dir("broken");
    {
        std::ofstream out(dir / "manifest.json");
        out << "{\"role\": \"field\"}\n";
    }
    CHECK_THROWS_AS(tfz::read_manifest(dir), IoError);  // schema_version missing
}
