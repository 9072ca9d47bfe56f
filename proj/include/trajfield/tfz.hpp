#ifndef TRAJFIELD_TFZ_HPP
#define TRAJFIELD_TFZ_HPP

#include "trajfield/bundle.hpp"
#include "trajfield/field.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace trajfield::tfz {

// TFZ container: a directory holding manifest.json plus raw tensor files.
// Tensor file layout (little endian):
//   bytes 0..7   magic "TFZ1" padded with four zero bytes
//   bytes 8..11  rank (uint32)
//   then rank x uint32 dims, then float32 payload, row-major.
// Tensors store 32-bit floats; all computation upstream is double precision.

using json = nlohmann::ordered_json;

struct Provenance {
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    std::string preset;
};

inline constexpr char kMagic[8] = {'T', 'F', 'Z', '1', 0, 0, 0, 0};

// ---------------------------------------------------------------------------
// Tensor files
// ---------------------------------------------------------------------------

inline void write_tensor(const std::filesystem::path& path, std::span<const float> data,
                         std::span<const std::uint32_t> shape) {
    std::size_t count = 1;
    for (std::uint32_t d : shape) count *= d;
    if (count != data.size()) throw ShapeError("tensor shape does not match the payload size");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open tensor file for writing: " + path.string());
    out.write(kMagic, 8);
    const std::uint32_t rank = static_cast<std::uint32_t>(shape.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (std::uint32_t d : shape) out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw IoError("failed writing tensor file: " + path.string());
}

struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<float> data;

    std::size_t count() const {
        std::size_t c = 1;
        for (std::uint32_t d : shape) c *= d;
        return c;
    }
};

inline Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("bad tensor magic in " + path.string());
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 4);
    if (!in || rank > 16) throw IoError("bad tensor rank in " + path.string());
    Tensor t;
    t.shape.resize(rank);
    for (std::uint32_t& d : t.shape) in.read(reinterpret_cast<char*>(&d), 4);
    if (!in) throw IoError("truncated tensor header in " + path.string());
    t.data.resize(t.count());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw IoError("tensor payload shorter than its declared shape: " + path.string());
    char extra;
    if (in.read(&extra, 1))
        throw IoError("tensor payload longer than its declared shape: " + path.string());
    return t;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

inline std::filesystem::path manifest_path(const std::filesystem::path& container) {
    if (std::filesystem::is_directory(container)) return container / "manifest.json";
    return container;
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << dump_json(j);
    if (!out) throw IoError("failed writing " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline json read_manifest(const std::filesystem::path& container) {
    const json manifest = read_json_file(manifest_path(container));
    if (!manifest.contains("schema_version"))
        throw IoError("manifest is missing schema_version: " + manifest_path(container).string());
    return manifest;
}

inline json provenance_json(const Provenance& prov) {
    return json{{"tool_version", prov.tool_version}, {"seed", prov.seed}, {"preset", prov.preset}};
}

inline json curve_spec_json(const CurveSpec& spec) {
    return json{{"family", to_string(spec.family)},
                {"degree", spec.degree},
                {"num_control_points", spec.num_control_points},
                {"knots", spec.knots}};
}

inline CurveSpec curve_spec_from_json(const json& j) {
    CurveSpec spec;
    spec.family = curve_family_from_string(j.at("family").get<std::string>());
    spec.degree = j.at("degree").get<int>();
    spec.num_control_points = j.at("num_control_points").get<int>();
    spec.knots = j.at("knots").get<std::vector<double>>();
    spec.validate();
    return spec;
}

namespace detail {

inline json tensor_entry(const std::string& name, std::span<const std::uint32_t> shape) {
    json entry;
    entry["name"] = name;
    entry["dtype"] = "f32";
    entry["shape"] = std::vector<std::uint32_t>(shape.begin(), shape.end());
    entry["file"] = name + ".tfz";
    return entry;
}

inline void write_named_tensor(const std::filesystem::path& dir, json& tensor_table,
                               const std::string& name, std::span<const float> data,
                               std::span<const std::uint32_t> shape) {
    write_tensor(dir / (name + ".tfz"), data, shape);
    tensor_table.push_back(tensor_entry(name, shape));
}

inline Tensor load_named_tensor(const std::filesystem::path& dir, const json& manifest,
                                const std::string& name) {
    for (const json& entry : manifest.at("tensors")) {
        if (entry.at("name").get<std::string>() != name) continue;
        if (entry.at("dtype").get<std::string>() != "f32")
            throw IoError("tensor '" + name + "' has unsupported dtype");
        Tensor t = read_tensor(dir / entry.at("file").get<std::string>());
        const auto declared = entry.at("shape").get<std::vector<std::uint32_t>>();
        if (declared != t.shape)
            throw IoError("tensor '" + name + "' shape differs between manifest and file");
        return t;
    }
    throw IoError("container has no tensor named '" + name + "'");
}

inline std::vector<float> to_f32(std::span<const double> xs) {
    std::vector<float> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<float>(xs[i]);
    return out;
}

inline std::vector<float> to_f32(std::span<const std::uint8_t> xs) {
    std::vector<float> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<float>(xs[i]);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Field containers
// ---------------------------------------------------------------------------

inline void write_field(const std::filesystem::path& dir, const TrajectoryField& field,
                        const Provenance& prov) {
    std::filesystem::create_directories(dir);
    const std::uint32_t n = static_cast<std::uint32_t>(field.num_frames());
    const std::uint32_t d = static_cast<std::uint32_t>(field.num_control_points());
    const std::uint32_t h = static_cast<std::uint32_t>(field.height());
    const std::uint32_t w = static_cast<std::uint32_t>(field.width());

    json manifest;
    manifest["schema_version"] = 1;
    manifest["role"] = "field";
    manifest["provenance"] = provenance_json(prov);
    manifest["curve"] = curve_spec_json(field.spec());
    manifest["timestamps"] = field.timestamps();
    json tensors = json::array();
    {
        const std::uint32_t shape[] = {n, d, h, w, 3};
        detail::write_named_tensor(dir, tensors, "control_points",
                                   detail::to_f32(field.control_data()), shape);
    }
    {
        const std::uint32_t shape[] = {n, d, h, w};
        detail::write_named_tensor(dir, tensors, "confidences",
                                   detail::to_f32(field.confidence_data()), shape);
    }
    {
        const std::uint32_t shape[] = {n, h, w};
        detail::write_named_tensor(dir, tensors, "valid", detail::to_f32(field.valid_data()),
                                   shape);
    }
    manifest["tensors"] = tensors;
    write_json_file(dir / "manifest.json", manifest);
}

inline TrajectoryField read_field(const std::filesystem::path& container) {
    const std::filesystem::path dir = manifest_path(container).parent_path();
    const json manifest = read_manifest(container);
    if (manifest.at("role").get<std::string>() != "field")
        throw IoError("container role is not 'field': " + container.string());
    const CurveSpec spec = curve_spec_from_json(manifest.at("curve"));
    const auto timestamps = manifest.at("timestamps").get<std::vector<double>>();

    const Tensor cps = detail::load_named_tensor(dir, manifest, "control_points");
    if (cps.shape.size() != 5 || cps.shape[4] != 3)
        throw IoError("control_points tensor must have shape (N, D, H, W, 3)");
    const int n = static_cast<int>(cps.shape[0]);
    const int d = static_cast<int>(cps.shape[1]);
    const int h = static_cast<int>(cps.shape[2]);
    const int w = static_cast<int>(cps.shape[3]);
    if (d != spec.num_control_points)
        throw IoError("control_points tensor disagrees with the curve spec");

    TrajectoryField field(n, h, w, spec, timestamps);
    for (std::size_t i = 0; i < cps.data.size(); ++i)
        field.control_data()[i] = static_cast<double>(cps.data[i]);

    const Tensor conf = detail::load_named_tensor(dir, manifest, "confidences");
    if (conf.count() != field.confidence_data().size())
        throw IoError("confidences tensor has the wrong size");
    for (std::size_t i = 0; i < conf.data.size(); ++i)
        field.confidence_data()[i] = static_cast<double>(conf.data[i]);

    const Tensor valid = detail::load_named_tensor(dir, manifest, "valid");
    if (valid.count() != field.valid_data().size())
        throw IoError("valid tensor has the wrong size");
    for (std::size_t i = 0; i < valid.data.size(); ++i)
        field.valid_data()[i] = valid.data[i] != 0.0f ? 1 : 0;
    return field;
}

// ---------------------------------------------------------------------------
// Bundle containers
// ---------------------------------------------------------------------------

inline void write_bundle(const std::filesystem::path& dir, const GroundTruthBundle& gt,
                         const Provenance& prov) {
    if (gt.empty()) throw InputError("refusing to write an empty ground-truth bundle");
    std::filesystem::create_directories(dir);
    const std::uint32_t n = static_cast<std::uint32_t>(gt.num_frames);
    const std::uint32_t h = static_cast<std::uint32_t>(gt.height);
    const std::uint32_t w = static_cast<std::uint32_t>(gt.width);

    json manifest;
    manifest["schema_version"] = 1;
    manifest["role"] = "bundle";
    manifest["provenance"] = provenance_json(prov);
    manifest["timestamps"] = gt.timestamps;
    json tensors = json::array();
    {
        const std::uint32_t shape[] = {n, n, h, w, 3};
        detail::write_named_tensor(dir, tensors, "positions", detail::to_f32(gt.positions), shape);
    }
    {
        const std::uint32_t shape[] = {n, n, h, w};
        detail::write_named_tensor(dir, tensors, "valid", detail::to_f32(gt.valid), shape);
        detail::write_named_tensor(dir, tensors, "visible", detail::to_f32(gt.visible), shape);
    }
    {
        const std::uint32_t shape[] = {n, h, w};
        detail::write_named_tensor(dir, tensors, "static_mask", detail::to_f32(gt.static_mask),
                                   shape);
        std::vector<float> labels(gt.rigid_labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            labels[i] = static_cast<float>(gt.rigid_labels[i]);
        detail::write_named_tensor(dir, tensors, "rigid_labels", labels, shape);
        detail::write_named_tensor(dir, tensors, "depth", detail::to_f32(gt.depth), shape);
    }
    {
        std::vector<float> cam_k, cam_q, cam_t;
        for (const Camera& c : gt.cameras) {
            cam_k.push_back(static_cast<float>(c.focal));
            cam_k.push_back(static_cast<float>(c.cx));
            cam_k.push_back(static_cast<float>(c.cy));
            cam_q.push_back(static_cast<float>(c.rotation.w()));
            cam_q.push_back(static_cast<float>(c.rotation.x()));
            cam_q.push_back(static_cast<float>(c.rotation.y()));
            cam_q.push_back(static_cast<float>(c.rotation.z()));
            cam_t.push_back(static_cast<float>(c.translation.x()));
            cam_t.push_back(static_cast<float>(c.translation.y()));
            cam_t.push_back(static_cast<float>(c.translation.z()));
        }
        const std::uint32_t shape_k[] = {n, 3};
        const std::uint32_t shape_q[] = {n, 4};
        detail::write_named_tensor(dir, tensors, "cam_intrinsics", cam_k, shape_k);
        detail::write_named_tensor(dir, tensors, "cam_rotations", cam_q, shape_q);
        detail::write_named_tensor(dir, tensors, "cam_translations", cam_t, shape_k);
    }
    {
        std::vector<float> corr;
        corr.reserve(gt.correspondences.size() * 6);
        for (const CorrespondencePair& c : gt.correspondences) {
            corr.push_back(static_cast<float>(c.i));
            corr.push_back(static_cast<float>(c.u));
            corr.push_back(static_cast<float>(c.v));
            corr.push_back(static_cast<float>(c.j));
            corr.push_back(static_cast<float>(c.u2));
            corr.push_back(static_cast<float>(c.v2));
        }
        const std::uint32_t shape[] = {static_cast<std::uint32_t>(gt.correspondences.size()), 6};
        detail::write_named_tensor(dir, tensors, "correspondences", corr, shape);
    }
    manifest["tensors"] = tensors;
    write_json_file(dir / "manifest.json", manifest);
}

inline GroundTruthBundle read_bundle(const std::filesystem::path& container) {
    const std::filesystem::path dir = manifest_path(container).parent_path();
    const json manifest = read_manifest(container);
    if (manifest.at("role").get<std::string>() != "bundle")
        throw IoError("container role is not 'bundle': " + container.string());

    const Tensor pos = detail::load_named_tensor(dir, manifest, "positions");
    if (pos.shape.size() != 5 || pos.shape[0] != pos.shape[1] || pos.shape[4] != 3)
        throw IoError("positions tensor must have shape (N, N, H, W, 3)");
    GroundTruthBundle gt;
    gt.allocate(static_cast<int>(pos.shape[0]), static_cast<int>(pos.shape[2]),
                static_cast<int>(pos.shape[3]));
    gt.timestamps = manifest.at("timestamps").get<std::vector<double>>();
    if (gt.timestamps.size() != pos.shape[0])
        throw IoError("timestamp count disagrees with the positions tensor");

    for (std::size_t i = 0; i < pos.data.size(); ++i)
        gt.positions[i] = static_cast<double>(pos.data[i]);

    auto load_flags = [&](const std::string& name, std::vector<std::uint8_t>& dst) {
        const Tensor t = detail::load_named_tensor(dir, manifest, name);
        if (t.count() != dst.size()) throw IoError("tensor '" + name + "' has the wrong size");
        for (std::size_t i = 0; i < t.data.size(); ++i) dst[i] = t.data[i] != 0.0f ? 1 : 0;
    };
    load_flags("valid", gt.valid);
    load_flags("visible", gt.visible);
    load_flags("static_mask", gt.static_mask);

    const Tensor labels = detail::load_named_tensor(dir, manifest, "rigid_labels");
    if (labels.count() != gt.rigid_labels.size())
        throw IoError("rigid_labels tensor has the wrong size");
    for (std::size_t i = 0; i < labels.data.size(); ++i)
        gt.rigid_labels[i] = static_cast<std::int32_t>(labels.data[i]);

    const Tensor depth = detail::load_named_tensor(dir, manifest, "depth");
    if (depth.count() != gt.depth.size()) throw IoError("depth tensor has the wrong size");
    for (std::size_t i = 0; i < depth.data.size(); ++i)
        gt.depth[i] = static_cast<double>(depth.data[i]);

    const Tensor cam_k = detail::load_named_tensor(dir, manifest, "cam_intrinsics");
    const Tensor cam_q = detail::load_named_tensor(dir, manifest, "cam_rotations");
    const Tensor cam_t = detail::load_named_tensor(dir, manifest, "cam_translations");
    if (cam_k.shape[0] != pos.shape[0] || cam_q.shape[0] != pos.shape[0] ||
        cam_t.shape[0] != pos.shape[0])
        throw IoError("camera tensors disagree with the frame count");
    for (std::size_t i = 0; i < gt.cameras.size(); ++i) {
        Camera& c = gt.cameras[i];
        c.focal = static_cast<double>(cam_k.data[i * 3 + 0]);
        c.cx = static_cast<double>(cam_k.data[i * 3 + 1]);
        c.cy = static_cast<double>(cam_k.data[i * 3 + 2]);
        c.rotation = Quat(static_cast<double>(cam_q.data[i * 4 + 0]),
                          static_cast<double>(cam_q.data[i * 4 + 1]),
                          static_cast<double>(cam_q.data[i * 4 + 2]),
                          static_cast<double>(cam_q.data[i * 4 + 3]));
        c.rotation.normalize();
        c.translation = Vec3(static_cast<double>(cam_t.data[i * 3 + 0]),
                             static_cast<double>(cam_t.data[i * 3 + 1]),
                             static_cast<double>(cam_t.data[i * 3 + 2]));
    }

    const Tensor corr = detail::load_named_tensor(dir, manifest, "correspondences");
    if (corr.shape.size() != 2 || corr.shape[1] != 6)
        throw IoError("correspondences tensor must have shape (M, 6)");
    gt.correspondences.resize(corr.shape[0]);
    for (std::size_t p = 0; p < gt.correspondences.size(); ++p) {
        CorrespondencePair& c = gt.correspondences[p];
        c.i = static_cast<int>(corr.data[p * 6 + 0]);
        c.u = static_cast<int>(corr.data[p * 6 + 1]);
        c.v = static_cast<int>(corr.data[p * 6 + 2]);
        c.j = static_cast<int>(corr.data[p * 6 + 3]);
        c.u2 = static_cast<int>(corr.data[p * 6 + 4]);
        c.v2 = static_cast<int>(corr.data[p * 6 + 5]);
    }
    return gt;
}

}  // namespace trajfield::tfz

#endif  // TRAJFIELD_TFZ_HPP
