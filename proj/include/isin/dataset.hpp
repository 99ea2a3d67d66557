#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "isin/netpbm.hpp"
#include "isin/rng.hpp"
#include "isin/tensor.hpp"

namespace isin {

/// Enumerated part states of one category. Part ids are 1..k in listed
/// order; 0 is background. State bins are laid out part by part.
struct PartStateSchema {
    struct Part {
        std::string name;
        std::vector<std::string> phrases;
    };

    std::string category;
    std::vector<Part> parts;

    int num_parts() const { return static_cast<int>(parts.size()); }

    int total_state_bins() const {
        int n = 0;
        for (const auto& p : parts) n += static_cast<int>(p.phrases.size());
        return n;
    }

    /// First bin index of part id (1-based).
    int bin_offset(int part_id) const {
        check(part_id >= 1 && part_id <= num_parts(), "schema: bad part id");
        int off = 0;
        for (int i = 0; i < part_id - 1; ++i) off += static_cast<int>(parts[static_cast<size_t>(i)].phrases.size());
        return off;
    }

    int bins_of(int part_id) const {
        return static_cast<int>(parts.at(static_cast<size_t>(part_id - 1)).phrases.size());
    }

    /// Part id (1-based) owning a state bin.
    int part_of_bin(int bin) const {
        int off = 0;
        for (int i = 0; i < num_parts(); ++i) {
            off += static_cast<int>(parts[static_cast<size_t>(i)].phrases.size());
            if (bin < off) return i + 1;
        }
        throw std::invalid_argument("schema: bin out of range");
    }

    std::string canonical() const {
        std::ostringstream os;
        os << category << '\n';
        for (const auto& p : parts) {
            os << p.name << '\t';
            for (size_t i = 0; i < p.phrases.size(); ++i) os << (i ? "|" : "") << p.phrases[i];
            os << '\n';
        }
        return os.str();
    }

    uint64_t fingerprint() const { return Rng::fnv1a(canonical()); }

    void validate() const {
        check(!parts.empty(), "schema: no parts");
        for (const auto& p : parts) check(!p.phrases.empty(), "schema: part '" + p.name + "' has no states");
    }
};

/// Fixed toy schema: a "widget" with body, panel and knob.
/// Bin layout: 0 body/upright, 1 body/tilted, 2 panel/in use,
/// 3 panel/idle, 4 knob/attached, 5 knob/detached.
inline PartStateSchema default_schema() {
    PartStateSchema s;
    s.category = "widget";
    s.parts = {{"body", {"upright", "tilted"}},
               {"panel", {"in use", "idle"}},
               {"knob", {"attached", "detached"}}};
    return s;
}

struct Sample {
    Tensor<float> image;        // HxWx3 in [0,1], quantized to the 8-bit grid
    Tensor<uint8_t> labels;     // HxW part ids, 0 = background
    std::vector<uint8_t> states;  // one bit per schema state bin
    std::string category;
    std::string id;

    bool operator==(const Sample& o) const {
        return id == o.id && category == o.category && states == o.states &&
               labels.shape == o.labels.shape && labels.data == o.labels.data &&
               image.shape == o.image.shape && image.data == o.image.data;
    }
};

struct GenConfig {
    uint64_t seed = 0;
    int image_size = 32;
    int num_samples = 100;
    double occluder_probability = 0.5;
    double detach_probability = 0.15;
    double noise_sigma = 0.03;

    void validate() const {
        check(image_size >= 16, "gen: image_size must be >= 16, got " + std::to_string(image_size));
        check(num_samples >= 0, "gen: num_samples must be nonnegative");
        check(occluder_probability >= 0 && occluder_probability <= 1, "gen: occluder_probability not in [0,1]");
        check(detach_probability >= 0 && detach_probability <= 1, "gen: detach_probability not in [0,1]");
        check(noise_sigma >= 0, "gen: noise_sigma must be nonnegative");
    }
};

/// Ground-truth scene description behind one rendered sample; kept so
/// tests can re-derive the state bits from geometry.
struct SceneRecord {
    bool body_tilted = false;
    bool panel_occluded = false;
    bool knob_present = true;
    bool knob_detached = false;
    double tilt_angle = 0;  // radians, 0 when upright
    double body_cx = 0, body_cy = 0, body_w = 0, body_h = 0;
    double panel_cx = 0, panel_cy = 0, panel_w = 0, panel_h = 0;  // body frame
    double knob_cx = 0, knob_cy = 0, knob_r = 0;                  // image frame
    double blob_cx = 0, blob_cy = 0, blob_rx = 0, blob_ry = 0;    // image frame
};

namespace detail {

struct Color3 {
    double r, g, b;
};

inline bool in_rot_rect(double px, double py, double cx, double cy, double w, double h, double ang) {
    const double dx = px - cx, dy = py - cy;
    const double ca = std::cos(-ang), sa = std::sin(-ang);
    const double lx = dx * ca - dy * sa, ly = dx * sa + dy * ca;
    return std::abs(lx) <= w / 2 && std::abs(ly) <= h / 2;
}

inline bool in_ellipse(double px, double py, double cx, double cy, double rx, double ry) {
    const double dx = (px - cx) / rx, dy = (py - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
}

inline void render_scene(const SceneRecord& sc, int n, const Color3& bg, const Color3& body_c,
                         const Color3& panel_c, const Color3& knob_c, const Color3& blob_c,
                         Tensor<float>& image, Tensor<uint8_t>& labels) {
    image = Tensor<float>({n, n, 3});
    labels = Tensor<uint8_t>({n, n});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            Color3 c = bg;
            uint8_t lab = 0;
            if (in_rot_rect(px, py, sc.body_cx, sc.body_cy, sc.body_w, sc.body_h, sc.tilt_angle)) {
                c = body_c;
                lab = 1;
                // panel lives in the body frame, rotated along with it
                const double ca = std::cos(sc.tilt_angle), sa = std::sin(sc.tilt_angle);
                const double pcx = sc.body_cx + sc.panel_cx * ca - sc.panel_cy * sa;
                const double pcy = sc.body_cy + sc.panel_cx * sa + sc.panel_cy * ca;
                if (in_rot_rect(px, py, pcx, pcy, sc.panel_w, sc.panel_h, sc.tilt_angle)) {
                    c = panel_c;
                    lab = 2;
                }
            }
            if (sc.panel_occluded &&
                in_ellipse(px, py, sc.blob_cx, sc.blob_cy, sc.blob_rx, sc.blob_ry)) {
                c = blob_c;
                lab = 0;  // occluded area is not part of any part mask
            }
            if (sc.knob_present && in_ellipse(px, py, sc.knob_cx, sc.knob_cy, sc.knob_r, sc.knob_r)) {
                c = knob_c;
                lab = 3;
            }
            const size_t off = (static_cast<size_t>(y) * n + x) * 3;
            image.data[off + 0] = static_cast<float>(c.r);
            image.data[off + 1] = static_cast<float>(c.g);
            image.data[off + 2] = static_cast<float>(c.b);
            labels.data[static_cast<size_t>(y) * n + x] = lab;
        }
}

inline int count_label(const Tensor<uint8_t>& labels, uint8_t v) {
    int n = 0;
    for (uint8_t l : labels.data) n += (l == v);
    return n;
}

}  // namespace detail

/// Deterministic generator: same (seed, cfg, schema) gives byte-identical
/// samples. Returns the scene records alongside for property checks.
inline std::vector<Sample> generate_with_scenes(const GenConfig& cfg, const PartStateSchema& schema,
                                                std::vector<SceneRecord>* scenes_out) {
    cfg.validate();
    schema.validate();
    check(schema.total_state_bins() == 6 && schema.num_parts() == 3,
          "generate: generator draws the 3-part widget schema");
    Rng rng = Rng::substream(cfg.seed, "data");
    const int n = cfg.image_size;
    std::vector<Sample> out;
    if (scenes_out) scenes_out->clear();

    for (int i = 0; i < cfg.num_samples; ++i) {
        Sample s;
        SceneRecord sc;
        Tensor<float> image;
        Tensor<uint8_t> labels;
        detail::Color3 bg, body_c, panel_c, knob_c, blob_c;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            sc = SceneRecord{};
            sc.body_tilted = rng.bernoulli(0.5);
            sc.panel_occluded = rng.bernoulli(cfg.occluder_probability);
            sc.knob_present = !rng.bernoulli(cfg.detach_probability);
            sc.knob_detached = sc.knob_present && rng.bernoulli(0.5);
            sc.tilt_angle = sc.body_tilted
                                ? (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.30, 0.60)
                                : 0.0;
            sc.body_cx = n * rng.uniform(0.45, 0.55);
            sc.body_cy = n * rng.uniform(0.50, 0.58);
            sc.body_w = n * rng.uniform(0.50, 0.62);
            sc.body_h = n * rng.uniform(0.40, 0.52);
            sc.panel_w = sc.body_w * rng.uniform(0.55, 0.70);
            sc.panel_h = sc.body_h * rng.uniform(0.40, 0.52);
            sc.panel_cx = 0;
            sc.panel_cy = -sc.body_h * 0.18;
            const double ca = std::cos(sc.tilt_angle), sa = std::sin(sc.tilt_angle);
            sc.knob_r = n * rng.uniform(0.055, 0.085);
            // knob sits on the body's top edge (attached) or floats above it
            const double gap = sc.knob_detached ? sc.knob_r + n * rng.uniform(0.06, 0.12) : 0.0;
            const double along = sc.body_w * rng.uniform(-0.25, 0.25);
            const double above = sc.body_h / 2 + gap;
            sc.knob_cx = sc.body_cx + along * ca - (-above) * sa;
            sc.knob_cy = sc.body_cy + along * sa + (-above) * ca;
            if (sc.panel_occluded) {
                sc.blob_rx = sc.panel_w * rng.uniform(0.28, 0.42);
                sc.blob_ry = sc.panel_h * rng.uniform(0.35, 0.55);
                const double bx = sc.panel_cx + sc.panel_w * rng.uniform(-0.25, 0.25);
                const double by = sc.panel_cy + sc.panel_h * rng.uniform(-0.25, 0.25);
                sc.blob_cx = sc.body_cx + bx * ca - by * sa;
                sc.blob_cy = sc.body_cy + bx * sa + by * ca;
            }
            bg = {rng.uniform(0.05, 0.20), rng.uniform(0.05, 0.20), rng.uniform(0.05, 0.20)};
            body_c = {rng.uniform(0.10, 0.20), rng.uniform(0.20, 0.35), rng.uniform(0.60, 0.85)};
            panel_c = {rng.uniform(0.10, 0.20), rng.uniform(0.60, 0.85), rng.uniform(0.15, 0.30)};
            knob_c = {rng.uniform(0.70, 0.90), rng.uniform(0.10, 0.20), rng.uniform(0.10, 0.25)};
            blob_c = {rng.uniform(0.80, 0.95), rng.uniform(0.50, 0.65), rng.uniform(0.30, 0.45)};

            detail::render_scene(sc, n, bg, body_c, panel_c, knob_c, blob_c, image, labels);
            // every present part must keep at least one visible pixel
            ok = detail::count_label(labels, 1) > 0 && detail::count_label(labels, 2) > 0 &&
                 (!sc.knob_present || detail::count_label(labels, 3) > 0) &&
                 sc.knob_cx > sc.knob_r && sc.knob_cx < n - sc.knob_r && sc.knob_cy > sc.knob_r;
        }
        if (!ok) throw std::runtime_error("generate: could not realize a valid scene");

        if (cfg.noise_sigma > 0)
            for (float& v : image.data) {
                double x = v + cfg.noise_sigma * rng.normal();
                v = static_cast<float>(x < 0 ? 0 : (x > 1 ? 1 : x));
            }
        // snap to the 8-bit grid so the on-disk round trip is exact
        for (float& v : image.data)
            v = static_cast<float>(static_cast<int>(v * 255.0f + 0.5f)) / 255.0f;

        s.image = std::move(image);
        s.labels = std::move(labels);
        s.states.assign(static_cast<size_t>(schema.total_state_bins()), 0);
        s.states[sc.body_tilted ? 1 : 0] = 1;
        s.states[sc.panel_occluded ? 2 : 3] = 1;
        if (sc.knob_present) s.states[sc.knob_detached ? 5 : 4] = 1;
        s.category = schema.category;
        std::ostringstream id;
        id << schema.category << "_" << std::setw(6) << std::setfill('0') << i;
        s.id = id.str();
        out.push_back(std::move(s));
        if (scenes_out) scenes_out->push_back(sc);
    }
    return out;
}

inline std::vector<Sample> generate(const GenConfig& cfg, const PartStateSchema& schema) {
    return generate_with_scenes(cfg, schema, nullptr);
}

enum class Split { train, val, test };

/// 70/15/15 split, a pure function of the sample id hash.
inline Split split_of(const std::string& id) {
    const uint64_t h = Rng::fnv1a(id) % 100;
    if (h < 70) return Split::train;
    if (h < 85) return Split::val;
    return Split::test;
}

// ---- on-disk format -----------------------------------------------------

inline void write_schema(const PartStateSchema& schema, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot create");
    os << schema.canonical();
}

inline PartStateSchema read_schema(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    PartStateSchema s;
    if (!std::getline(is, s.category) || s.category.empty())
        throw std::runtime_error(path + ":1: missing category line");
    std::string line;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected part<TAB>phrases");
        PartStateSchema::Part p;
        p.name = line.substr(0, tab);
        std::string rest = line.substr(tab + 1);
        size_t pos = 0;
        while (true) {
            const size_t bar = rest.find('|', pos);
            p.phrases.push_back(rest.substr(pos, bar == std::string::npos ? bar : bar - pos));
            if (bar == std::string::npos) break;
            pos = bar + 1;
        }
        s.parts.push_back(std::move(p));
    }
    s.validate();
    return s;
}

inline void write_dataset(const std::vector<Sample>& samples, const PartStateSchema& schema,
                          const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");
    write_schema(schema, (fs::path(dir) / "schema.txt").string());
    std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::binary);
    if (!manifest) throw std::runtime_error(dir + "/manifest.txt: cannot create");
    const int bins = schema.total_state_bins();
    for (const auto& s : samples) {
        check(static_cast<int>(s.states.size()) == bins, "write_dataset: state length mismatch for " + s.id);
        const std::string img_rel = "images/" + s.id + ".ppm";
        const std::string lab_rel = "labels/" + s.id + ".pgm";
        netpbm::write((fs::path(dir) / img_rel).string(), netpbm::from_tensor_rgb(s.image));
        netpbm::Image li;
        li.width = s.labels.dim(1);
        li.height = s.labels.dim(0);
        li.channels = 1;
        li.pixels.assign(s.labels.data.begin(), s.labels.data.end());
        netpbm::write((fs::path(dir) / lab_rel).string(), li);
        manifest << s.id << '\t' << img_rel << '\t' << lab_rel << '\t';
        for (uint8_t b : s.states) manifest << (b ? '1' : '0');
        manifest << '\n';
    }
}

struct Dataset {
    PartStateSchema schema;
    std::vector<Sample> samples;
};

inline Dataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.schema = read_schema((fs::path(dir) / "schema.txt").string());
    const int bins = ds.schema.total_state_bins();
    const int k = ds.schema.num_parts();
    const std::string mpath = (fs::path(dir) / "manifest.txt").string();
    std::ifstream manifest(mpath, std::ios::binary);
    if (!manifest) throw std::runtime_error(mpath + ": cannot open");
    std::string line;
    int lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = mpath + ":" + std::to_string(lineno);
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            const size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != 4) throw std::runtime_error(where + ": expected 4 tab-separated fields");
        Sample s;
        s.id = fields[0];
        s.category = ds.schema.category;
        const std::string img_path = (fs::path(dir) / fields[1]).string();
        const std::string lab_path = (fs::path(dir) / fields[2]).string();
        if (!fs::exists(img_path)) throw std::runtime_error(where + ": missing image file " + img_path);
        if (!fs::exists(lab_path)) throw std::runtime_error(where + ": missing label file " + lab_path);
        s.image = netpbm::to_tensor_rgb<float>(netpbm::read(img_path));
        netpbm::Image li = netpbm::read(lab_path);
        if (li.channels != 1) throw std::runtime_error(lab_path + ": label map must be PGM");
        s.labels = Tensor<uint8_t>({li.height, li.width});
        for (size_t i = 0; i < li.pixels.size(); ++i) {
            if (li.pixels[i] > k)
                throw std::runtime_error(lab_path + ": label value " + std::to_string(li.pixels[i]) +
                                         " exceeds part count " + std::to_string(k));
            s.labels.data[i] = li.pixels[i];
        }
        if (static_cast<int>(fields[3].size()) != bins)
            throw std::runtime_error(where + ": state bits length " + std::to_string(fields[3].size()) +
                                     " != " + std::to_string(bins));
        for (char c : fields[3]) {
            if (c != '0' && c != '1') throw std::runtime_error(where + ": state bits must be 0/1");
            s.states.push_back(c == '1');
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace isin
