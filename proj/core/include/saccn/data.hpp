#pragma once

// Ground-truth density generation, synthetic crowd scenes, augmentation and
// dataset file I/O. Point coordinates live on the pixel grid: a point is in
// bounds when 0 <= x <= W-1 and 0 <= y <= H-1, matching the mirror used by
// horizontal flips.
//
// On-disk layout per scene: <id>.pgm (binary P5 grayscale or P6 RGB, 8-bit)
// plus <id>.ann (one "x y" decimal pair per line, LF-terminated, '#'
// comments allowed). Density maps are emitted as <id>.den.pgm
// (max-normalized for viewing) plus <id>.den.json with the true numbers.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saccn/common.hpp"
#include "saccn/rng.hpp"

namespace saccn {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Scene {
    int64_t height = 0;
    int64_t width = 0;
    int64_t channels = 1;
    std::vector<float> pixels;  // H x W x C, values in [0,1]
    std::vector<Point> points;
    std::string id;

    float& at(int64_t y, int64_t x, int64_t c = 0) {
        return pixels[static_cast<size_t>((y * width + x) * channels + c)];
    }
    float at(int64_t y, int64_t x, int64_t c = 0) const {
        return pixels[static_cast<size_t>((y * width + x) * channels + c)];
    }
    bool points_in_bounds() const {
        for (const auto& p : points)
            if (p.x < 0 || p.x > static_cast<double>(width - 1) || p.y < 0 ||
                p.y > static_cast<double>(height - 1))
                return false;
        return true;
    }
};

struct DensityMap {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<double> values;  // H x W, non-negative

    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    double& at(int64_t y, int64_t x) { return values[static_cast<size_t>(y * width + x)]; }
    double at(int64_t y, int64_t x) const { return values[static_cast<size_t>(y * width + x)]; }
};

// Sum over points of a Gaussian truncated at radius 3*sigma, each kernel
// renormalized to unit mass after truncation and border clipping, so the map
// integrates exactly to the point count.
inline DensityMap gt_density(const std::vector<Point>& points, int64_t height, int64_t width, double sigma) {
    if (sigma <= 0.0) throw Error(msg("gt_density: sigma must be positive, got ", sigma));
    DensityMap d;
    d.height = height;
    d.width = width;
    d.values.assign(static_cast<size_t>(height * width), 0.0);

    const double radius = 3.0 * sigma;
    const double r2 = radius * radius;
    const double inv = 1.0 / (2.0 * sigma * sigma);

    for (const auto& p : points) {
        if (p.x < 0 || p.x > static_cast<double>(width - 1) || p.y < 0 || p.y > static_cast<double>(height - 1))
            throw Error(msg("gt_density: point (", p.x, ",", p.y, ") outside ", height, "x", width, " image"));
        const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(p.x - radius)));
        const int64_t x1 = std::min<int64_t>(width - 1, static_cast<int64_t>(std::ceil(p.x + radius)));
        const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(p.y - radius)));
        const int64_t y1 = std::min<int64_t>(height - 1, static_cast<int64_t>(std::ceil(p.y + radius)));

        double mass = 0.0;
        for (int64_t y = y0; y <= y1; ++y)
            for (int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - p.x;
                const double dy = static_cast<double>(y) - p.y;
                const double dd = dx * dx + dy * dy;
                if (dd <= r2) mass += std::exp(-dd * inv);
            }
        const double scale = 1.0 / mass;  // nearest pixel always contributes, mass > 0
        for (int64_t y = y0; y <= y1; ++y)
            for (int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - p.x;
                const double dy = static_cast<double>(y) - p.y;
                const double dd = dx * dx + dy * dy;
                if (dd <= r2) d.at(y, x) += std::exp(-dd * inv) * scale;
            }
    }
    return d;
}

// ---------------------------------------------------------------------------
// synthetic scenes
// ---------------------------------------------------------------------------

struct SynthParams {
    int64_t height = 64;
    int64_t width = 64;
    int64_t count_min = 0;
    int64_t count_max = 20;
    double scale_min = 2.0;   // head blob radius range, emulating crowd-scale variation
    double scale_max = 6.0;
    int64_t clutter = 3;      // non-head shapes per scene (rectangles, line segments)
    int64_t channels = 1;
};

// Renders head blobs (radial intensity bumps) over a cluttered background.
// Deterministic in the rng: same stream, same scene bit-for-bit.
inline Scene synth_scene(const Rng& rng, const SynthParams& sp, std::string id) {
    if (sp.count_min < 0 || sp.count_max < sp.count_min)
        throw Error("synth_scene: invalid head-count range");
    if (sp.scale_min <= 0 || sp.scale_max < sp.scale_min)
        throw Error("synth_scene: invalid scale range");

    Scene s;
    s.height = sp.height;
    s.width = sp.width;
    s.channels = sp.channels;
    s.id = std::move(id);
    s.pixels.assign(static_cast<size_t>(sp.height * sp.width * sp.channels), 0.0f);

    const Rng bg = rng.fork("background");
    const double base = bg.uniform(0, 0.05, 0.20);
    const double slope = bg.uniform(1, -0.05, 0.05);
    for (int64_t y = 0; y < sp.height; ++y)
        for (int64_t x = 0; x < sp.width; ++x) {
            const float v = static_cast<float>(base + slope * static_cast<double>(x) / static_cast<double>(sp.width));
            for (int64_t c = 0; c < sp.channels; ++c) s.at(y, x, c) = v;
        }

    const Rng cl = rng.fork("clutter");
    for (int64_t i = 0; i < sp.clutter; ++i) {
        const Rng r = cl.fork(static_cast<uint64_t>(i));
        const double level = r.uniform(0, 0.10, 0.45);
        if (r.uniform(1) < 0.5) {  // axis-aligned rectangle
            int64_t xa = r.uniform_int(2, 0, sp.width - 1), xb = r.uniform_int(3, 0, sp.width - 1);
            int64_t ya = r.uniform_int(4, 0, sp.height - 1), yb = r.uniform_int(5, 0, sp.height - 1);
            if (xa > xb) std::swap(xa, xb);
            if (ya > yb) std::swap(ya, yb);
            for (int64_t y = ya; y <= yb; ++y)
                for (int64_t x = xa; x <= xb; ++x)
                    for (int64_t c = 0; c < sp.channels; ++c)
                        s.at(y, x, c) = std::min(1.0f, s.at(y, x, c) + static_cast<float>(level) * 0.5f);
        } else {  // line segment, 1px
            const double xa = r.uniform(2, 0, static_cast<double>(sp.width - 1));
            const double ya = r.uniform(3, 0, static_cast<double>(sp.height - 1));
            const double xb = r.uniform(4, 0, static_cast<double>(sp.width - 1));
            const double yb = r.uniform(5, 0, static_cast<double>(sp.height - 1));
            const int64_t steps = 2 * std::max(sp.width, sp.height);
            for (int64_t t = 0; t <= steps; ++t) {
                const double u = static_cast<double>(t) / static_cast<double>(steps);
                const int64_t x = static_cast<int64_t>(std::lround(xa + (xb - xa) * u));
                const int64_t y = static_cast<int64_t>(std::lround(ya + (yb - ya) * u));
                for (int64_t c = 0; c < sp.channels; ++c)
                    s.at(y, x, c) = std::min(1.0f, s.at(y, x, c) + static_cast<float>(level) * 0.5f);
            }
        }
    }

    const Rng hd = rng.fork("heads");
    const int64_t n = hd.uniform_int(0, sp.count_min, sp.count_max);
    for (int64_t i = 0; i < n; ++i) {
        const Rng r = hd.fork(static_cast<uint64_t>(i) + 1);
        const double radius = r.uniform(0, sp.scale_min, sp.scale_max);
        const double margin = 1.0;
        const double px = r.uniform(1, margin, static_cast<double>(sp.width - 1) - margin);
        const double py = r.uniform(2, margin, static_cast<double>(sp.height - 1) - margin);
        const double amp = r.uniform(3, 0.5, 0.9);
        const double denom = 2.0 * (radius / 2.0) * (radius / 2.0);

        const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(px - 3 * radius));
        const int64_t x1 = std::min<int64_t>(sp.width - 1, static_cast<int64_t>(px + 3 * radius));
        const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(py - 3 * radius));
        const int64_t y1 = std::min<int64_t>(sp.height - 1, static_cast<int64_t>(py + 3 * radius));
        for (int64_t y = y0; y <= y1; ++y)
            for (int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - px;
                const double dy = static_cast<double>(y) - py;
                const double g = amp * std::exp(-(dx * dx + dy * dy) / denom);
                for (int64_t c = 0; c < sp.channels; ++c)
                    s.at(y, x, c) = std::min(1.0f, s.at(y, x, c) + static_cast<float>(g));
            }
        s.points.push_back(Point{px, py});
    }
    return s;
}

// ---------------------------------------------------------------------------
// augmentation: random crop + horizontal flip
// ---------------------------------------------------------------------------

inline Scene augment(const Scene& in, int64_t crop_h, int64_t crop_w, double flip_p, const Rng& rng) {
    if (crop_h > in.height || crop_w > in.width)
        throw Error(msg("augment: crop ", crop_h, "x", crop_w, " larger than image ", in.height, "x", in.width));

    const int64_t y0 = rng.uniform_int(0, 0, in.height - crop_h);
    const int64_t x0 = rng.uniform_int(1, 0, in.width - crop_w);
    const bool flip = rng.uniform(2) < flip_p;

    Scene out;
    out.height = crop_h;
    out.width = crop_w;
    out.channels = in.channels;
    out.id = in.id;
    out.pixels.resize(static_cast<size_t>(crop_h * crop_w * in.channels));
    for (int64_t y = 0; y < crop_h; ++y)
        for (int64_t x = 0; x < crop_w; ++x) {
            const int64_t sx = flip ? x0 + (crop_w - 1 - x) : x0 + x;
            for (int64_t c = 0; c < in.channels; ++c) out.at(y, x, c) = in.at(y0 + y, sx, c);
        }

    for (const auto& p : in.points) {
        const double nx = p.x - static_cast<double>(x0);
        const double ny = p.y - static_cast<double>(y0);
        if (nx < 0 || nx > static_cast<double>(crop_w - 1) || ny < 0 || ny > static_cast<double>(crop_h - 1))
            continue;  // outside the crop window
        out.points.push_back(Point{flip ? static_cast<double>(crop_w - 1) - nx : nx, ny});
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM / PPM I/O (P5 grayscale, P6 RGB, maxval 255)
// ---------------------------------------------------------------------------

inline void write_pgm(const std::string& path, int64_t height, int64_t width, int64_t channels,
                      const std::vector<uint8_t>& bytes) {
    if (channels != 1 && channels != 3)
        throw DataError(msg("write_pgm: ", channels, " channels unsupported (1 or 3)"));
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError(msg("cannot open '", path, "' for writing"));
    os << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError(msg("write failed for '", path, "'"));
}

struct PgmImage {
    int64_t height = 0, width = 0, channels = 1;
    std::vector<uint8_t> bytes;
};

inline PgmImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(msg("cannot open '", path, "'"));
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6") throw DataError(msg("'", path, "': not a binary PGM/PPM file"));

    auto next_token = [&]() -> int64_t {
        // skips whitespace and '#' comment lines
        while (true) {
            int ch = is.peek();
            if (ch == '#') {
                std::string line;
                std::getline(is, line);
            } else if (std::isspace(ch)) {
                is.get();
            } else {
                break;
            }
        }
        int64_t v;
        if (!(is >> v)) throw DataError(msg("'", path, "': malformed header"));
        return v;
    };

    PgmImage img;
    img.channels = magic == "P5" ? 1 : 3;
    img.width = next_token();
    img.height = next_token();
    const int64_t maxval = next_token();
    if (maxval != 255) throw DataError(msg("'", path, "': maxval ", maxval, " unsupported (need 255)"));
    is.get();  // single whitespace after maxval
    img.bytes.resize(static_cast<size_t>(img.height * img.width * img.channels));
    is.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.bytes.size()))
        throw DataError(msg("'", path, "': truncated pixel data"));
    return img;
}

inline std::vector<uint8_t> quantize_pixels(const std::vector<float>& pixels) {
    std::vector<uint8_t> bytes(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        const float v = std::clamp(pixels[i], 0.0f, 1.0f);
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    return bytes;
}

// ---------------------------------------------------------------------------
// dataset directory I/O
// ---------------------------------------------------------------------------

inline void write_scene(const std::string& dir, const Scene& s) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_pgm((fs::path(dir) / (s.id + ".pgm")).string(), s.height, s.width, s.channels,
              quantize_pixels(s.pixels));

    std::ofstream os(fs::path(dir) / (s.id + ".ann"), std::ios::binary | std::ios::trunc);
    if (!os) throw DataError(msg("cannot write annotations for '", s.id, "'"));
    os << "# " << s.points.size() << " points for " << s.id << "\n";
    char buf[80];
    for (const auto& p : s.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x, p.y);
        os << buf;
    }
}

inline void write_dataset(const std::string& dir, const std::vector<Scene>& scenes) {
    for (const auto& s : scenes) write_scene(dir, s);
}

inline std::vector<Point> parse_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError(msg("cannot open '", path, "'"));
    std::vector<Point> points;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        Point p;
        char trailing;
        std::istringstream ls(line);
        if (!(ls >> p.x >> p.y) || (ls >> trailing))
            throw DataError(msg("'", path, "' line ", lineno, ": expected 'x y', got '", line, "'"));
        points.push_back(p);
    }
    return points;
}

// Scans a directory for <id>.pgm / <id>.ann pairs; both files must exist for
// every id. An empty directory yields an empty dataset.
inline std::vector<Scene> read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) throw DataError(msg("dataset directory '", dir, "' does not exist"));

    std::set<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path p = entry.path();
        if (p.extension() == ".ann") ids.insert(p.stem().string());
        if (p.extension() == ".pgm" && p.stem().extension() != ".den") ids.insert(p.stem().string());
    }

    std::vector<Scene> scenes;
    for (const std::string& id : ids) {
        const fs::path img = fs::path(dir) / (id + ".pgm");
        const fs::path ann = fs::path(dir) / (id + ".ann");
        if (!fs::exists(img))
            throw DataError(msg("dataset: annotation for '", id, "' has no image file ", img.string()));
        if (!fs::exists(ann))
            throw DataError(msg("dataset: image '", id, "' has no annotation file ", ann.string()));

        PgmImage pgm = read_pgm(img.string());
        Scene s;
        s.height = pgm.height;
        s.width = pgm.width;
        s.channels = pgm.channels;
        s.id = id;
        s.pixels.resize(pgm.bytes.size());
        for (size_t i = 0; i < pgm.bytes.size(); ++i)
            s.pixels[i] = static_cast<float>(pgm.bytes[i]) / 255.0f;
        s.points = parse_annotations(ann.string());
        if (!s.points_in_bounds())
            throw DataError(msg("dataset: scene '", id, "' has points outside the image"));
        scenes.push_back(std::move(s));
    }
    return scenes;  // set iteration gives deterministic id order
}

// Emits <base>.den.pgm (max-normalized for viewing) and <base>.den.json with
// the true count; normalization destroys mass, the JSON is the ground truth.
inline void write_density(const std::string& dir, const std::string& id, const DensityMap& d, double count) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    double mx = 0.0;
    for (double v : d.values) mx = std::max(mx, v);
    std::vector<uint8_t> bytes(d.values.size(), 0);
    if (mx > 0.0)
        for (size_t i = 0; i < bytes.size(); ++i)
            bytes[i] = static_cast<uint8_t>(std::lround(std::clamp(d.values[i] / mx, 0.0, 1.0) * 255.0));
    write_pgm((fs::path(dir) / (id + ".den.pgm")).string(), d.height, d.width, 1, bytes);

    nlohmann::ordered_json j;
    j["count"] = count;
    j["sum"] = d.sum();
    j["shape"] = {d.height, d.width};
    std::ofstream os(fs::path(dir) / (id + ".den.json"), std::ios::binary | std::ios::trunc);
    if (!os) throw DataError(msg("cannot write density json for '", id, "'"));
    os << j.dump(2) << "\n";
}

}  // namespace saccn
