#include "vsod/syndata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "vsod/image_io.hpp"
#include "vsod/ops.hpp"

namespace vsod::syndata {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct Wave {
    double fx, fy, phase;
    std::array<double, 3> amp;
};

struct Texture {
    std::array<double, 3> base{};
    std::vector<Wave> waves;

    [[nodiscard]] double value(double u, double v, int c) const {
        double acc = base[c];
        for (const auto& w : waves) acc += w.amp[c] * std::sin(w.fx * u + w.fy * v + w.phase);
        return std::clamp(acc, 0.0, 1.0);
    }
};

Texture random_texture(Rng& rng, std::array<double, 3> base, int count, double amplitude, double min_period,
                       double max_period) {
    Texture t;
    t.base = base;
    for (int i = 0; i < count; ++i) {
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double freq = 2.0 * std::numbers::pi / uniform(rng, min_period, max_period);
        Wave w{freq * std::cos(angle), freq * std::sin(angle), uniform(rng, 0.0, 2.0 * std::numbers::pi), {}};
        for (auto& a : w.amp) a = uniform(rng, 0.3, 1.0) * amplitude;
        t.waves.push_back(w);
    }
    return t;
}

struct Object {
    ShapeKind kind = ShapeKind::Disk;
    double size = 10.0;
    double half_w = 10.0, half_h = 10.0;  // bounding half-extents
    std::vector<std::array<double, 2>> polygon;
    Texture texture;
    double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;

    [[nodiscard]] bool contains(double lx, double ly) const {
        switch (kind) {
            case ShapeKind::Disk:
                return lx * lx + ly * ly <= size * size;
            case ShapeKind::Rectangle:
                return std::abs(lx) <= half_w && std::abs(ly) <= half_h;
            case ShapeKind::Polygon: {
                bool inside = false;
                const std::size_t n = polygon.size();
                for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                    const auto& a = polygon[i];
                    const auto& b = polygon[j];
                    if ((a[1] > ly) != (b[1] > ly) && lx < (b[0] - a[0]) * (ly - a[1]) / (b[1] - a[1]) + a[0]) {
                        inside = !inside;
                    }
                }
                return inside;
            }
        }
        return false;
    }
};

// Advances one coordinate by v, reflecting off [lo, hi].
void reflect_step(double& p, double& v, double lo, double hi) {
    p += v;
    for (int guard = 0; guard < 8 && (p < lo || p > hi); ++guard) {
        if (p < lo) {
            p = 2.0 * lo - p;
            v = -v;
        } else if (p > hi) {
            p = 2.0 * hi - p;
            v = -v;
        }
    }
    p = std::clamp(p, lo, hi);
}

std::array<double, 3> random_colour(Rng& rng) { return {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)}; }

double colour_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(d);
}

Object make_object(Rng& rng, const SceneConfig& cfg, bool salient, const std::array<double, 3>& bg_base) {
    Object o;
    o.kind = cfg.kinds[std::uniform_int_distribution<std::size_t>(0, cfg.kinds.size() - 1)(rng)];
    const double scale = salient ? 1.0 : cfg.distractor_scale;
    o.size = uniform(rng, cfg.min_size, cfg.max_size) * scale;
    switch (o.kind) {
        case ShapeKind::Disk:
            o.half_w = o.half_h = o.size;
            break;
        case ShapeKind::Rectangle:
            o.half_w = o.size;
            o.half_h = o.size * uniform(rng, 0.6, 1.0);
            if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) std::swap(o.half_w, o.half_h);
            break;
        case ShapeKind::Polygon: {
            const int verts = std::uniform_int_distribution<int>(5, 7)(rng);
            for (int i = 0; i < verts; ++i) {
                const double a = 2.0 * std::numbers::pi * (i + uniform(rng, -0.25, 0.25)) / verts;
                const double r = o.size * uniform(rng, 0.7, 1.0);
                o.polygon.push_back({r * std::cos(a), r * std::sin(a)});
            }
            o.half_w = o.half_h = o.size;
            break;
        }
    }
    std::array<double, 3> target = random_colour(rng);
    for (int tries = 0; tries < 64 && colour_distance(target, bg_base) < 0.5; ++tries) target = random_colour(rng);
    std::array<double, 3> base{};
    for (int c = 0; c < 3; ++c) base[c] = bg_base[c] + cfg.contrast * (target[c] - bg_base[c]);
    o.texture = random_texture(rng, base, 2, 0.06, 8.0, 16.0);

    o.x = uniform(rng, o.half_w, cfg.width - o.half_w);
    o.y = uniform(rng, o.half_h, cfg.height - o.half_h);
    const bool moving = salient || cfg.distractor_motion;
    const double speed = moving ? uniform(rng, cfg.min_speed, cfg.max_speed) : 0.0;
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    o.vx = speed * std::cos(heading);
    o.vy = speed * std::sin(heading);
    return o;
}

// Colour wheel with white at the centre (Sintel/Middlebury layout).
const std::vector<std::array<double, 3>>& colour_wheel() {
    static const std::vector<std::array<double, 3>> wheel = [] {
        std::vector<std::array<double, 3>> w;
        const int ry = 15, yg = 6, gc = 4, cb = 11, bm = 13, mr = 6;
        for (int i = 0; i < ry; ++i) w.push_back({255.0, 255.0 * i / ry, 0.0});
        for (int i = 0; i < yg; ++i) w.push_back({255.0 - 255.0 * i / yg, 255.0, 0.0});
        for (int i = 0; i < gc; ++i) w.push_back({0.0, 255.0, 255.0 * i / gc});
        for (int i = 0; i < cb; ++i) w.push_back({0.0, 255.0 - 255.0 * i / cb, 255.0});
        for (int i = 0; i < bm; ++i) w.push_back({255.0 * i / bm, 0.0, 255.0});
        for (int i = 0; i < mr; ++i) w.push_back({255.0, 0.0, 255.0 - 255.0 * i / mr});
        for (auto& c : w) {
            for (auto& v : c) v /= 255.0;
        }
        return w;
    }();
    return wheel;
}

Tensor flip_horizontal(const Tensor& t) {
    Tensor out(t.shape());
    const Shape s = t.shape();
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, y, s.w - 1 - x);
            }
        }
    }
    return out;
}

// Crops or pads a (1,C,h,w) tensor to (H,W). For crops the offset selects the
// window; for pads it places the content.
Tensor fit_canvas(const Tensor& t, int height, int width, int oy, int ox, double fill) {
    const Shape s = t.shape();
    Tensor out({s.n, s.c, height, width}, fill);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < height; ++y) {
                const int sy = s.h >= height ? y + oy : y - oy;
                if (sy < 0 || sy >= s.h) continue;
                for (int x = 0; x < width; ++x) {
                    const int sx = s.w >= width ? x + ox : x - ox;
                    if (sx < 0 || sx >= s.w) continue;
                    out.at(n, c, y, x) = t.at(n, c, sy, sx);
                }
            }
        }
    }
    return out;
}

std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", index);
    return buf;
}

}  // namespace

double SceneConfig::max_displacement() const { return max_speed + camera_speed; }

void SceneConfig::validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("scene: resolution must be positive");
    if (num_objects < 1) throw std::invalid_argument("scene: need at least one object");
    if (kinds.empty()) throw std::invalid_argument("scene: no object kinds");
    if (min_size <= 0.0 || max_size < min_size) throw std::invalid_argument("scene: invalid object size range");
    if (2.0 * max_size >= std::min(height, width)) {
        throw std::invalid_argument("scene: objects larger than frame (max_size " + std::to_string(max_size) + ")");
    }
    if (min_speed < 0.0 || max_speed < min_speed) throw std::invalid_argument("scene: invalid speed range");
    if (camera_speed < 0.0) throw std::invalid_argument("scene: camera_speed must be >= 0");
    if (contrast < 0.0 || contrast > 1.0) throw std::invalid_argument("scene: contrast must lie in [0,1]");
    if (length < 1) throw std::invalid_argument("scene: sequence length must be >= 1");
    if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0) throw std::invalid_argument("scene: corrupt_fraction must lie in [0,1]");
}

SceneConfig low_contrast_scene() {
    SceneConfig cfg;
    cfg.contrast = 0.12;
    return cfg;
}

SceneConfig fast_motion_scene() {
    SceneConfig cfg;
    cfg.min_size = 6.0;
    cfg.max_size = 9.0;
    cfg.min_speed = 11.0;
    cfg.max_speed = 14.0;
    return cfg;
}

SceneConfig multi_object_scene() {
    SceneConfig cfg;
    cfg.num_objects = 3;
    cfg.distractor_motion = true;
    cfg.distractor_scale = 0.9;
    return cfg;
}

SceneConfig unreliable_flow_scene() {
    SceneConfig cfg;
    cfg.num_objects = 3;
    cfg.min_size = 7.0;
    cfg.max_size = 12.0;
    cfg.distractor_scale = 1.0;
    cfg.distractor_motion = false;
    cfg.corrupt_fraction = 0.5;
    cfg.corruption = FlowCorruption::Noise;
    return cfg;
}

Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed, const std::string& name,
                           std::optional<bool> corrupt) {
    cfg.validate();
    Rng rng(seed);
    Rng texture_rng(cfg.texture_seed != 0 ? cfg.texture_seed : mix_seed(seed, 0x7E57));

    const std::array<double, 3> bg_base{uniform(texture_rng, 0.25, 0.75), uniform(texture_rng, 0.25, 0.75),
                                        uniform(texture_rng, 0.25, 0.75)};
    const Texture background = random_texture(texture_rng, bg_base, 3, 0.12, 10.0, 40.0);
    const double cam_heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double cam_dx = cfg.camera_speed * std::cos(cam_heading);
    const double cam_dy = cfg.camera_speed * std::sin(cam_heading);

    std::vector<Object> objects;
    for (int k = 0; k < cfg.num_objects; ++k) objects.push_back(make_object(rng, cfg, k == 0, bg_base));

    Sequence seq;
    seq.name = name;
    const bool drawn = uniform(rng, 0.0, 1.0) < cfg.corrupt_fraction;
    seq.flow_corrupted = corrupt.value_or(drawn);

    const int h = cfg.height, w = cfg.width;
    // Draw order: distractors first, salient object (index 0) last so it is never occluded.
    std::vector<int> order;
    for (int k = 1; k < cfg.num_objects; ++k) order.push_back(k);
    order.push_back(0);

    double max_mag = 0.0;
    for (int t = 0; t < cfg.length; ++t) {
        std::vector<std::array<double, 2>> disp(objects.size());
        std::vector<Object> next = objects;
        for (std::size_t k = 0; k < objects.size(); ++k) {
            Object& o = next[k];
            reflect_step(o.x, o.vx, o.half_w, w - o.half_w);
            reflect_step(o.y, o.vy, o.half_h, h - o.half_h);
            disp[k] = {o.x - objects[k].x, o.y - objects[k].y};
        }

        Frame f{Tensor({1, 3, h, w}), Tensor({1, 2, h, w}), Tensor(), Tensor({1, 1, h, w})};
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                int top = -1;
                for (int k : order) {
                    if (objects[k].contains(px - objects[k].x, py - objects[k].y)) top = k;
                }
                for (int c = 0; c < 3; ++c) {
                    f.rgb.at(0, c, y, x) = top < 0 ? background.value(px - cam_dx * t, py - cam_dy * t, c)
                                                   : objects[top].texture.value(px - objects[top].x,
                                                                                py - objects[top].y, c);
                }
                const double dx = top < 0 ? cam_dx : disp[top][0];
                const double dy = top < 0 ? cam_dy : disp[top][1];
                f.flow.at(0, 0, y, x) = dx;
                f.flow.at(0, 1, y, x) = dy;
                max_mag = std::max(max_mag, std::hypot(dx, dy));
                f.mask.at(0, 0, y, x) = top == 0 ? 1.0 : 0.0;
            }
        }
        seq.frames.push_back(std::move(f));
        objects = std::move(next);
    }

    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (auto& f : seq.frames) {
        f.flow_image = render_flow_color(f.flow, max_mag);
        if (!seq.flow_corrupted) continue;
        if (cfg.corruption == FlowCorruption::Zero) {
            f.flow_image.fill(1.0);
        } else if (cfg.corruption == FlowCorruption::Noise) {
            for (auto& v : f.flow_image.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
        }
    }
    return seq;
}

std::vector<Sequence> generate_dataset(const SceneConfig& cfg, int count, std::uint64_t base_seed) {
    // Exactly round(fraction * count) sequences are corrupted, chosen by a seeded shuffle.
    std::vector<int> order(std::max(count, 0));
    for (int i = 0; i < count; ++i) order[i] = i;
    Rng pick(mix_seed(base_seed, 0xC0FFEE));
    for (int i = count - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<int>(pick() % static_cast<std::uint64_t>(i + 1))]);
    }
    const int corrupted = static_cast<int>(std::lround(cfg.corrupt_fraction * count));
    std::vector<bool> corrupt(std::max(count, 0), false);
    for (int i = 0; i < corrupted; ++i) corrupt[order[i]] = true;

    std::vector<Sequence> out;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%04d", i);
        out.push_back(generate_sequence(cfg, mix_seed(base_seed, static_cast<std::uint64_t>(i)), name, corrupt[i]));
    }
    return out;
}

int wheel_size() { return static_cast<int>(colour_wheel().size()); }

double wheel_position(double dx, double dy) {
    const double a = std::atan2(-dy, -dx) / std::numbers::pi;  // [-1, 1]
    const double n = wheel_size();
    double pos = (a + 1.0) / 2.0 * n;
    pos = std::fmod(pos, n);
    if (pos < 0.0) pos += n;
    return pos;
}

Tensor render_flow_color(const Tensor& flow, double max_magnitude) {
    const Shape s = flow.shape();
    if (s.n != 1 || s.c != 2) throw ShapeError("render_flow_color: expected (1,2,H,W), got " + s.str());
    if (!flow.all_finite()) throw std::domain_error("render_flow_color: non-finite flow");
    if (max_magnitude <= 0.0) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                max_magnitude = std::max(max_magnitude, std::hypot(flow.at(0, 0, y, x), flow.at(0, 1, y, x)));
            }
        }
    }
    const auto& wheel = colour_wheel();
    const int n = wheel_size();
    Tensor out({1, 3, s.h, s.w}, 1.0);
    if (max_magnitude <= 0.0) return out;
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            const double dx = flow.at(0, 0, y, x), dy = flow.at(0, 1, y, x);
            const double rad = std::min(std::hypot(dx, dy) / max_magnitude, 1.0);
            if (rad == 0.0) continue;
            const double pos = wheel_position(dx, dy);
            const int k0 = static_cast<int>(std::floor(pos)) % n;
            const int k1 = (k0 + 1) % n;
            const double frac = pos - std::floor(pos);
            for (int c = 0; c < 3; ++c) {
                const double col = (1.0 - frac) * wheel[k0][c] + frac * wheel[k1][c];
                out.at(0, c, y, x) = 1.0 - rad * (1.0 - col);
            }
        }
    }
    return out;
}

AugmentChoice draw_augmentation(std::mt19937_64& rng, int height, int width) {
    AugmentChoice ch;
    ch.flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    ch.scale = kAugmentScales[std::uniform_int_distribution<int>(0, 2)(rng)];
    const int nh = static_cast<int>(std::lround(height * ch.scale));
    const int nw = static_cast<int>(std::lround(width * ch.scale));
    ch.offset_y = std::uniform_int_distribution<int>(0, std::abs(nh - height))(rng);
    ch.offset_x = std::uniform_int_distribution<int>(0, std::abs(nw - width))(rng);
    return ch;
}

Sample apply_augmentation(const Sample& sample, const AugmentChoice& choice) {
    Sample out = sample;
    if (choice.flip) {
        out.rgb = flip_horizontal(out.rgb);
        out.flow_image = flip_horizontal(out.flow_image);
        out.mask = flip_horizontal(out.mask);
        if (out.flow) {
            Tensor f = flip_horizontal(*out.flow);
            for (int y = 0; y < f.shape().h; ++y) {
                for (int x = 0; x < f.shape().w; ++x) f.at(0, 0, y, x) = -f.at(0, 0, y, x);
            }
            out.flow = std::move(f);
        }
    }
    if (choice.scale != 1.0) {
        const int h = sample.rgb.shape().h, w = sample.rgb.shape().w;
        const int nh = static_cast<int>(std::lround(h * choice.scale));
        const int nw = static_cast<int>(std::lround(w * choice.scale));
        auto rescale = [&](const Tensor& t, double fill) {
            return fit_canvas(resize_bilinear(t, nh, nw), h, w, choice.offset_y, choice.offset_x, fill);
        };
        out.rgb = rescale(out.rgb, 0.0);
        out.flow_image = rescale(out.flow_image, 1.0);
        out.mask = rescale(out.mask, 0.0);
        for (auto& v : out.mask.values()) v = v >= 0.5 ? 1.0 : 0.0;
        if (out.flow) {
            Tensor f = rescale(*out.flow, 0.0);
            for (auto& v : f.values()) v *= choice.scale;
            out.flow = std::move(f);
        }
    }
    return out;
}

Sample augment(const Sample& sample, std::mt19937_64& rng) {
    return apply_augmentation(sample, draw_augmentation(rng, sample.rgb.shape().h, sample.rgb.shape().w));
}

void write_dataset(const std::filesystem::path& root, const std::vector<Sequence>& sequences) {
    for (const auto& seq : sequences) {
        const auto dir = root / seq.name;
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            const auto file = frame_name(static_cast<int>(i));
            io::write_rgb(dir / "rgb" / file, seq.frames[i].rgb);
            io::write_rgb(dir / "flow" / file, seq.frames[i].flow_image);
            io::write_gray(dir / "mask" / file, seq.frames[i].mask);
        }
    }
}

std::vector<DatasetEntry> load_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root does not exist: " + root.string());
    std::vector<fs::path> sequences;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) sequences.push_back(e.path());
    }
    std::sort(sequences.begin(), sequences.end());
    std::vector<DatasetEntry> out;
    for (const auto& dir : sequences) {
        const std::string seq = dir.filename().string();
        if (!fs::is_directory(dir / "rgb")) throw DataError("sequence " + seq + ": missing rgb/ directory");
        std::vector<fs::path> frames;
        for (const auto& e : fs::directory_iterator(dir / "rgb")) {
            if (e.is_regular_file() && e.path().extension() == ".png") frames.push_back(e.path().filename());
        }
        std::sort(frames.begin(), frames.end());
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const std::string where = "sequence " + seq + " frame " + std::to_string(i);
            DatasetEntry entry{seq, static_cast<int>(i), {}};
            for (const char* sub : {"rgb", "flow", "mask"}) {
                const auto file = dir / sub / frames[i];
                if (!fs::exists(file)) throw DataError(where + ": missing " + std::string(sub) + "/" + frames[i].string());
            }
            try {
                entry.sample.rgb = io::read_rgb(dir / "rgb" / frames[i]);
                entry.sample.flow_image = io::read_rgb(dir / "flow" / frames[i]);
                entry.sample.mask = io::read_gray(dir / "mask" / frames[i]);
            } catch (const std::exception& ex) {
                throw DataError(where + ": " + ex.what());
            }
            for (auto& v : entry.sample.mask.values()) v = v >= 0.5 ? 1.0 : 0.0;
            if (entry.sample.rgb.shape().h != entry.sample.mask.shape().h ||
                entry.sample.rgb.shape().w != entry.sample.mask.shape().w ||
                entry.sample.rgb.shape() != entry.sample.flow_image.shape()) {
                throw DataError(where + ": rgb/flow/mask resolutions differ");
            }
            out.push_back(std::move(entry));
        }
    }
    if (out.empty()) throw DataError("empty dataset: no frames under " + root.string());
    return out;
}

}  // namespace vsod::syndata
