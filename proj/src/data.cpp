#include "tta/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tta/errors.hpp"
#include "tta/rng.hpp"

namespace tta {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Fill every pixel whose center lies within `radius` of the segment
// (x0,y0)-(x1,y1): a thick line with circular caps in one shape.
void draw_capsule(float* d, int size, double x0, double y0, double x1, double y1,
                  double radius) {
    const int xa = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius)));
    const int xb = std::min(size - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius)));
    const int ya = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius)));
    const int yb = std::min(size - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const double r2 = radius * radius;
    for (int y = ya; y <= yb; ++y)
        for (int x = xa; x <= xb; ++x) {
            double t = len2 > 0.0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double px = x0 + t * dx - x, py = y0 + t * dy - y;
            if (px * px + py * py <= r2) d[static_cast<std::int64_t>(y) * size + x] = 1.0f;
        }
}

}  // namespace

double mask_ratio(const Tensor& m) {
    std::int64_t ones = 0;
    for (std::int64_t i = 0; i < m.numel(); ++i) ones += m.at(i) == 1.0f ? 1 : 0;
    return static_cast<double>(ones) / static_cast<double>(m.numel());
}

Tensor generate_mask(const MaskSpec& spec, int* rejected) {
    if (spec.size < 1) throw ConfigError("generate_mask: size must be positive");
    if (!(0.0f < spec.min_ratio && spec.min_ratio < spec.max_ratio && spec.max_ratio < 1.0f))
        throw ConfigError("generate_mask: need 0 < min_ratio < max_ratio < 1");
    if (spec.strokes < 1 || spec.max_vertices < 1)
        throw ConfigError("generate_mask: need at least one stroke and one vertex");
    if (!(0.0f < spec.min_width && spec.min_width <= spec.max_width))
        throw ConfigError("generate_mask: need 0 < min_width <= max_width");

    Rng rng(spec.seed);
    const int s = spec.size;
    for (int attempt = 0; attempt < 100; ++attempt) {
        Tensor m({1, 1, s, s});
        float* d = m.mutable_data();
        for (int k = 0; k < spec.strokes; ++k) {
            const int segments = rng.range_int(1, spec.max_vertices);
            double x = rng.uniform(0.0, s), y = rng.uniform(0.0, s);
            double angle = rng.uniform(0.0, 2.0 * kPi);
            const double width = rng.uniform(spec.min_width, spec.max_width);
            for (int v = 0; v < segments; ++v) {
                angle += rng.uniform(-spec.angle_jitter, spec.angle_jitter);
                const double len = rng.uniform(0.15, 0.35) * s;
                const double nx = std::clamp(x + std::cos(angle) * len, 0.0, s - 1.0);
                const double ny = std::clamp(y + std::sin(angle) * len, 0.0, s - 1.0);
                draw_capsule(d, s, x, y, nx, ny, width / 2.0);
                x = nx;
                y = ny;
            }
        }
        const double ratio = mask_ratio(m);
        if (ratio >= spec.min_ratio && ratio <= spec.max_ratio) {
            if (rejected) *rejected = attempt;
            return m;
        }
    }
    std::ostringstream os;
    os << "generate_mask: 100 attempts left the hole ratio outside [" << spec.min_ratio << ", "
       << spec.max_ratio << "]; adjust the stroke settings (currently " << spec.strokes
       << " strokes, width " << spec.min_width << ".." << spec.max_width << ")";
    throw ConfigError(os.str());
}

const char* family_name(TextureFamily family) {
    switch (family) {
        case TextureFamily::Stripes: return "stripes";
        case TextureFamily::Checker: return "checker";
        case TextureFamily::Blobs: return "blobs";
        case TextureFamily::GradientNoise: return "gradient_noise";
    }
    throw ConfigError("family_name: unknown texture family");
}

TextureFamily parse_family(const std::string& name) {
    if (name == "stripes") return TextureFamily::Stripes;
    if (name == "checker") return TextureFamily::Checker;
    if (name == "blobs") return TextureFamily::Blobs;
    if (name == "gradient_noise") return TextureFamily::GradientNoise;
    throw ConfigError("unknown texture family '" + name +
                      "' (expected stripes|checker|blobs|gradient_noise)");
}

Tensor generate_texture(const TextureSpec& spec) {
    if (spec.size < 1) throw ConfigError("generate_texture: size must be positive");
    if (!(0.0f < spec.min_period && spec.min_period <= spec.max_period))
        throw ConfigError("generate_texture: need 0 < min_period <= max_period");
    if (spec.min_blobs < 1 || spec.min_blobs > spec.max_blobs)
        throw ConfigError("generate_texture: need 1 <= min_blobs <= max_blobs");

    Rng rng(spec.seed);
    const int s = spec.size;
    Tensor img({1, 3, s, s});
    float* d = img.mutable_data();
    auto px = [&](int c, int y, int x) -> float& {
        return d[(static_cast<std::int64_t>(c) * s + y) * s + x];
    };

    switch (spec.family) {
        case TextureFamily::Stripes: {
            const double period = rng.uniform(spec.min_period, spec.max_period);
            const double angle = rng.uniform(spec.min_angle, spec.max_angle);
            const double sa = std::sin(angle), ca = std::cos(angle);
            double phase[3];
            for (double& p : phase) p = rng.uniform(0.0, 2.0 * kPi);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x)
                        px(c, y, x) = static_cast<float>(
                            std::sin(2.0 * kPi / period * (x * sa + y * ca) + phase[c]));
            break;
        }
        case TextureFamily::Checker: {
            // independent cell extents, sub-cell offsets, and per-channel
            // polarity: pixels stay exactly +-1 while distinct seeds place
            // their cell boundaries distinctly
            const double cx = rng.uniform(spec.min_period, spec.max_period) / 2.0;
            const double cy = rng.uniform(spec.min_period, spec.max_period) / 2.0;
            const double ox = rng.uniform(0.0, cx), oy = rng.uniform(0.0, cy);
            float polarity[3];
            for (float& p : polarity) p = rng.uniform() < 0.5 ? 1.0f : -1.0f;
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const int parity =
                        (static_cast<int>((x + ox) / cx) + static_cast<int>((y + oy) / cy)) & 1;
                    for (int c = 0; c < 3; ++c)
                        px(c, y, x) = parity ? -polarity[c] : polarity[c];
                }
            break;
        }
        case TextureFamily::Blobs: {
            const int n = rng.range_int(spec.min_blobs, spec.max_blobs);
            std::vector<double> cx(n), cy(n), r(n), amp(3 * n);
            for (int i = 0; i < n; ++i) {
                cx[i] = rng.uniform(0.0, s);
                cy[i] = rng.uniform(0.0, s);
                r[i] = rng.uniform(spec.min_period, spec.max_period);
                for (int c = 0; c < 3; ++c) amp[c * n + i] = rng.uniform(-1.0, 1.0);
            }
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x) {
                        double f = 0.0;
                        for (int i = 0; i < n; ++i) {
                            const double ddx = x - cx[i], ddy = y - cy[i];
                            f += amp[c * n + i] *
                                 std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * r[i] * r[i]));
                        }
                        px(c, y, x) = static_cast<float>(std::tanh(2.0 * f));
                    }
            break;
        }
        case TextureFamily::GradientNoise: {
            const double cell = rng.uniform(spec.min_period, spec.max_period);
            const int g = static_cast<int>(std::ceil(s / cell)) + 2;
            std::vector<double> grid(static_cast<std::size_t>(3) * g * g);
            for (double& v : grid) v = rng.uniform(-1.0, 1.0);
            auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x) {
                        const double u = x / cell, v = y / cell;
                        const int i = static_cast<int>(u), j = static_cast<int>(v);
                        const double fu = smooth(u - i), fv = smooth(v - j);
                        const double* gr = grid.data() + static_cast<std::size_t>(c) * g * g;
                        const double a = gr[j * g + i], b = gr[j * g + i + 1];
                        const double e = gr[(j + 1) * g + i], f = gr[(j + 1) * g + i + 1];
                        const double top = a + (b - a) * fu, bot = e + (f - e) * fu;
                        px(c, y, x) = static_cast<float>(top + (bot - top) * fv);
                    }
            break;
        }
    }
    return img;
}

namespace {

int parse_pnm_int(const std::string& bytes, std::size_t& pos, const std::string& path) {
    // skip whitespace and '#' comments
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9')
        throw IoError("malformed netpbm header in " + path);
    long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        v = v * 10 + (bytes[pos] - '0');
        if (v > 1 << 24) throw IoError("implausible netpbm dimension in " + path);
        ++pos;
    }
    return static_cast<int>(v);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace

Tensor load_image(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw IoError("unsupported image format in " + path + " (want binary PPM/PGM)");
    const int channels = bytes[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    const int w = parse_pnm_int(bytes, pos, path);
    const int h = parse_pnm_int(bytes, pos, path);
    const int maxval = parse_pnm_int(bytes, pos, path);
    if (maxval != 255) throw IoError("unsupported bit depth in " + path + " (want maxval 255)");
    if (w < 1 || h < 1) throw IoError("bad image dimensions in " + path);
    if (pos >= bytes.size() || (bytes[pos] != '\n' && bytes[pos] != ' ' && bytes[pos] != '\t' &&
                                bytes[pos] != '\r'))
        throw IoError("malformed netpbm header in " + path);
    ++pos;  // single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (pos + need > bytes.size()) throw IoError("truncated image data in " + path);

    Tensor img({1, channels, h, w});
    float* d = img.mutable_data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                const unsigned char b =
                    static_cast<unsigned char>(bytes[pos + (static_cast<std::size_t>(y) * w + x) * channels + c]);
                d[(static_cast<std::int64_t>(c) * h + y) * w + x] =
                    static_cast<float>(b * (2.0 / 255.0) - 1.0);
            }
    return img;
}

void save_image(const std::string& path, const Tensor& img) {
    if (img.ndim() != 4 || img.dim(0) != 1 || (img.dim(1) != 1 && img.dim(1) != 3))
        throw DimError("save_image: want [1,1,H,W] or [1,3,H,W]");
    const int channels = img.dim(1), h = img.dim(2), w = img.dim(3);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << (channels == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << '\n' << "255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                const double v = img.at((static_cast<std::int64_t>(c) * h + y) * w + x);
                const double scaled = (v + 1.0) * 127.5;
                const long b = std::lround(std::clamp(scaled, 0.0, 255.0));
                row[static_cast<std::size_t>(x) * channels + c] = static_cast<unsigned char>(b);
            }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed for " + path);
}

Tensor load_mask(const std::string& path) {
    Tensor img = load_image(path);
    if (img.dim(1) != 1) throw IoError("mask file " + path + " must be single-channel (P5)");
    Tensor m(img.shape);
    float* d = m.mutable_data();
    for (std::int64_t i = 0; i < img.numel(); ++i) {
        const float v = img.at(i);
        if (v == 1.0f)
            d[i] = 1.0f;
        else if (v == -1.0f)
            d[i] = 0.0f;
        else
            throw IoError("mask file " + path + " holds bytes other than {0, 255}");
    }
    return m;
}

void save_mask(const std::string& path, const Tensor& m) {
    if (m.ndim() != 4 || m.dim(0) != 1 || m.dim(1) != 1)
        throw DimError("save_mask: want [1,1,H,W]");
    Tensor img(m.shape);
    float* d = img.mutable_data();
    for (std::int64_t i = 0; i < m.numel(); ++i) {
        const float v = m.at(i);
        if (v != 0.0f && v != 1.0f)
            throw ContractError("save_mask: mask must be binary {0, 1}");
        d[i] = v == 1.0f ? 1.0f : -1.0f;
    }
    save_image(path, img);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    const std::string bytes = read_file(path);
    std::vector<ManifestEntry> entries;
    std::istringstream is(bytes);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t t1 = line.find('\t');
        const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw IoError("manifest " + path + " line " + std::to_string(lineno) +
                          ": want <path>\\t<seed>\\t<family>");
        ManifestEntry e;
        e.path = line.substr(0, t1);
        const std::string seed_str = line.substr(t1 + 1, t2 - t1 - 1);
        std::size_t used = 0;
        try {
            if (!seed_str.empty() && seed_str[0] >= '0' && seed_str[0] <= '9')
                e.seed = std::stoull(seed_str, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != seed_str.size() || seed_str.empty())
            throw IoError("manifest " + path + " line " + std::to_string(lineno) +
                          ": bad seed '" + seed_str + "'");
        try {
            e.family = parse_family(line.substr(t2 + 1));
        } catch (const ConfigError& err) {
            throw IoError("manifest " + path + " line " + std::to_string(lineno) + ": " +
                          err.what());
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const ManifestEntry& e : entries)
        f << e.path << '\t' << e.seed << '\t' << family_name(e.family) << '\n';
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace tta
