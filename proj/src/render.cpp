#include "cbx/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbx {

namespace {

constexpr int kSupersample = 2;

// Sprites keep a margin so every scale/rotation stays fully inside the canvas:
// max half-extent 0.15, circumscribed radius 0.15*sqrt(2) ~ 0.212.
constexpr double kSpriteMargin = 0.22;

struct SpriteParams {
    int shape = 0;       // 0 square, 1 ellipse, 2 heart
    double half = 0.1;   // half-extent in canvas units
    double cos_t = 1.0;
    double sin_t = 0.0;
    double cx = 0.5;
    double cy = 0.5;
};

bool inside_sprite(const SpriteParams& p, double x, double y) {
    // Rotate into the sprite frame.
    const double dx = x - p.cx;
    const double dy = y - p.cy;
    const double u = p.cos_t * dx + p.sin_t * dy;
    const double v = -p.sin_t * dx + p.cos_t * dy;
    switch (p.shape) {
        case 0:  // square
            return std::abs(u) <= p.half && std::abs(v) <= p.half;
        case 1: {  // ellipse, 0.6 aspect before rotation
            const double a = u / p.half;
            const double b = v / (0.6 * p.half);
            return a * a + b * b <= 1.0;
        }
        case 2: {  // heart from the implicit sextic (x^2+y^2-1)^3 - x^2 y^3 <= 0
            const double hx = 1.25 * u / p.half;
            const double hy = 1.25 * (-v) / p.half + 0.15;  // raster y points down
            const double q = hx * hx + hy * hy - 1.0;
            return q * q * q - hx * hx * hy * hy * hy <= 0.0;
        }
        default:
            return false;
    }
}

struct ObjectParams {
    int shape = 0;       // 0 cube, 1 cylinder, 2 sphere, 3 capsule
    double half = 0.15;  // half-extent in canvas units
    double shear = 0.0;
    double cx = 0.5;
    double cy = 0.60;
};

bool inside_object(const ObjectParams& p, double x, double y) {
    const double v = y - p.cy;
    const double u = (x - p.cx) - p.shear * v;
    const double h = p.half;
    switch (p.shape) {
        case 0:  // cube -> square
            return std::abs(u) <= h && std::abs(v) <= h;
        case 1: {  // cylinder -> body rect + elliptical cap on top
            const bool body = std::abs(u) <= 0.8 * h && v >= -0.5 * h && v <= h;
            const double eu = u / (0.8 * h);
            const double ev = (v + 0.5 * h) / (0.45 * h);
            return body || eu * eu + ev * ev <= 1.0;
        }
        case 2:  // sphere -> circle
            return u * u + v * v <= h * h;
        case 3: {  // capsule -> vertical rounded rect
            const double r = 0.55 * h;
            const double core = 0.45 * h;
            const double vv = std::max(0.0, std::abs(v) - core);
            return u * u + vv * vv <= r * r;
        }
        default:
            return false;
    }
}

void downsample_coverage(const std::vector<float>& cov, int res, int ss, Image& img,
                         const Rgb& fill, bool blend_over_background) {
    // cov holds per-subpixel coverage in {0,1}; average ss*ss blocks.
    const int sres = res * ss;
    const double inv = 1.0 / double(ss * ss);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    acc += cov[std::size_t(y * ss + sy) * sres + (x * ss + sx)];
                }
            }
            const double a = acc * inv;
            if (a <= 0.0) continue;
            for (int c = 0; c < img.channels; ++c) {
                const float src = float(fill[std::min(c, 2)] * a);
                if (blend_over_background) {
                    img.at(y, x, c) = float(img.at(y, x, c) * (1.0 - a)) + src;
                } else {
                    img.at(y, x, c) = src;
                }
            }
        }
    }
}

Image render_dsprites(const ConceptSchema& schema, const ConceptVector& c, int res) {
    const bool coloured = schema.dataset_id == DatasetId::dsprites_colour;
    Image img(res, res, coloured ? 3 : 1);

    SpriteParams p;
    p.shape = c.indices[1];
    const double scale = schema.concepts[2].values[c.indices[2]];
    p.half = 0.15 * scale;
    const double theta = schema.concepts[3].values[c.indices[3]];
    p.cos_t = std::cos(theta);
    p.sin_t = std::sin(theta);
    const double px = schema.concepts[4].values[c.indices[4]];
    const double py = schema.concepts[5].values[c.indices[5]];
    p.cx = kSpriteMargin + px * (1.0 - 2.0 * kSpriteMargin);
    p.cy = kSpriteMargin + py * (1.0 - 2.0 * kSpriteMargin);

    Rgb fill = {1.0, 1.0, 1.0};
    if (coloured) fill = schema.concepts[6].rgb[c.indices[6]];

    const int sres = res * kSupersample;
    std::vector<float> cov(std::size_t(sres) * sres, 0.0f);
    for (int y = 0; y < sres; ++y) {
        const double fy = (y + 0.5) / double(sres);
        for (int x = 0; x < sres; ++x) {
            const double fx = (x + 0.5) / double(sres);
            if (inside_sprite(p, fx, fy)) cov[std::size_t(y) * sres + x] = 1.0f;
        }
    }
    downsample_coverage(cov, res, kSupersample, img, fill, false);
    return img;
}

Image render_shapes3d_proxy(const ConceptSchema& schema, const ConceptVector& c, int res) {
    Image img(res, res, 3);
    const Rgb floor = hue_to_rgb(schema.concepts[0].values[c.indices[0]]);
    const Rgb wall = hue_to_rgb(schema.concepts[1].values[c.indices[1]]);
    const Rgb object = hue_to_rgb(schema.concepts[2].values[c.indices[2]]);

    const int floor_start = res / 2;  // wall band above, floor band below
    for (int y = 0; y < res; ++y) {
        const Rgb& band = y < floor_start ? wall : floor;
        for (int x = 0; x < res; ++x) {
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = float(band[ch]);
        }
    }

    ObjectParams p;
    const double scale = schema.concepts[3].values[c.indices[3]];
    p.half = 0.10 + 0.15 * scale;
    p.shape = c.indices[4];
    const double orient_deg = schema.concepts[5].values[c.indices[5]];
    p.shear = std::tan(orient_deg * M_PI / 180.0) * 0.75;

    const int sres = res * kSupersample;
    std::vector<float> cov(std::size_t(sres) * sres, 0.0f);
    for (int y = 0; y < sres; ++y) {
        const double fy = (y + 0.5) / double(sres);
        for (int x = 0; x < sres; ++x) {
            const double fx = (x + 0.5) / double(sres);
            if (inside_object(p, fx, fy)) cov[std::size_t(y) * sres + x] = 1.0f;
        }
    }
    downsample_coverage(cov, res, kSupersample, img, object, true);
    return img;
}

}  // namespace

Rgb hue_to_rgb(double hue) {
    // HSV -> RGB with S = 1, V = 0.9.
    const double v = 0.9;
    double h = hue - std::floor(hue);
    h *= 6.0;
    const int sector = std::min(5, int(h));
    const double f = h - sector;
    const double q = v * (1.0 - f);
    const double t = v * f;
    switch (sector) {
        case 0: return {v, t, 0.0};
        case 1: return {q, v, 0.0};
        case 2: return {0.0, v, t};
        case 3: return {0.0, q, v};
        case 4: return {t, 0.0, v};
        default: return {v, 0.0, q};
    }
}

Image render(const ConceptSchema& schema, const ConceptVector& c, int resolution) {
    if (resolution != 32 && resolution != 64) {
        throw std::invalid_argument("render: resolution must be 32 or 64");
    }
    if (!schema.valid_vector(c)) throw std::invalid_argument("render: concept vector invalid for schema");
    switch (schema.dataset_id) {
        case DatasetId::dsprites:
        case DatasetId::dsprites_colour:
            return render_dsprites(schema, c, resolution);
        case DatasetId::shapes3d_proxy:
            return render_shapes3d_proxy(schema, c, resolution);
    }
    throw std::logic_error("unreachable dataset id");
}

}  // namespace cbx
