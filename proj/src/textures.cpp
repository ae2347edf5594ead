#include "netfrag/textures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "netfrag/kernels.hpp"

namespace netfrag::harness {

TextureKind texture_kind_from(const std::string& name) {
    if (name == "stripes_0") return TextureKind::stripes_0;
    if (name == "stripes_90") return TextureKind::stripes_90;
    if (name == "checker") return TextureKind::checker;
    if (name == "dots") return TextureKind::dots;
    throw InvalidArgument("unknown texture kind: " + name);
}

const char* texture_kind_name(TextureKind k) {
    switch (k) {
        case TextureKind::stripes_0: return "stripes_0";
        case TextureKind::stripes_90: return "stripes_90";
        case TextureKind::checker: return "checker";
        case TextureKind::dots: return "dots";
    }
    return "?";
}

double texture_value(TextureKind kind, int r, int c, int phase_r, int phase_c) {
    int rr = ((r + phase_r) % 4 + 4) % 4;
    int cc = ((c + phase_c) % 4 + 4) % 4;
    switch (kind) {
        case TextureKind::stripes_0: return rr < 2 ? 0.0 : 1.0;
        case TextureKind::stripes_90: return cc < 2 ? 0.0 : 1.0;
        case TextureKind::checker: return ((rr / 2) + (cc / 2)) % 2 == 0 ? 0.0 : 1.0;
        case TextureKind::dots: return (rr < 2 && cc < 2) ? 1.0 : 0.0;
    }
    return 0.0;
}

GrayImage generate_texture_mosaic(TextureKind kind, int size, double jitter, RngStream& rng,
                                  int phase_r, int phase_c) {
    if (size < 16) throw InvalidArgument("generate_texture_mosaic: size must be >= 16");
    GrayImage img{size, size, std::vector<double>(static_cast<size_t>(size * size))};
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double v = texture_value(kind, r, c, phase_r, phase_c);
            if (jitter > 0.0) v += rng.uniform(-0.5 * jitter, 0.5 * jitter);
            img.at(r, c) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

namespace {

// 12x12 letter-like shapes; '#' marks support. Chosen to avoid one shape
// being a subset of another.
const char* const kSprites[kSpriteCount][kSpriteSize] = {
    {
        // T
        "############",
        "############",
        "############",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
        "....####....",
    },
    {
        // L
        "####........",
        "####........",
        "####........",
        "####........",
        "####........",
        "####........",
        "####........",
        "####........",
        "####........",
        "############",
        "############",
        "############",
    },
    {
        // X
        "###......###",
        "####....####",
        ".####..####.",
        "..########..",
        "...######...",
        "....####....",
        "....####....",
        "...######...",
        "..########..",
        ".####..####.",
        "####....####",
        "###......###",
    },
    {
        // O
        "...######...",
        ".##########.",
        ".###....###.",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        ".###....###.",
        ".##########.",
        "...######...",
    },
    {
        // Z
        "############",
        "############",
        ".......####.",
        "......####..",
        ".....####...",
        "....####....",
        "...####.....",
        "..####......",
        ".####.......",
        "####........",
        "############",
        "############",
    },
    {
        // H
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        "############",
        "############",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
        "###......###",
    },
    {
        // V
        "###......###",
        "###......###",
        "###......###",
        ".###....###.",
        ".###....###.",
        ".###....###.",
        "..###..###..",
        "..###..###..",
        "..###..###..",
        "...######...",
        "...######...",
        "....####....",
    },
    {
        // K
        "###......###",
        "###.....###.",
        "###....###..",
        "###...###...",
        "###..###....",
        "########....",
        "########....",
        "###..###....",
        "###...###...",
        "###....###..",
        "###.....###.",
        "###......###",
    },
    {
        // N
        "###......###",
        "####.....###",
        "#####....###",
        "######...###",
        "###.###..###",
        "###..###.###",
        "###...######",
        "###....#####",
        "###.....####",
        "###......###",
        "###......###",
        "###......###",
    },
    {
        // W
        "###......###",
        "###......###",
        "###......###",
        "###..##..###",
        "###..##..###",
        "###..##..###",
        "###.####.###",
        "###.####.###",
        "####.##.####",
        "####....####",
        "####....####",
        "####....####",
    },
};

const char* const kSpriteNames[kSpriteCount] = {"T", "L", "X", "O", "Z",
                                                "H", "V", "K", "N", "W"};

}  // namespace

const std::vector<uint8_t>& sprite_support(int sprite_id) {
    if (sprite_id < 0 || sprite_id >= kSpriteCount) {
        throw InvalidArgument("sprite_support: sprite id out of range");
    }
    static const std::vector<std::vector<uint8_t>> cache = [] {
        std::vector<std::vector<uint8_t>> all;
        for (int s = 0; s < kSpriteCount; ++s) {
            std::vector<uint8_t> bits(kSpriteSize * kSpriteSize, 0);
            for (int r = 0; r < kSpriteSize; ++r) {
                for (int c = 0; c < kSpriteSize; ++c) {
                    bits[static_cast<size_t>(r * kSpriteSize + c)] =
                        kSprites[s][r][c] == '#' ? 1 : 0;
                }
            }
            all.push_back(std::move(bits));
        }
        return all;
    }();
    return cache[static_cast<size_t>(sprite_id)];
}

const char* sprite_name(int sprite_id) {
    if (sprite_id < 0 || sprite_id >= kSpriteCount) {
        throw InvalidArgument("sprite_name: sprite id out of range");
    }
    return kSpriteNames[sprite_id];
}

SpriteScene generate_sprite_scene(const SceneParams& p, RngStream& rng) {
    if (p.scale <= 0.0) throw InvalidArgument("generate_sprite_scene: scale must be > 0");
    const int scaled = static_cast<int>(std::lround(kSpriteSize * p.scale));
    if (p.translate_r < 0 || p.translate_c < 0 || p.translate_r + scaled > p.size ||
        p.translate_c + scaled > p.size) {
        throw InvalidArgument("generate_sprite_scene: placement out of bounds");
    }

    SpriteScene scene;
    scene.scaled_rows = scaled;
    scene.scaled_cols = scaled;
    scene.image = generate_texture_mosaic(p.background, p.size, p.bg_jitter, rng);
    scene.mask = GrayImage{p.size, p.size,
                           std::vector<double>(static_cast<size_t>(p.size * p.size), 0.0)};

    // texture the sprite in its own 12x12 frame, then scale support and
    // texture together
    const auto& support = sprite_support(p.sprite_id);
    std::vector<double> canvas(kSpriteSize * kSpriteSize, 0.0);
    for (int r = 0; r < kSpriteSize; ++r) {
        for (int c = 0; c < kSpriteSize; ++c) {
            double v = texture_value(p.foreground, r, c);
            if (p.fg_jitter > 0.0) v += rng.uniform(-0.5 * p.fg_jitter, 0.5 * p.fg_jitter);
            canvas[static_cast<size_t>(r * kSpriteSize + c)] = std::clamp(v, 0.0, 1.0);
        }
    }
    for (int r = 0; r < scaled; ++r) {
        int sr = std::min(kSpriteSize - 1,
                          static_cast<int>(std::floor((r + 0.5) * kSpriteSize / scaled)));
        for (int c = 0; c < scaled; ++c) {
            int sc = std::min(kSpriteSize - 1,
                              static_cast<int>(std::floor((c + 0.5) * kSpriteSize / scaled)));
            if (!support[static_cast<size_t>(sr * kSpriteSize + sc)]) continue;
            int ir = p.translate_r + r;
            int ic = p.translate_c + c;
            scene.image.at(ir, ic) = canvas[static_cast<size_t>(sr * kSpriteSize + sc)];
            scene.mask.at(ir, ic) = 1.0;
        }
    }
    return scene;
}

ObjectScene generate_object_scene(TextureKind object, TextureKind background, int object_size,
                                  int top_r, int top_c, int size, double object_jitter,
                                  double background_jitter, RngStream& rng) {
    if (top_r < 0 || top_c < 0 || top_r + object_size > size || top_c + object_size > size) {
        throw InvalidArgument("generate_object_scene: placement out of bounds");
    }
    ObjectScene scene;
    scene.image = generate_texture_mosaic(background, size, background_jitter, rng);
    scene.mask = GrayImage{size, size, std::vector<double>(static_cast<size_t>(size * size), 0.0)};
    for (int r = 0; r < object_size; ++r) {
        for (int c = 0; c < object_size; ++c) {
            double v = texture_value(object, r, c);
            if (object_jitter > 0.0) v += rng.uniform(-0.5 * object_jitter, 0.5 * object_jitter);
            scene.image.at(top_r + r, top_c + c) = std::clamp(v, 0.0, 1.0);
            scene.mask.at(top_r + r, top_c + c) = 1.0;
        }
    }
    return scene;
}

CrossCorrelationResult oracle_cross_correlation(const GrayImage& model, const GrayImage& image) {
    if (model.rows > image.rows || model.cols > image.cols) {
        throw InvalidArgument("oracle_cross_correlation: model larger than image");
    }
    std::vector<double> scores;
    kernels::ncc_scores(model.rows, model.cols, model.pixels, image.rows, image.cols, image.pixels,
                        scores);
    const int tc = image.cols - model.cols + 1;
    CrossCorrelationResult best;
    best.score = scores[0];
    for (size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > best.score) {
            best.score = scores[i];
            best.row = static_cast<int>(i) / tc;
            best.col = static_cast<int>(i) % tc;
        }
    }
    return best;
}

void write_pgm16(const std::string& path, int rows, int cols, const std::vector<uint16_t>& v) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("write_pgm16: cannot open " + path);
    std::fprintf(f, "P5\n%d %d\n65535\n", cols, rows);
    for (uint16_t x : v) {
        unsigned char hi = static_cast<unsigned char>(x >> 8);
        unsigned char lo = static_cast<unsigned char>(x & 0xFF);
        std::fputc(hi, f);
        std::fputc(lo, f);
    }
    std::fclose(f);
}

void write_pbm(const std::string& path, const GrayImage& mask) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("write_pbm: cannot open " + path);
    std::fprintf(f, "P4\n%d %d\n", mask.cols, mask.rows);
    for (int r = 0; r < mask.rows; ++r) {
        unsigned char acc = 0;
        int nbits = 0;
        for (int c = 0; c < mask.cols; ++c) {
            acc = static_cast<unsigned char>(acc << 1);
            if (mask.at(r, c) != 0.0) acc |= 1;
            if (++nbits == 8) {
                std::fputc(acc, f);
                acc = 0;
                nbits = 0;
            }
        }
        if (nbits > 0) {
            acc = static_cast<unsigned char>(acc << (8 - nbits));
            std::fputc(acc, f);
        }
    }
    std::fclose(f);
}

}  // namespace netfrag::harness
