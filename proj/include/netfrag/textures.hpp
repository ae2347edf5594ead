#pragma once

#include <string>
#include <vector>

#include "netfrag/fragments.hpp"
#include "netfrag/substrate.hpp"

namespace netfrag::harness {

using fragments::GrayImage;

enum class TextureKind { stripes_0, stripes_90, checker, dots };

TextureKind texture_kind_from(const std::string& name);
const char* texture_kind_name(TextureKind k);

// Deterministic period-4 pattern with additive per-pixel uniform jitter of
// peak-to-peak width `jitter`, clipped to [0, 1]. The phase offsets shift the
// pattern; (0, 0) is the canonical alignment.
GrayImage generate_texture_mosaic(TextureKind kind, int size, double jitter, RngStream& rng,
                                  int phase_r = 0, int phase_c = 0);

// Clean pattern value at (r, c), before jitter.
double texture_value(TextureKind kind, int r, int c, int phase_r = 0, int phase_c = 0);

// Ten fixed 12x12 binary sprites (letter-like shapes).
constexpr int kSpriteCount = 10;
constexpr int kSpriteSize = 12;
const std::vector<uint8_t>& sprite_support(int sprite_id);  // row-major 0/1
const char* sprite_name(int sprite_id);

struct SceneParams {
    int sprite_id = 0;
    TextureKind foreground = TextureKind::checker;
    TextureKind background = TextureKind::stripes_0;
    int translate_r = 0;  // top-left pixel of the placed sprite
    int translate_c = 0;
    double scale = 1.0;
    int size = 32;
    double fg_jitter = 0.0;
    double bg_jitter = 0.0;
};

struct SpriteScene {
    GrayImage image;
    GrayImage mask;  // ground-truth support, 0/1 pixels
    int scaled_rows = 0;
    int scaled_cols = 0;
};

// Sprite textured in its own frame (texture phase anchored to the sprite),
// nearest-neighbor scaled, placed over a background mosaic anchored to the
// image frame. Out-of-bounds placement is an error.
SpriteScene generate_sprite_scene(const SceneParams& params, RngStream& rng);

// Object-on-background scene for segmentation: a square patch of one texture
// over a full-field background texture; the patch's texture phase is anchored
// to the patch.
struct ObjectScene {
    GrayImage image;
    GrayImage mask;
};
ObjectScene generate_object_scene(TextureKind object, TextureKind background, int object_size,
                                  int top_r, int top_c, int size, double object_jitter,
                                  double background_jitter, RngStream& rng);

// Exhaustive zero-mean normalized cross-correlation of a model patch over
// all integer placements; returns the argmax (lowest row, then col on ties).
struct CrossCorrelationResult {
    int row = 0;
    int col = 0;
    double score = 0.0;
};
CrossCorrelationResult oracle_cross_correlation(const GrayImage& model, const GrayImage& image);

// Portable graymap / bitmap emitters.
void write_pgm16(const std::string& path, int rows, int cols, const std::vector<uint16_t>& v);
void write_pbm(const std::string& path, const GrayImage& mask);  // nonzero -> black

}  // namespace netfrag::harness
