#include "lbgan/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "lbgan/dataset.hpp"
#include "lbgan/errors.hpp"

namespace lbgan {

namespace {

constexpr int kSupersample = 4;
constexpr double kHalfEyeSpacing = 0.19;  // template eyes at 0.31 W and 0.69 W
constexpr double kEyeRow = 0.42;
constexpr double kMouthRow = 0.75;
constexpr double kEyeDepth = 0.20;
constexpr double kMouthDepth = 0.22;
constexpr double kNoseBridgeDepth = 0.22;
constexpr double kNoseTipDepth = 0.32;
constexpr double kNoseRow = 0.45;
constexpr double kOcclusionDegrees = 60.0;

using Rgb = std::array<double, 3>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double sector = h * 6.0;
  const int i = static_cast<int>(sector) % 6;
  const double f = sector - std::floor(sector);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Rgb scaled(const Rgb& c, double k) { return {c[0] * k, c[1] * k, c[2] * k}; }

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

bool in_capsule(double x, double y, double x0, double y0, double x1, double y1, double radius) {
  const double vx = x1 - x0, vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = x - (x0 + t * vx), dy = y - (y0 + t * vy);
  return dx * dx + dy * dy <= radius * radius;
}

// Everything in normalised coordinates: x = col / W, y = row / H.
struct FaceGeometry {
  double sin_yaw, cos_yaw;
  double head_cx = 0.5, head_cy = 0.55, head_rx, head_ry = 0.40;
  double left_eye_x, right_eye_x;
  bool left_eye_visible, right_eye_visible;
  double eye_rx, eye_ry;
  double nose_x0, nose_y0 = kNoseRow, nose_x1, nose_y1;
  double mouth_x, mouth_rx, mouth_ry = 0.032;
  double back_hair_edge;  // hair covers head points with (x - cx) * sign(yaw) below this

  FaceGeometry(const SyntheticFaceSpec& spec, double yaw_degrees) {
    const double yaw = yaw_degrees * std::numbers::pi / 180.0;
    sin_yaw = std::sin(yaw);
    cos_yaw = std::cos(yaw);
    head_rx = 0.31 * (0.85 + 0.15 * cos_yaw);
    const double half = kHalfEyeSpacing * spec.eye_spacing;
    left_eye_x = 0.5 - half * cos_yaw + kEyeDepth * sin_yaw;
    right_eye_x = 0.5 + half * cos_yaw + kEyeDepth * sin_yaw;
    // turning towards +col hides the eye on the +col side, and vice versa
    left_eye_visible = yaw_degrees >= -kOcclusionDegrees;
    right_eye_visible = yaw_degrees <= kOcclusionDegrees;
    eye_rx = spec.eye_size * (0.45 + 0.55 * cos_yaw);
    eye_ry = spec.eye_size * 0.7;
    nose_x0 = 0.5 + kNoseBridgeDepth * sin_yaw;
    nose_x1 = 0.5 + kNoseTipDepth * sin_yaw;
    nose_y1 = kNoseRow + spec.nose_length;
    mouth_x = 0.5 + kMouthDepth * sin_yaw;
    mouth_rx = spec.mouth_width * (0.35 + 0.65 * cos_yaw);
    back_hair_edge = -head_rx * (1.0 - 0.85 * std::abs(sin_yaw));
  }
};

struct Palette {
  Rgb skin, nose, hair, iris, mouth{0.65, 0.20, 0.25}, sclera{0.95, 0.95, 0.95};
  double bg_gray, bg_slope;
  Rgb bg_tint;

  explicit Palette(const SyntheticFaceSpec& spec) {
    skin = hsv(spec.face_hue, spec.skin_saturation, spec.skin_value);
    nose = scaled(skin, 0.78);
    hair = hsv(spec.hair_hue, 0.5, spec.hair_value);
    iris = hsv(spec.iris_hue, 0.7, 0.35);
    Rng rng(spec.background_seed);
    std::uniform_real_distribution<double> gray(0.30, 0.65), slope(-0.15, 0.15), tint(-0.05, 0.05);
    bg_gray = gray(rng);
    bg_slope = slope(rng);
    bg_tint = {tint(rng), tint(rng), tint(rng)};
  }
};

Rgb shade(const FaceGeometry& g, const Palette& pal, double x, double y) {
  Rgb color{pal.bg_gray + pal.bg_tint[0] + pal.bg_slope * (y - 0.5), pal.bg_gray + pal.bg_tint[1] + pal.bg_slope * (y - 0.5),
            pal.bg_gray + pal.bg_tint[2] + pal.bg_slope * (y - 0.5)};
  const bool nose = in_capsule(x, y, g.nose_x0, g.nose_y0, g.nose_x1, g.nose_y1, 0.022);
  if (!in_ellipse(x, y, g.head_cx, g.head_cy, g.head_rx, g.head_ry)) {
    // a turned nose can stick out past the contour
    return nose ? pal.nose : color;
  }
  const double side = g.sin_yaw > 0 ? 1.0 : (g.sin_yaw < 0 ? -1.0 : 0.0);
  if (y < 0.26 || (x - g.head_cx) * side < g.back_hair_edge) return pal.hair;
  color = pal.skin;
  for (int eye = 0; eye < 2; ++eye) {
    const bool visible = eye == 0 ? g.left_eye_visible : g.right_eye_visible;
    const double ex = eye == 0 ? g.left_eye_x : g.right_eye_x;
    if (!visible || !in_ellipse(x, y, ex, kEyeRow, g.eye_rx, g.eye_ry)) continue;
    const double pupil_x = ex + 0.3 * g.eye_rx * g.sin_yaw;
    color = in_ellipse(x, y, pupil_x, kEyeRow, 0.5 * g.eye_ry, 0.5 * g.eye_ry) ? pal.iris : pal.sclera;
  }
  if (nose) color = pal.nose;
  if (in_ellipse(x, y, g.mouth_x, kMouthRow, g.mouth_rx, g.mouth_ry)) color = pal.mouth;
  return color;
}

}  // namespace

SyntheticFaceSpec SyntheticFaceSpec::from_seed(std::uint64_t identity_seed) {
  Rng rng(identity_seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SyntheticFaceSpec spec;
  spec.identity_seed = identity_seed;
  spec.face_hue = uniform(0.0, 1.0);
  spec.skin_saturation = uniform(0.25, 0.6);
  spec.skin_value = uniform(0.55, 0.92);
  spec.eye_spacing = uniform(0.88, 1.12);
  spec.eye_size = uniform(0.035, 0.06);
  spec.mouth_width = uniform(0.07, 0.14);
  spec.nose_length = uniform(0.08, 0.16);
  spec.hair_hue = uniform(0.0, 1.0);
  spec.hair_value = uniform(0.08, 0.5);
  spec.iris_hue = uniform(0.0, 1.0);
  spec.background_seed = rng();
  return spec;
}

SyntheticFaceSpec SyntheticFaceSpec::canonical() { return SyntheticFaceSpec{}; }

LandmarkSet synthetic_landmarks(const SyntheticFaceSpec& spec, double yaw_degrees, int image_size) {
  const FaceGeometry g(spec, yaw_degrees);
  const double s = image_size;
  return LandmarkSet{{kEyeRow * s, g.left_eye_x * s}, {kEyeRow * s, g.right_eye_x * s}, {kMouthRow * s, g.mouth_x * s}};
}

RenderedFace render_face(const SyntheticFaceSpec& spec, double yaw_degrees, int image_size) {
  if (image_size < 8) throw InvalidParameter("image size must be at least 8");
  if (!(yaw_degrees >= -90.0 && yaw_degrees <= 90.0)) throw InvalidPose("render yaw outside [-90, 90]");
  const FaceGeometry geometry(spec, yaw_degrees);
  const Palette palette(spec);

  cv::Mat out(image_size, image_size, CV_8UC3);
  const double inv = 1.0 / image_size;
  const double weight = 1.0 / (kSupersample * kSupersample);
  for (int r = 0; r < image_size; ++r) {
    auto* row = out.ptr<std::uint8_t>(r);
    for (int c = 0; c < image_size; ++c) {
      Rgb acc{0, 0, 0};
      for (int i = 0; i < kSupersample; ++i) {
        for (int j = 0; j < kSupersample; ++j) {
          const double y = (r + (i + 0.5) / kSupersample) * inv;
          const double x = (c + (j + 0.5) / kSupersample) * inv;
          const Rgb v = shade(geometry, palette, x, y);
          for (int k = 0; k < 3; ++k) acc[k] += v[k] * weight;
        }
      }
      for (int k = 0; k < 3; ++k) {
        row[3 * c + k] = static_cast<std::uint8_t>(std::lround(std::clamp(acc[k], 0.0, 1.0) * 255.0));
      }
    }
  }
  return RenderedFace{out, synthetic_landmarks(spec, yaw_degrees, image_size)};
}

std::uint64_t identity_seed_for(std::uint64_t dataset_seed, int index) {
  return splitmix64(splitmix64(dataset_seed) + static_cast<std::uint64_t>(index));
}

DatasetManifest generate_synthetic_dataset(int n_identities, std::uint64_t seed, int image_size,
                                           const std::filesystem::path& out_dir, Split split) {
  if (n_identities < 2) throw InvalidParameter("need at least 2 identities");
  if (image_size < 8) throw InvalidParameter("image size must be at least 8");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.n_id = n_identities;
  manifest.image_size = image_size;
  manifest.split = split;
  manifest.seed = seed;
  manifest.root = out_dir;
  manifest.records.reserve(static_cast<std::size_t>(n_identities) * kNumPoses);
  for (int id = 0; id < n_identities; ++id) {
    const auto spec = SyntheticFaceSpec::from_seed(identity_seed_for(seed, id));
    for (int degrees : pose_grid()) {
      const RenderedFace face = render_face(spec, degrees, image_size);
      char name[64];
      std::snprintf(name, sizeof name, "images/id%04d_yaw%+03d.png", id, degrees);
      write_png(out_dir / name, face.rgb8);
      manifest.records.push_back(ManifestRecord{name, IdentityLabel{id}, PoseLabel{degrees}, face.landmarks,
                                                spec.identity_seed});
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace lbgan
