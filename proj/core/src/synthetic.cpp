#include "mvda/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "mvda/png_io.hpp"
#include "mvda/rng.hpp"

namespace mvda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Color {
  float r, g, b;
};

struct Canvas {
  int size;
  Tensor<float> image;
  Mask mask;

  explicit Canvas(int s) : size(s), image(Shape{3, s, s}), mask(s, s) {}

  void put(int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    float* p = image.mutable_data();
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    const std::size_t i = static_cast<std::size_t>(y) * size + x;
    p[i] = c.r;
    p[plane + i] = c.g;
    p[2 * plane + i] = c.b;
  }

  void fill_rect(int x0, int y0, int x1, int y1, Color c) {
    for (int y = std::max(0, y0); y < std::min(size, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(size, x1); ++x) put(x, y, c);
  }

  void mark_mask(int x0, int y0, int x1, int y1) {
    for (int y = std::max(0, y0); y < std::min(size, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(size, x1); ++x) mask.set(y, x, 1);
  }
};

Color jitter_color(Rng& rng, Color base, float amount) {
  auto j = [&](float v) {
    const float out = v + static_cast<float>(rng.uniform(-amount, amount));
    return out < 0.f ? 0.f : (out > 1.f ? 1.f : out);
  };
  return {j(base.r), j(base.g), j(base.b)};
}

// Breach cells are a prefix of a fixed permutation, giving nested damage
// patterns across levels.
std::vector<int> breach_cells(std::uint64_t seed, int n_cells, int level) {
  std::vector<int> order(static_cast<std::size_t>(n_cells));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const int take = static_cast<int>(
      std::lround(damage_severity_fraction(level) * n_cells));
  order.resize(static_cast<std::size_t>(std::min(take, n_cells)));
  return order;
}

void draw_breaches(Canvas& canvas, int x0, int y0, int w, int h, int cell,
                   std::uint64_t pattern_seed, int level, Rng& debris_rng) {
  if (level <= 0 || w <= 0 || h <= 0) return;
  const int cols = std::max(1, w / cell);
  const int rows = std::max(1, h / cell);
  const std::vector<int> cells = breach_cells(pattern_seed, cols * rows, level);
  const Color hole{0.06f, 0.05f, 0.05f};
  for (int idx : cells) {
    const int cx = x0 + (idx % cols) * cell;
    const int cy = y0 + (idx / cols) * cell;
    canvas.fill_rect(cx, cy, std::min(cx + cell, x0 + w), std::min(cy + cell, y0 + h), hole);
    // sparse rubble inside the hole
    for (int k = 0; k < cell; ++k) {
      const int px = cx + debris_rng.uniform_int(0, cell - 1);
      const int py = cy + debris_rng.uniform_int(0, cell - 1);
      if (px < x0 + w && py < y0 + h)
        canvas.put(px, py, {0.32f, 0.25f, 0.2f});
    }
  }
}

void draw_ground_clutter(Canvas& canvas, Rng& rng, double density, int ground_y) {
  const int n = static_cast<int>(std::lround(density * 6.0));
  for (int i = 0; i < n; ++i) {
    const int cx = rng.uniform_int(2, canvas.size - 3);
    const int cy = rng.uniform_int(ground_y, canvas.size - 2);
    const int r = rng.uniform_int(1, 3);
    const Color bush = jitter_color(rng, {0.15f, 0.4f, 0.12f}, 0.06f);
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) canvas.put(x, y, bush);
  }
}

void render_ground_view(const SyntheticSceneSpec& spec, int facade, Canvas& canvas) {
  const int s = canvas.size;
  const CameraJitter& jit = spec.jitter[static_cast<std::size_t>(facade)];
  Rng tex(Rng::derive(spec.texture_seed, "texture"));
  const Color wall = jitter_color(tex, {0.72f, 0.66f, 0.55f}, 0.12f);
  const Color roof = jitter_color(tex, {0.42f, 0.26f, 0.22f}, 0.08f);
  const Color window{0.18f, 0.22f, 0.3f};

  // sky gradient and ground strip
  const int horizon = s * 2 / 3 + jit.dy;
  for (int y = 0; y < s; ++y) {
    if (y < horizon) {
      const float f = static_cast<float>(y) / std::max(1, horizon);
      for (int x = 0; x < s; ++x)
        canvas.put(x, y, {0.5f + 0.25f * f, 0.65f + 0.18f * f, 0.9f + 0.07f * f});
    } else {
      Rng row(Rng::derive(spec.texture_seed, "ground-row", static_cast<std::uint64_t>(y)));
      for (int x = 0; x < s; ++x)
        canvas.put(x, y, jitter_color(row, {0.3f, 0.45f, 0.22f}, 0.04f));
    }
  }

  Rng clutter(Rng::derive(spec.texture_seed, "clutter", static_cast<std::uint64_t>(facade)));
  draw_ground_clutter(canvas, clutter, spec.clutter_density, horizon);

  // facade geometry: front/back show the footprint width, sides the depth
  const int base_w = (facade % 2 == 0) ? spec.footprint_w : spec.footprint_d;
  const int w = std::max(8, static_cast<int>(std::lround(base_w * jit.scale)));
  const int h = std::max(8, static_cast<int>(std::lround(spec.wall_h * jit.scale)));
  const int x0 = s / 2 - w / 2 + jit.dx;
  const int y1 = horizon + 2;  // building base slightly below the horizon
  const int y0 = y1 - h;

  canvas.fill_rect(x0, y0, x0 + w, y1, wall);
  canvas.mark_mask(x0, y0, x0 + w, y1);

  // gable roof as a shrinking stack of rows
  const int roof_h = std::max(3, w / 4);
  for (int i = 0; i < roof_h; ++i) {
    const int inset = (i * w) / (2 * roof_h);
    canvas.fill_rect(x0 + inset, y0 - roof_h + i, x0 + w - inset, y0 - roof_h + i + 1, roof);
    canvas.mark_mask(x0 + inset, y0 - roof_h + i, x0 + w - inset, y0 - roof_h + i + 1);
  }

  // windows and a door; layout fixed per facade
  Rng fach(Rng::derive(spec.texture_seed, "facade", static_cast<std::uint64_t>(facade)));
  const int n_win = std::max(1, w / 12);
  for (int i = 0; i < n_win; ++i) {
    const int wx = x0 + 2 + (i * (w - 6)) / n_win + fach.uniform_int(0, 2);
    const int wy = y0 + 2 + fach.uniform_int(0, std::max(1, h / 3));
    canvas.fill_rect(wx, wy, wx + 3, wy + 4, window);
  }
  if (facade == 0) {
    const int dx = x0 + w / 2 - 2;
    canvas.fill_rect(dx, y1 - 7, dx + 4, y1, {0.3f, 0.2f, 0.12f});
  }

  if (spec.damage_level > 0 && spec.damage_views[static_cast<std::size_t>(facade)]) {
    Rng debris(Rng::derive(spec.texture_seed, "debris", static_cast<std::uint64_t>(facade)));
    draw_breaches(canvas, x0, y0, w, h, 4,
                  Rng::derive(spec.texture_seed, "breach", static_cast<std::uint64_t>(facade)),
                  spec.damage_level, debris);
    // rubble on the ground in front of the damaged facade
    const int rubble = spec.damage_level * 14;
    for (int i = 0; i < rubble; ++i) {
      const int px = x0 - 3 + debris.uniform_int(0, w + 5);
      const int py = y1 + debris.uniform_int(0, std::max(2, (s - y1) / 2));
      canvas.put(px, py, {0.35f, 0.3f, 0.24f});
    }
  }
}

void render_overhead_view(const SyntheticSceneSpec& spec, Canvas& canvas) {
  const int s = canvas.size;
  const CameraJitter& jit = spec.jitter[static_cast<std::size_t>(ViewRole::kOverhead)];
  Rng tex(Rng::derive(spec.texture_seed, "texture"));
  (void)jitter_color(tex, {0, 0, 0}, 0.f);  // keep stream aligned with ground views (wall)
  const Color roof = jitter_color(tex, {0.42f, 0.26f, 0.22f}, 0.08f);

  // lawn with a road strip along the bottom
  for (int y = 0; y < s; ++y) {
    Rng row(Rng::derive(spec.texture_seed, "lawn-row", static_cast<std::uint64_t>(y)));
    for (int x = 0; x < s; ++x)
      canvas.put(x, y, jitter_color(row, {0.28f, 0.42f, 0.2f}, 0.04f));
  }
  canvas.fill_rect(0, s - 9, s, s - 3, {0.45f, 0.45f, 0.47f});

  Rng clutter(Rng::derive(spec.texture_seed, "clutter", 4));
  const int n_trees = static_cast<int>(std::lround(spec.clutter_density * 5.0));
  for (int i = 0; i < n_trees; ++i) {
    const int cx = clutter.uniform_int(2, s - 3);
    const int cy = clutter.uniform_int(2, s - 12);
    const int r = clutter.uniform_int(2, 4);
    const Color crown = jitter_color(clutter, {0.12f, 0.35f, 0.1f}, 0.05f);
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) canvas.put(x, y, crown);
  }

  const int w = std::max(8, static_cast<int>(std::lround(spec.footprint_w * jit.scale)));
  const int d = std::max(8, static_cast<int>(std::lround(spec.footprint_d * jit.scale)));
  const int x0 = s / 2 - w / 2 + jit.dx;
  const int y0 = s / 2 - d / 2 + jit.dy - 4;
  canvas.fill_rect(x0, y0, x0 + w, y0 + d, roof);
  canvas.mark_mask(x0, y0, x0 + w, y0 + d);

  // ridge line and seams
  const Color seam{roof.r * 0.75f, roof.g * 0.75f, roof.b * 0.75f};
  canvas.fill_rect(x0, y0 + d / 2, x0 + w, y0 + d / 2 + 1, seam);
  for (int x = x0 + 4; x < x0 + w; x += 6) canvas.fill_rect(x, y0, x + 1, y0 + d, seam);

  if (spec.damage_level > 0 && spec.roof_damage) {
    Rng debris(Rng::derive(spec.texture_seed, "debris", 4));
    draw_breaches(canvas, x0, y0, w, d, 4, Rng::derive(spec.texture_seed, "breach", 4),
                  spec.damage_level, debris);
    const int rubble = spec.damage_level * 10;
    for (int i = 0; i < rubble; ++i) {
      const int px = x0 - 4 + debris.uniform_int(0, w + 7);
      const int py = y0 - 4 + debris.uniform_int(0, d + 7);
      canvas.put(px, py, {0.35f, 0.3f, 0.24f});
    }
  }
}

json spec_to_json(const SyntheticSceneSpec& spec, int label) {
  json views = json::array();
  for (bool v : spec.damage_views) views.push_back(v);
  return json{{"footprint_w", spec.footprint_w},
              {"footprint_d", spec.footprint_d},
              {"wall_h", spec.wall_h},
              {"texture_seed", spec.texture_seed},
              {"damage_level", spec.damage_level},
              {"damage_views", views},
              {"roof_damage", spec.roof_damage},
              {"clutter_density", spec.clutter_density},
              {"label", label}};
}

}  // namespace

double damage_severity_fraction(int level) {
  static constexpr double kFractions[5] = {0.0, 0.15, 0.35, 0.60, 0.85};
  if (level < 0 || level >= 5)
    throw std::invalid_argument("damage level " + std::to_string(level) + " outside 0..4");
  return kFractions[level];
}

RenderedView render_view(const SyntheticSceneSpec& spec, ViewRole role, int image_size) {
  Canvas canvas(image_size);
  if (role == ViewRole::kOverhead)
    render_overhead_view(spec, canvas);
  else
    render_ground_view(spec, static_cast<int>(role), canvas);
  return {std::move(canvas.image), std::move(canvas.mask)};
}

SyntheticSceneSpec scene_spec_for_building(const GeneratorConfig& config, int building_index,
                                           int* label_out) {
  Rng rng(Rng::derive(config.seed, "building", static_cast<std::uint64_t>(building_index)));

  // label from the class mix
  const double u = rng.uniform();
  double cum = 0;
  int label = 4;
  for (int k = 0; k < 5; ++k) {
    cum += config.class_mix[static_cast<std::size_t>(k)];
    if (u < cum) {
      label = k;
      break;
    }
  }

  SyntheticSceneSpec spec;
  spec.footprint_w = rng.uniform_int(28, 44);
  spec.footprint_d = rng.uniform_int(24, 40);
  spec.wall_h = rng.uniform_int(18, 28);
  spec.texture_seed = rng.next_u64();
  spec.damage_level = label;
  spec.clutter_density = rng.uniform(0.3, 0.8);

  const bool damaged = label > 0;
  const bool directional = damaged && rng.uniform() < config.directional_fraction;
  if (directional) {
    // wall damage on exactly one facade; the roof stays intact, so neither
    // the other ground views nor the overhead view reveal it
    spec.damage_views[static_cast<std::size_t>(rng.uniform_int(0, 3))] = true;
    spec.roof_damage = false;
  } else if (damaged) {
    spec.damage_views = {true, true, true, true};
    spec.roof_damage = true;
  }

  for (int v = 0; v < kNumViews; ++v) {
    spec.jitter[static_cast<std::size_t>(v)] = {rng.uniform_int(-3, 3), rng.uniform_int(-3, 3),
                                                rng.uniform(0.95, 1.05)};
  }
  if (label_out) *label_out = label;
  return spec;
}

DatasetManifest generate_synthetic_dataset(const GeneratorConfig& config,
                                           const std::string& out_dir) {
  if (config.n_buildings < 5)
    throw std::invalid_argument("generator: need at least 5 buildings");
  double mix_sum = 0;
  for (double m : config.class_mix) {
    if (m < 0) throw std::invalid_argument("generator: class mix must be non-negative");
    mix_sum += m;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9)
    throw std::invalid_argument("generator: class mix must sum to 1");
  if (config.directional_fraction < 0 || config.directional_fraction > 1)
    throw std::invalid_argument("generator: directional fraction must lie in [0,1]");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (!fs::is_directory(fs::path(out_dir) / "images") ||
      !fs::is_directory(fs::path(out_dir) / "masks"))
    throw std::runtime_error("generator: cannot create output directory " + out_dir);

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (int b = 0; b < config.n_buildings; ++b) {
    char id[16];
    std::snprintf(id, sizeof(id), "b%04d", b);
    int label = 0;
    const SyntheticSceneSpec spec = scene_spec_for_building(config, b, &label);

    MultiViewSample sample;
    sample.building_id = id;
    sample.label = label;
    sample.provenance = spec_to_json(spec, label).dump();

    fs::create_directories(fs::path(out_dir) / "images" / id, ec);
    fs::create_directories(fs::path(out_dir) / "masks" / id, ec);
    for (int v = 0; v < kNumViews; ++v) {
      const ViewRole role = static_cast<ViewRole>(v);
      const RenderedView rendered = render_view(spec, role, config.image_size);
      const std::string img_rel =
          (fs::path("images") / id / (std::string(view_role_name(role)) + ".png")).string();
      const std::string mask_rel =
          (fs::path("masks") / id / (std::string(view_role_name(role)) + ".png")).string();
      write_png((fs::path(out_dir) / img_rel).string(), rendered.image);
      write_png((fs::path(out_dir) / mask_rel).string(), rendered.mask);
      sample.views[static_cast<std::size_t>(v)] = {img_rel, mask_rel};
    }
    manifest.samples.push_back(std::move(sample));
  }

  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace mvda
