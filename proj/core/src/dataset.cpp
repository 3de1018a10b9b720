#include "mvda/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mvda/png_io.hpp"
#include "mvda/rng.hpp"

namespace mvda {

namespace fs = std::filesystem;
using nlohmann::json;

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json samples = json::array();
  for (const auto& s : manifest.samples) {
    json views;
    for (int i = 0; i < kNumViews; ++i)
      views[view_role_name(static_cast<ViewRole>(i))] = {{"image", s.views[i].image},
                                                         {"mask", s.views[i].mask}};
    samples.push_back({{"building_id", s.building_id},
                       {"label", s.label},
                       {"provenance", s.provenance},
                       {"views", views}});
  }
  json splits;
  for (const auto& [id, split] : manifest.splits) splits[id] = split_name(split);
  const json doc{{"version", manifest.version}, {"samples", samples}, {"splits", splits}};

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  f << doc.dump(2) << '\n';
  if (!f) throw std::runtime_error("manifest: write failed " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open " + path);
  json doc = json::parse(f, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw std::runtime_error("manifest: " + path + " is not valid JSON");

  DatasetManifest manifest;
  manifest.root = fs::path(path).parent_path().string();
  if (manifest.root.empty()) manifest.root = ".";
  manifest.version = doc.at("version").get<int>();
  if (manifest.version != 1)
    throw std::runtime_error("manifest: unsupported version " + std::to_string(manifest.version));

  for (const auto& s : doc.at("samples")) {
    MultiViewSample sample;
    sample.building_id = s.at("building_id").get<std::string>();
    if (manifest.find(sample.building_id))
      throw std::runtime_error("manifest: duplicate building '" + sample.building_id + "'");
    sample.label = s.at("label").get<int>();
    if (sample.label < 0 || sample.label >= kNumDamageStates)
      throw std::runtime_error("manifest: building '" + sample.building_id + "' has label " +
                               std::to_string(sample.label) + " outside DS-0..DS-" +
                               std::to_string(kNumDamageStates - 1));
    sample.provenance = s.value("provenance", std::string("external"));

    const json& views = s.at("views");
    if (views.size() != static_cast<std::size_t>(kNumViews))
      throw std::runtime_error("manifest: building '" + sample.building_id + "' has " +
                               std::to_string(views.size()) + " views, expected " +
                               std::to_string(kNumViews));
    for (int i = 0; i < kNumViews; ++i) {
      const char* role = view_role_name(static_cast<ViewRole>(i));
      if (!views.contains(role))
        throw std::runtime_error("manifest: building '" + sample.building_id +
                                 "' is missing view '" + role + "'");
      sample.views[i].image = views.at(role).at("image").get<std::string>();
      sample.views[i].mask = views.at(role).at("mask").get<std::string>();
      for (const std::string& rel : {sample.views[i].image, sample.views[i].mask})
        if (!fs::exists(fs::path(manifest.root) / rel))
          throw std::runtime_error("manifest: building '" + sample.building_id +
                                   "' references missing file " + rel);
    }
    manifest.samples.push_back(std::move(sample));
  }

  if (doc.contains("splits")) {
    for (const auto& [id, name] : doc.at("splits").items()) {
      if (!manifest.find(id))
        throw std::runtime_error("manifest: split entry for unknown building '" + id + "'");
      manifest.splits[id] = split_from_name(name.get<std::string>());
    }
  }
  return manifest;
}

void split_dataset(DatasetManifest& manifest, const std::array<double, 3>& fractions,
                   std::uint64_t seed) {
  double sum = 0;
  for (double f : fractions) {
    if (f < 0) throw std::invalid_argument("split: fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");
  const int n = static_cast<int>(manifest.samples.size());
  if (n == 0) throw std::invalid_argument("split: empty dataset");

  // Largest-remainder rounding over building counts.
  std::array<int, 3> counts{};
  std::array<double, 3> remainders{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fractions[i] * n;
    counts[i] = static_cast<int>(exact);
    remainders[i] = exact - counts[i];
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[i] > remainders[best]) best = i;
    ++counts[best];
    remainders[best] = -1;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i)
    if (counts[i] == 0)
      throw std::invalid_argument(std::string("split: ") +
                                  split_name(static_cast<SplitKind>(i)) +
                                  " split would be empty with " + std::to_string(n) +
                                  " buildings");

  std::vector<std::string> ids;
  ids.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) ids.push_back(s.building_id);
  Rng rng(Rng::derive(seed, "dataset.split"));
  rng.shuffle(ids);

  manifest.splits.clear();
  int idx = 0;
  for (int part = 0; part < 3; ++part)
    for (int i = 0; i < counts[part]; ++i, ++idx)
      manifest.splits[ids[static_cast<std::size_t>(idx)]] = static_cast<SplitKind>(part);
}

LoadedView load_view(const DatasetManifest& manifest, const MultiViewSample& sample,
                     ViewRole role) {
  const ViewPaths& paths = sample.views[static_cast<int>(role)];
  LoadedView v;
  v.image = read_png((fs::path(manifest.root) / paths.image).string());
  v.mask = read_png_mask((fs::path(manifest.root) / paths.mask).string());
  if (v.image.dim(0) != 3)
    throw std::runtime_error("dataset: view image must be RGB: " + paths.image);
  return v;
}

std::array<LoadedView, kNumViews> load_all_views(const DatasetManifest& manifest,
                                                 const MultiViewSample& sample) {
  std::array<LoadedView, kNumViews> out;
  for (int i = 0; i < kNumViews; ++i)
    out[static_cast<std::size_t>(i)] = load_view(manifest, sample, static_cast<ViewRole>(i));
  return out;
}

}  // namespace mvda
