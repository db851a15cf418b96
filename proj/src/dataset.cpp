#include "matk/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "matk/attacks.hpp"
#include "matk/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace matk {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kProbe: return "probe";
    case Split::kGallery: return "gallery";
  }
  return "?";
}

namespace {

float clamp255(float v) { return std::min(255.0f, std::max(0.0f, v)); }

struct IdentityAppearance {
  float band_color[3][3];  // band x channel
  float silhouette_w;      // width fraction
  float silhouette_h;      // height fraction
  float bg;
};

// Identity colors live in a compressed range: the gaps between identities are
// a few tens of pixel levels, so small-budget perturbations are meaningful
// while per-image jitter stays well below the identity signal.
IdentityAppearance make_appearance(uint64_t seed, int id) {
  std::mt19937_64 rng(mix_seed(seed, 1000 + static_cast<uint64_t>(id)));
  std::uniform_real_distribution<float> color(100.0f, 156.0f);
  std::uniform_real_distribution<float> wf(0.45f, 0.9f);
  std::uniform_real_distribution<float> hf(0.75f, 0.95f);
  IdentityAppearance a;
  for (auto& band : a.band_color)
    for (float& c : band) c = color(rng);
  a.silhouette_w = wf(rng);
  a.silhouette_h = hf(rng);
  a.bg = 64.0f;
  return a;
}

// Head / torso / legs color bands inside a centered silhouette rectangle.
float pattern_value(const IdentityAppearance& a, int h, int w, int y, int x, int c) {
  const float cy = h / 2.0f, cx = w / 2.0f;
  const float half_h = a.silhouette_h * h / 2.0f;
  const float half_w = a.silhouette_w * w / 2.0f;
  if (std::abs(y + 0.5f - cy) > half_h || std::abs(x + 0.5f - cx) > half_w) return a.bg;
  const float top = cy - half_h;
  const float rel = (y + 0.5f - top) / (2.0f * half_h);
  const int band = rel < 0.2f ? 0 : (rel < 0.6f ? 1 : 2);
  return a.band_color[band][c % 3];
}

ImageRecord render_image(const SynthSpec& spec, const IdentityAppearance& appearance,
                         const std::vector<std::array<float, 3>>& camera_gain, int id,
                         int camera, int index, Split split) {
  std::mt19937_64 rng(mix_seed(spec.seed,
                               static_cast<uint64_t>(id) * 1000003ULL +
                                   static_cast<uint64_t>(camera) * 1009ULL +
                                   static_cast<uint64_t>(index)));
  std::normal_distribution<float> color_jitter(0.0f, spec.jitter.color_sigma);
  std::normal_distribution<float> noise(0.0f, spec.jitter.noise_sigma);
  std::uniform_int_distribution<int> shift(-spec.jitter.shift_max, spec.jitter.shift_max);

  float channel_shift[3] = {0, 0, 0};
  for (int c = 0; c < spec.channels; ++c)
    channel_shift[c % 3] = spec.jitter.color_sigma > 0 ? color_jitter(rng) : 0.0f;
  const int dy = spec.jitter.shift_max > 0 ? shift(rng) : 0;
  const int dx = spec.jitter.shift_max > 0 ? shift(rng) : 0;

  ImageRecord rec;
  rec.identity = id;
  rec.camera = camera;
  rec.split = split;
  rec.pixels = Tensor({spec.height, spec.width, spec.channels});
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const int sy = std::clamp(y - dy, 0, spec.height - 1);
      const int sx = std::clamp(x - dx, 0, spec.width - 1);
      for (int c = 0; c < spec.channels; ++c) {
        float v = pattern_value(appearance, spec.height, spec.width, sy, sx, c);
        v *= camera_gain[static_cast<size_t>(camera)][static_cast<size_t>(c % 3)];
        v += channel_shift[c % 3];
        if (spec.jitter.noise_sigma > 0) v += noise(rng);
        rec.pixels.at(y, x, c) = std::round(clamp255(v));
      }
    }
  }
  return rec;
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.num_train_ids <= 0 || spec.num_test_ids <= 0 || spec.images_per_id_per_camera <= 0)
    throw Error("synth spec counts must be positive");
  if (spec.num_cameras < 2) throw Error("synth spec requires at least 2 cameras");
  if (spec.channels != 1 && spec.channels != 3)
    throw Error("synth spec channels must be 1 or 3");
  if (spec.height < 8 || spec.width < 8)
    throw Error("image too small for shape mask: need height and width >= 8, got " +
                std::to_string(spec.height) + "x" + std::to_string(spec.width));

  std::vector<std::array<float, 3>> camera_gain(static_cast<size_t>(spec.num_cameras));
  for (int cam = 0; cam < spec.num_cameras; ++cam) {
    std::mt19937_64 rng(mix_seed(spec.seed, 777 + static_cast<uint64_t>(cam)));
    std::uniform_real_distribution<float> gain(0.95f, 1.05f);
    for (int c = 0; c < 3; ++c) camera_gain[static_cast<size_t>(cam)][static_cast<size_t>(c)] = gain(rng);
  }

  Dataset ds;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.channels = spec.channels;

  const int total_ids = spec.num_train_ids + spec.num_test_ids;
  for (int id = 0; id < total_ids; ++id) {
    const bool is_train = id < spec.num_train_ids;
    const IdentityAppearance appearance = make_appearance(spec.seed, id);
    for (int cam = 0; cam < spec.num_cameras; ++cam) {
      for (int k = 0; k < spec.images_per_id_per_camera; ++k) {
        Split split = Split::kTrain;
        if (!is_train) {
          // camera 0, first image of each test identity is its probe
          split = (cam == 0 && k == 0) ? Split::kProbe : Split::kGallery;
        }
        ImageRecord rec = render_image(spec, appearance, camera_gain, id, cam, k, split);
        switch (split) {
          case Split::kTrain: ds.train.push_back(std::move(rec)); break;
          case Split::kProbe: ds.probe.push_back(std::move(rec)); break;
          case Split::kGallery: ds.gallery.push_back(std::move(rec)); break;
        }
      }
    }
  }
  return ds;
}

namespace {

bool parse_market_name(const std::string& stem, int* identity, int* camera) {
  // <identity>_c<camera>... with identity possibly negative (distractors)
  size_t us = stem.find('_');
  if (us == std::string::npos || us == 0) return false;
  try {
    size_t used = 0;
    *identity = std::stoi(stem.substr(0, us), &used);
    if (used != us) return false;
  } catch (...) {
    return false;
  }
  if (us + 1 >= stem.size() || stem[us + 1] != 'c') return false;
  size_t pos = us + 2;
  size_t end = pos;
  while (end < stem.size() && std::isdigit(static_cast<unsigned char>(stem[end]))) ++end;
  if (end == pos) return false;
  *camera = std::stoi(stem.substr(pos, end - pos));
  return true;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<ImageRecord> load_image_folder(const std::string& path, Naming naming,
                                           Split split_tag) {
  const fs::path root(path);
  if (!fs::is_directory(root)) throw Error("not a directory: " + path);

  std::vector<std::pair<fs::path, int>> files_with_id;  // id < 0 means parse from name
  if (naming == Naming::kMarketStyle) {
    for (const auto& f : sorted_files(root, ".png")) files_with_id.emplace_back(f, -1);
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) subdirs.push_back(entry.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) {
      int id = 0;
      try {
        size_t used = 0;
        id = std::stoi(sub.filename().string(), &used);
        if (used != sub.filename().string().size() || id < 0) throw Error("");
      } catch (...) {
        throw Error("flat naming: directory name is not a non-negative identity: " +
                    sub.string());
      }
      for (const auto& f : sorted_files(sub, ".png")) files_with_id.emplace_back(f, id);
    }
  }
  if (files_with_id.empty()) throw Error("no images found in " + path);

  std::vector<ImageRecord> records;
  records.reserve(files_with_id.size());
  int h = -1, w = -1, c = -1;
  for (const auto& [file, flat_id] : files_with_id) {
    ImageRecord rec;
    if (naming == Naming::kMarketStyle) {
      int identity = 0, camera = 0;
      if (!parse_market_name(file.stem().string(), &identity, &camera)) {
        throw Error("cannot parse market-style filename: " + file.string());
      }
      rec.identity = identity;
      rec.camera = camera;
    } else {
      rec.identity = flat_id;
      rec.camera = 0;
    }
    const PngImage img = read_png(file.string());
    if (h < 0) {
      h = img.height;
      w = img.width;
      c = img.channels;
    } else if (img.height != h || img.width != w || img.channels != c) {
      throw Error("mixed image sizes in " + path + ": " + file.filename().string());
    }
    rec.pixels = image_to_tensor(img);
    rec.split = split_tag;
    rec.source_path = file.string();
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset load_dataset_dir(const std::string& root) {
  Dataset ds;
  ds.train = load_image_folder(root + "/train", Naming::kMarketStyle, Split::kTrain);
  ds.probe = load_image_folder(root + "/probe", Naming::kMarketStyle, Split::kProbe);
  ds.gallery = load_image_folder(root + "/gallery", Naming::kMarketStyle, Split::kGallery);
  const Tensor& p = ds.train.front().pixels;
  ds.height = p.dim(0);
  ds.width = p.dim(1);
  ds.channels = p.dim(2);
  for (const auto* split : {&ds.probe, &ds.gallery}) {
    for (const auto& rec : *split) {
      if (rec.pixels.dim(0) != ds.height || rec.pixels.dim(1) != ds.width ||
          rec.pixels.dim(2) != ds.channels) {
        throw Error("mixed image sizes across splits in " + root);
      }
    }
  }
  return ds;
}

namespace {

std::string market_file_name(int identity, int camera, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d_c%ds1_%06d_00.png", identity, camera, index);
  return buf;
}

}  // namespace

void write_dataset_dir(const Dataset& dataset, const std::string& root) {
  fs::create_directories(root);
  const std::vector<std::pair<Split, const std::vector<ImageRecord>*>> splits = {
      {Split::kTrain, &dataset.train},
      {Split::kProbe, &dataset.probe},
      {Split::kGallery, &dataset.gallery}};
  for (const auto& [split, records] : splits) {
    const fs::path dir = fs::path(root) / split_name(split);
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(root) / (std::string(split_name(split)) + "_manifest.jsonl"));
    int index = 0;
    for (const auto& rec : *records) {
      const std::string name = market_file_name(rec.identity, rec.camera, index++);
      write_png((dir / name).string(), quantize_image(rec.pixels));
      json line = {{"file", name}, {"identity", rec.identity}, {"camera", rec.camera}};
      manifest << line.dump() << "\n";
    }
  }
}

PngImage quantize_image(const Tensor& pixels) {
  if (pixels.rank() != 3) throw Error("quantize_image expects a {H,W,C} tensor");
  PngImage img;
  img.height = pixels.dim(0);
  img.width = pixels.dim(1);
  img.channels = pixels.dim(2);
  img.data.resize(static_cast<size_t>(pixels.size()));
  for (int64_t i = 0; i < pixels.size(); ++i) {
    img.data[static_cast<size_t>(i)] =
        static_cast<uint8_t>(clamp255(std::round(pixels.at(i))));
  }
  return img;
}

Tensor image_to_tensor(const PngImage& image) {
  Tensor t({image.height, image.width, image.channels});
  for (int64_t i = 0; i < t.size(); ++i)
    t.at(i) = static_cast<float>(image.data[static_cast<size_t>(i)]);
  return t;
}

std::string export_adversarial_gallery(const std::vector<AdversarialExample>& examples,
                                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw Error("cannot write manifest: " + manifest_path);

  int index = 0;
  for (const auto& ex : examples) {
    const ImageRecord& orig = ex.original;
    const PngImage quantized = quantize_image(ex.adversarial);
    // Rounding must not push pixels outside the epsilon ball of the original.
    for (int64_t i = 0; i < orig.pixels.size(); ++i) {
      const float q = static_cast<float>(quantized.data[static_cast<size_t>(i)]);
      if (std::abs(q - orig.pixels.at(i)) > ex.config.epsilon + 1e-6f) {
        throw Error("post-quantization epsilon violation at pixel " + std::to_string(i) +
                    " of " + (orig.source_path.empty() ? "<memory>" : orig.source_path));
      }
    }
    std::string name;
    if (!orig.source_path.empty()) {
      name = fs::path(orig.source_path).filename().string();
    } else {
      name = market_file_name(orig.identity, orig.camera, index);
    }
    write_png((fs::path(out_dir) / name).string(), quantized);

    json line = {{"source", orig.source_path},
                 {"identity", orig.identity},
                 {"camera", orig.camera},
                 {"attack_hash", attack_config_hash(ex.config)},
                 {"loss_before", ex.loss_before},
                 {"loss_after", ex.loss_after},
                 {"file", name}};
    manifest << line.dump() << "\n";
    ++index;
  }
  if (!manifest.good()) throw Error("failed writing manifest: " + manifest_path);
  return manifest_path;
}

std::vector<int> identities(std::span<const ImageRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.identity);
  return out;
}

std::vector<int> cameras(std::span<const ImageRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.camera);
  return out;
}

}  // namespace matk
