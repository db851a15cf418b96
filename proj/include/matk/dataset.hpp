#ifndef MATK_DATASET_HPP_
#define MATK_DATASET_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matk/png_io.hpp"
#include "matk/tensor.hpp"

namespace matk {

enum class Split { kTrain, kProbe, kGallery };

const char* split_name(Split s);

// One image with its annotations. Pixels are stored as floats in [0, 255];
// images loaded from disk or synthesized hold exact 8-bit values, adversarial
// images may hold fractional values until export quantizes them.
struct ImageRecord {
  Tensor pixels;  // {H, W, C}
  int identity = 0;
  int camera = 0;
  Split split = Split::kTrain;
  std::string source_path;
};

struct Dataset {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> probe;
  std::vector<ImageRecord> gallery;
  int height = 0;
  int width = 0;
  int channels = 0;
};

struct SynthJitter {
  float color_sigma = 4.0f;  // per-channel shift, pixel levels
  int shift_max = 1;         // spatial translation, pixels
  float noise_sigma = 3.0f;  // per-pixel noise, pixel levels
};

// Desk-scale synthetic identity dataset. Train and test identity sets are
// disjoint; one image per test identity from the probe camera (camera 0)
// forms the probe set and the remaining test images form the gallery.
struct SynthSpec {
  int num_train_ids = 64;
  int num_test_ids = 32;
  int images_per_id_per_camera = 4;
  int num_cameras = 2;
  int height = 32;
  int width = 16;
  int channels = 3;
  SynthJitter jitter;
  uint64_t seed = 0;
};

Dataset synth_generate(const SynthSpec& spec);

enum class Naming { kMarketStyle, kFlat };

// Loads every PNG in a directory. kMarketStyle parses identity and camera
// from names like 0001_c1s1_000151_00.png; kFlat expects path/<identity>/*.png
// and assigns camera 0. Files are visited in sorted order.
std::vector<ImageRecord> load_image_folder(const std::string& path, Naming naming,
                                           Split split_tag);

// Loads a directory tree with train/, probe/ and gallery/ subdirectories in
// market naming, as written by write_dataset_dir.
Dataset load_dataset_dir(const std::string& root);

// Writes the three splits as PNG files plus per-split JSON-lines manifests.
void write_dataset_dir(const Dataset& dataset, const std::string& root);

// Rounds to the nearest 8-bit level, clamped to [0, 255].
PngImage quantize_image(const Tensor& pixels);
Tensor image_to_tensor(const PngImage& image);

struct AdversarialExample;  // attacks.hpp

// Quantizes adversarial pixels to 8-bit PNGs, re-verifies the epsilon ball
// after rounding, and writes a JSON-lines manifest. Returns the manifest path.
std::string export_adversarial_gallery(const std::vector<AdversarialExample>& examples,
                                       const std::string& out_dir);

std::vector<int> identities(std::span<const ImageRecord> records);
std::vector<int> cameras(std::span<const ImageRecord> records);

}  // namespace matk

#endif  // MATK_DATASET_HPP_
