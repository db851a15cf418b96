#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "matk/attacks.hpp"
#include "matk/dataset.hpp"
#include "matk/embedder.hpp"

using namespace matk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthSpec small_spec(uint64_t seed = 0) {
  SynthSpec spec;
  spec.num_train_ids = 4;
  spec.num_test_ids = 3;
  spec.images_per_id_per_camera = 2;
  spec.num_cameras = 2;
  spec.height = 12;
  spec.width = 8;
  spec.channels = 3;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("synth generation is deterministic") {
  Dataset a = synth_generate(small_spec(7));
  Dataset b = synth_generate(small_spec(7));
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].pixels == b.train[i].pixels);
    CHECK(a.train[i].identity == b.train[i].identity);
  }
  Dataset c = synth_generate(small_spec(8));
  bool differs = false;
  for (size_t i = 0; i < a.train.size() && !differs; ++i)
    differs = !(a.train[i].pixels == c.train[i].pixels);
  CHECK(differs);
}

TEST_CASE("train and test identities are disjoint; splits are structured") {
  Dataset ds = synth_generate(small_spec(1));
  std::set<int> train_ids, test_ids;
  for (const auto& r : ds.train) train_ids.insert(r.identity);
  for (const auto& r : ds.probe) test_ids.insert(r.identity);
  for (const auto& r : ds.gallery) test_ids.insert(r.identity);
  for (int id : train_ids) CHECK(test_ids.count(id) == 0);

  // one probe per test identity, from camera 0
  CHECK(ds.probe.size() == 3);
  for (const auto& p : ds.probe) CHECK(p.camera == 0);
  // gallery holds the rest: 4 images per test id minus the probe
  CHECK(ds.gallery.size() == 3 * (2 * 2) - 3);
  // pixels are 8-bit exact
  for (const auto& r : ds.train)
    for (int64_t i = 0; i < r.pixels.size(); ++i)
      CHECK(r.pixels.at(i) == std::round(r.pixels.at(i)));
}

TEST_CASE("synth rejects tiny images") {
  SynthSpec spec = small_spec();
  spec.height = 6;
  CHECK_THROWS_WITH_AS(synth_generate(spec), doctest::Contains("too small"), Error);
}

TEST_CASE("png roundtrip is lossless") {
  TempDir dir("matk_png_test");
  Dataset ds = synth_generate(small_spec(3));
  const ImageRecord& rec = ds.train.front();
  const std::string file = (dir.path / "img.png").string();
  write_png(file, quantize_image(rec.pixels));
  PngImage loaded = read_png(file);
  Tensor back = image_to_tensor(loaded);
  CHECK(back == rec.pixels);
}

TEST_CASE("market-style names parse and load") {
  TempDir dir("matk_market_test");
  Dataset ds = synth_generate(small_spec(4));
  write_png((dir.path / "0001_c1s1_000151_00.png").string(),
            quantize_image(ds.train[0].pixels));
  write_png((dir.path / "0007_c2s1_000003_00.png").string(),
            quantize_image(ds.train[1].pixels));
  auto records = load_image_folder(dir.path.string(), Naming::kMarketStyle, Split::kGallery);
  REQUIRE(records.size() == 2);
  CHECK(records[0].identity == 1);
  CHECK(records[0].camera == 1);
  CHECK(records[1].identity == 7);
  CHECK(records[1].camera == 2);
  CHECK(records[0].split == Split::kGallery);
}

TEST_CASE("flat naming takes identity from the parent directory") {
  TempDir dir("matk_flat_test");
  Dataset ds = synth_generate(small_spec(5));
  fs::create_directories(dir.path / "3");
  fs::create_directories(dir.path / "12");
  write_png((dir.path / "3" / "a.png").string(), quantize_image(ds.train[0].pixels));
  write_png((dir.path / "12" / "b.png").string(), quantize_image(ds.train[1].pixels));
  auto records = load_image_folder(dir.path.string(), Naming::kFlat, Split::kTrain);
  REQUIRE(records.size() == 2);
  CHECK(records[0].identity == 12);  // sorted directory order: "12" < "3"
  CHECK(records[0].camera == 0);
  CHECK(records[1].identity == 3);
}

TEST_CASE("loader errors") {
  TempDir dir("matk_loader_err");
  CHECK_THROWS_WITH_AS(load_image_folder(dir.path.string(), Naming::kMarketStyle, Split::kTrain),
                       doctest::Contains("no images"), Error);

  Dataset ds = synth_generate(small_spec(6));
  write_png((dir.path / "badname.png").string(), quantize_image(ds.train[0].pixels));
  CHECK_THROWS_WITH_AS(load_image_folder(dir.path.string(), Naming::kMarketStyle, Split::kTrain),
                       doctest::Contains("badname"), Error);

  // mixed sizes
  fs::remove(dir.path / "badname.png");
  write_png((dir.path / "0001_c1s1_000001_00.png").string(),
            quantize_image(ds.train[0].pixels));
  PngImage small;
  small.height = 4;
  small.width = 4;
  small.channels = 3;
  small.data.assign(48, 100);
  write_png((dir.path / "0002_c1s1_000002_00.png").string(), small);
  CHECK_THROWS_WITH_AS(load_image_folder(dir.path.string(), Naming::kMarketStyle, Split::kTrain),
                       doctest::Contains("mixed image sizes"), Error);
}

TEST_CASE("dataset directory roundtrip") {
  TempDir dir("matk_ds_roundtrip");
  Dataset ds = synth_generate(small_spec(9));
  write_dataset_dir(ds, dir.path.string());
  CHECK(fs::exists(dir.path / "train_manifest.jsonl"));
  Dataset back = load_dataset_dir(dir.path.string());
  REQUIRE(back.train.size() == ds.train.size());
  REQUIRE(back.probe.size() == ds.probe.size());
  REQUIRE(back.gallery.size() == ds.gallery.size());
  // records come back sorted by filename; compare as multisets of (id, cam)
  auto key = [](const ImageRecord& r) { return r.identity * 100 + r.camera; };
  std::multiset<int> a, b;
  for (const auto& r : ds.gallery) a.insert(key(r));
  for (const auto& r : back.gallery) b.insert(key(r));
  CHECK(a == b);
}

TEST_CASE("adversarial export re-verifies the epsilon ball and writes the manifest") {
  TempDir dir("matk_export_test");
  Dataset ds = synth_generate(small_spec(10));

  EmbedderConfig config;
  config.height = 12;
  config.width = 8;
  config.channels = 3;
  config.hidden_sizes = {8};
  config.feature_dim = 4;
  ModelParams model = init_model(config, 1);

  AttackConfig cfg;
  cfg.method = AttackMethod::kIFgsm;
  cfg.epsilon = 5.0f;
  auto examples = attack_gallery(std::span<const ModelParams>(&model, 1),
                                 MetricSpec::euclidean(), ds.probe, ds.gallery, cfg);
  const std::string manifest_path =
      export_adversarial_gallery(examples, (dir.path / "adv").string());

  // every exported pixel within 5 levels of the original
  auto exported = load_image_folder((dir.path / "adv").string(), Naming::kMarketStyle,
                                    Split::kGallery);
  REQUIRE(exported.size() == examples.size());

  std::ifstream manifest(manifest_path);
  int lines = 0;
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty()) {
      ++lines;
      CHECK(line.find("\"source\"") != std::string::npos);
      CHECK(line.find("\"identity\"") != std::string::npos);
      CHECK(line.find("\"camera\"") != std::string::npos);
      CHECK(line.find("\"attack_hash\"") != std::string::npos);
      CHECK(line.find("\"loss_before\"") != std::string::npos);
      CHECK(line.find("\"loss_after\"") != std::string::npos);
      CHECK(line.find("\"file\"") != std::string::npos);
    }
  }
  CHECK(lines == static_cast<int>(examples.size()));
}

TEST_CASE("export catches epsilon violations after quantization") {
  TempDir dir("matk_export_violation");
  Dataset ds = synth_generate(small_spec(11));
  AdversarialExample ex;
  ex.original = ds.gallery.front();
  ex.adversarial = ex.original.pixels;
  ex.adversarial.at(0) = std::min(255.0f, ex.adversarial.at(0) + 9.0f);
  ex.config.epsilon = 5.0f;  // pretend the ball was 5 while the pixel moved 9
  std::vector<AdversarialExample> examples = {ex};
  CHECK_THROWS_WITH_AS(export_adversarial_gallery(examples, (dir.path / "adv").string()),
                       doctest::Contains("post-quantization"), Error);
}

TEST_CASE("exported gallery pixels stay within the epsilon ball") {
  TempDir dir("matk_export_ball");
  Dataset ds = synth_generate(small_spec(12));
  EmbedderConfig config;
  config.height = 12;
  config.width = 8;
  config.channels = 3;
  config.hidden_sizes = {8};
  config.feature_dim = 4;
  ModelParams model = init_model(config, 2);
  AttackConfig cfg;
  cfg.method = AttackMethod::kIFgsm;
  cfg.epsilon = 5.0f;
  auto examples = attack_gallery(std::span<const ModelParams>(&model, 1),
                                 MetricSpec::euclidean(), ds.probe, ds.gallery, cfg);
  export_adversarial_gallery(examples, (dir.path / "adv").string());

  // reload by matching file names recorded in the manifest order
  auto exported = load_image_folder((dir.path / "adv").string(), Naming::kMarketStyle,
                                    Split::kGallery);
  // original gallery written for comparison
  write_dataset_dir(ds, (dir.path / "orig").string());
  auto originals = load_image_folder((dir.path / "orig" / "gallery").string(),
                                     Naming::kMarketStyle, Split::kGallery);
  REQUIRE(exported.size() == originals.size());
  for (size_t i = 0; i < exported.size(); ++i) {
    REQUIRE(exported[i].identity == originals[i].identity);
    for (int64_t p = 0; p < exported[i].pixels.size(); ++p) {
      CHECK(std::abs(exported[i].pixels.at(p) - originals[i].pixels.at(p)) <= 5.0f);
    }
  }
}

}  // TEST_SUITE
