// matk: train small metric embedders, attack the distance metric with
// FGSM-family methods, evaluate retrieval damage, and retrain defended models.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "matk/attacks.hpp"
#include "matk/dataset.hpp"
#include "matk/defense.hpp"
#include "matk/embedder.hpp"
#include "matk/eval.hpp"
#include "matk/metrics.hpp"
#include "matk/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matk;

namespace {

struct MetricChoice {
  std::string spec_text = "euclidean";
  MetricSpec spec = MetricSpec::euclidean();
  double correction = 0.0;
};

MetricChoice parse_metric(const std::string& text) {
  MetricChoice choice;
  choice.spec_text = text;
  if (text == "euclidean") {
    choice.spec = MetricSpec::euclidean();
    return choice;
  }
  const std::string prefix = "mahalanobis:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string path = text.substr(prefix.size());
    Tensor m = load_mahalanobis_matrix(path, &choice.correction);
    if (choice.correction > 1e-6) {
      std::cerr << "note: mahalanobis matrix " << path << " corrected by "
                << choice.correction << " (symmetrize + PSD projection)\n";
    }
    choice.spec = MetricSpec::mahalanobis(m);
    return choice;
  }
  throw Error("unknown metric '" + text + "' (use euclidean or mahalanobis:FILE.json)");
}

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out.good()) throw Error("failed writing " + path);
}

json dataset_summary(const Dataset& ds) {
  return json{{"train", ds.train.size()},
              {"probe", ds.probe.size()},
              {"gallery", ds.gallery.size()},
              {"height", ds.height},
              {"width", ds.width},
              {"channels", ds.channels}};
}

// Identities must be dense [0, num_classes) for the cross-entropy head.
std::vector<ImageRecord> remap_identities(std::span<const ImageRecord> records, int* count) {
  std::map<int, int> remap;
  for (const auto& r : records) remap.emplace(r.identity, 0);
  int next = 0;
  for (auto& [id, idx] : remap) idx = next++;
  std::vector<ImageRecord> out(records.begin(), records.end());
  for (auto& r : out) r.identity = remap.at(r.identity);
  *count = next;
  return out;
}

struct AttackFlags {
  std::string method = "i_fgsm";
  float eps = 5.0f;
  float alpha = 1.0f;
  float mu = 1.0f;
  std::string iters = "auto";
  bool targeted = false;
  int target_id = -1;
  uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--method", method, "attack method: fgsm, i_fgsm or mi_fgsm")
        ->check(CLI::IsMember({"fgsm", "i_fgsm", "mi_fgsm"}));
    cmd->add_option("--eps", eps, "max perturbation, pixel levels (0,255]");
    cmd->add_option("--alpha", alpha, "iterative step size");
    cmd->add_option("--mu", mu, "momentum decay");
    cmd->add_option("--iters", iters, "iteration count or 'auto' = min(eps+4, 1.25*eps)");
    cmd->add_flag("--targeted", targeted, "pull toward a target identity instead of pushing away");
    cmd->add_option("--target-id", target_id,
                    "fixed target identity (default: seeded random other identity)");
    cmd->add_option("--seed", seed, "seed for target selection");
  }

  AttackConfig to_config() const {
    AttackConfig cfg;
    cfg.method = attack_method_from_name(method);
    cfg.epsilon = eps;
    cfg.alpha = alpha;
    cfg.mu = mu;
    if (iters == "auto") {
      cfg.iters = 0;
    } else {
      cfg.iters = std::stoi(iters);
      if (cfg.iters <= 0) throw Error("--iters must be positive or 'auto'");
    }
    cfg.mode = targeted ? AttackMode::kTargeted : AttackMode::kNonTargeted;
    if (target_id >= 0) {
      cfg.target_policy.kind = TargetPolicy::kFixedIdentity;
      cfg.target_policy.identity = target_id;
    }
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

json model_config_json(const EmbedderConfig& c) {
  return json{{"height", c.height},
              {"width", c.width},
              {"channels", c.channels},
              {"hidden_sizes", c.hidden_sizes},
              {"feature_dim", c.feature_dim},
              {"num_classes", c.num_classes},
              {"pixel_scale", c.pixel_scale},
              {"pixel_offset", c.pixel_offset}};
}

std::vector<ModelParams> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw Error("at least one --models checkpoint is required");
  std::vector<ModelParams> models;
  models.reserve(paths.size());
  for (const auto& p : paths) models.push_back(load_checkpoint(p));
  return models;
}

EvalReport evaluate_model(const ModelParams& model, const MetricSpec& metric,
                          std::span<const ImageRecord> probe,
                          std::span<const ImageRecord> gallery, std::span<const int> ks,
                          Protocol protocol) {
  Tensor pf = extract_features(model, probe);
  Tensor gf = extract_features(model, gallery);
  Tensor dist = pairwise_distances(metric, pf, gf);
  return evaluate(dist, identities(probe), identities(gallery), cameras(probe),
                  cameras(gallery), ks, protocol);
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, const SynthSpec& spec) {
  Dataset ds = synth_generate(spec);
  write_dataset_dir(ds, out_dir);
  json config = {{"command", "synth"},
                 {"seed", spec.seed},
                 {"num_train_ids", spec.num_train_ids},
                 {"num_test_ids", spec.num_test_ids},
                 {"images_per_id_per_camera", spec.images_per_id_per_camera},
                 {"num_cameras", spec.num_cameras},
                 {"height", spec.height},
                 {"width", spec.width},
                 {"channels", spec.channels},
                 {"jitter",
                  {{"color_sigma", spec.jitter.color_sigma},
                   {"shift_max", spec.jitter.shift_max},
                   {"noise_sigma", spec.jitter.noise_sigma}}},
                 {"outputs", dataset_summary(ds)}};
  write_text((fs::path(out_dir) / "config.json").string(), config.dump(2) + "\n");
  std::cout << "wrote " << out_dir << ": " << ds.train.size() << " train, " << ds.probe.size()
            << " probe, " << ds.gallery.size() << " gallery\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_path, const std::string& loss,
              std::vector<int> hidden, int feature_dim, TrainHyper hyper, uint64_t init_seed) {
  Dataset ds = load_dataset_dir(data_dir);

  int num_classes = 0;
  std::vector<ImageRecord> train = remap_identities(ds.train, &num_classes);

  EmbedderConfig config;
  config.height = ds.height;
  config.width = ds.width;
  config.channels = ds.channels;
  config.hidden_sizes = std::move(hidden);
  config.feature_dim = feature_dim;
  config.num_classes = loss == "ce" ? num_classes : 0;

  ModelParams model = init_model(config, init_seed);
  TrainResult result = loss == "ce" ? train_cross_entropy(model, train, hyper)
                                    : train_triplet(model, train, hyper);

  if (!fs::path(out_path).parent_path().empty())
    fs::create_directories(fs::path(out_path).parent_path());
  save_checkpoint(result.model, out_path);

  json config_json = {{"command", "train"},
                      {"data", data_dir},
                      {"loss", loss},
                      {"model", model_config_json(config)},
                      {"hyper",
                       {{"learning_rate", hyper.learning_rate},
                        {"epochs", hyper.epochs},
                        {"batch_size", hyper.batch_size},
                        {"margin", hyper.margin},
                        {"pk_p", hyper.pk_p},
                        {"pk_k", hyper.pk_k},
                        {"seed", hyper.seed}}},
                      {"init_seed", init_seed},
                      {"num_train_images", train.size()}};
  write_text(out_path + ".config.json", config_json.dump(2) + "\n");
  json loss_log = {{"epoch_loss", result.epoch_loss}};
  write_text(out_path + ".loss.json", loss_log.dump(2) + "\n");

  std::cout << "trained " << out_path;
  if (!result.epoch_loss.empty()) {
    std::cout << " (loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back()
              << ")";
  }
  std::cout << "\n";
  return 0;
}

int cmd_attack(const std::string& data_dir, const std::vector<std::string>& model_paths,
               const std::string& out_dir, const AttackFlags& flags,
               const std::string& metric_text) {
  Dataset ds = load_dataset_dir(data_dir);
  std::vector<ModelParams> models = load_models(model_paths);
  MetricChoice metric = parse_metric(metric_text);
  AttackConfig cfg = flags.to_config();

  auto examples = attack_gallery(std::span<const ModelParams>(models), metric.spec, ds.probe,
                                 ds.gallery, cfg);
  const std::string manifest = export_adversarial_gallery(examples, out_dir);

  int attacked = 0;
  for (const auto& ex : examples) attacked += ex.attacked ? 1 : 0;

  json config = {{"command", "attack"},
                 {"data", data_dir},
                 {"models", model_paths},
                 {"metric", metric.spec_text},
                 {"attack", json::parse(attack_config_to_json(cfg))},
                 {"attacked", attacked},
                 {"passed_through", examples.size() - attacked}};
  write_text((fs::path(out_dir) / "config.json").string(), config.dump(2) + "\n");
  std::cout << "attacked " << attacked << "/" << examples.size() << " gallery images -> "
            << out_dir << " (manifest " << manifest << ")\n";
  return 0;
}

int cmd_defend(const std::string& data_dir, const std::string& model_path,
               const std::string& out_model, const std::string& out_adv_dir,
               const AttackFlags& flags, const std::string& metric_text, TrainHyper hyper) {
  Dataset ds = load_dataset_dir(data_dir);
  MetricChoice metric = parse_metric(metric_text);

  DefensePlan plan;
  plan.clean_model = load_checkpoint(model_path);
  plan.attack_cfg = flags.to_config();
  plan.metric = metric.spec;
  plan.retrain_hyper = hyper;

  int num_classes = 0;
  std::vector<ImageRecord> train = remap_identities(ds.train, &num_classes);
  if (plan.clean_model.config.num_classes > 0 &&
      plan.clean_model.config.num_classes != num_classes) {
    throw Error("clean model expects " + std::to_string(plan.clean_model.config.num_classes) +
                " identities, dataset has " + std::to_string(num_classes));
  }

  auto adv_examples = attack_training_set(plan.clean_model, train, plan.attack_cfg, plan.metric);
  export_adversarial_gallery(adv_examples, out_adv_dir);
  auto adv_records = to_image_records(adv_examples);

  TrainResult defended = train_metric_preserving(plan, train, adv_records);
  if (!fs::path(out_model).parent_path().empty())
    fs::create_directories(fs::path(out_model).parent_path());
  save_checkpoint(defended.model, out_model);

  json config = {{"command", "defend"},
                 {"data", data_dir},
                 {"clean_model", model_path},
                 {"metric", metric.spec_text},
                 {"attack", json::parse(attack_config_to_json(plan.attack_cfg))},
                 {"retrain",
                  {{"learning_rate", hyper.learning_rate},
                   {"epochs", hyper.epochs},
                   {"batch_size", hyper.batch_size},
                   {"margin", hyper.margin},
                   {"pk_p", hyper.pk_p},
                   {"pk_k", hyper.pk_k},
                   {"seed", hyper.seed}}},
                 {"adv_training_set", out_adv_dir},
                 {"merged_size", 2 * train.size()}};
  write_text(out_model + ".config.json", config.dump(2) + "\n");
  std::cout << "defended model -> " << out_model << " (adversarial training set in "
            << out_adv_dir << ")\n";
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& model_path,
             const std::string& gallery_dir, const std::string& metric_text,
             const std::string& protocol_text, std::vector<int> ks, const std::string& out_path,
             const std::string& baseline_path, int ranking_probe, int ranking_top_k,
             const std::string& ranking_out) {
  Dataset ds = load_dataset_dir(data_dir);
  std::vector<ImageRecord> gallery = ds.gallery;
  if (!gallery_dir.empty()) {
    gallery = load_image_folder(gallery_dir, Naming::kMarketStyle, Split::kGallery);
  }
  ModelParams model = load_checkpoint(model_path);
  MetricChoice metric = parse_metric(metric_text);
  Protocol protocol = protocol_from_name(protocol_text);

  Tensor pf = extract_features(model, ds.probe);
  Tensor gf = extract_features(model, gallery);
  Tensor dist = pairwise_distances(metric.spec, pf, gf);
  EvalReport report = evaluate(dist, identities(ds.probe), identities(gallery),
                               cameras(ds.probe), cameras(gallery), ks, protocol);

  const std::string report_json = eval_report_to_json(report);
  if (!out_path.empty()) {
    write_text(out_path, report_json + "\n");
    json config = {{"command", "eval"},      {"data", data_dir},
                   {"model", model_path},    {"gallery", gallery_dir},
                   {"metric", metric.spec_text}, {"protocol", protocol_text},
                   {"ks", ks}};
    write_text(out_path + ".config.json", config.dump(2) + "\n");
  }
  std::cout << report_json << "\n";

  if (!baseline_path.empty()) {
    std::ifstream in(baseline_path);
    if (!in) throw Error("cannot open baseline report: " + baseline_path);
    json base = json::parse(in);
    EvalReport clean;
    clean.mAP = base.at("mAP").get<double>();
    std::cout << "mAP_ratio " << map_ratio(report, clean) << "\n";
  }

  if (ranking_probe >= 0) {
    if (ranking_top_k > static_cast<int>(gallery.size()))
      throw Error("--ranking-top-k exceeds gallery size");
    RankingList list = ranking_list(ranking_probe,
                                    ds.probe[static_cast<size_t>(ranking_probe)].identity, dist,
                                    identities(gallery), ranking_top_k);
    write_text(ranking_out + ".json", ranking_list_to_json(list) + "\n");
    PngImage strip =
        ranking_strip(ds.probe[static_cast<size_t>(ranking_probe)], gallery, list);
    write_png(ranking_out + ".png", strip);
    std::cout << "ranking list -> " << ranking_out << ".json / .png\n";
  }
  return 0;
}

int cmd_bench(const std::string& data_dir, const std::vector<std::string>& model_paths,
              const std::string& out_path, const AttackFlags& flags,
              const std::string& metric_text, const std::string& protocol_text,
              std::vector<int> ks) {
  Dataset ds = load_dataset_dir(data_dir);
  std::vector<ModelParams> models = load_models(model_paths);
  MetricChoice metric = parse_metric(metric_text);
  Protocol protocol = protocol_from_name(protocol_text);
  AttackConfig cfg = flags.to_config();

  json table;
  table["command"] = "bench";
  table["metric"] = metric.spec_text;
  table["attack"] = json::parse(attack_config_to_json(cfg));
  table["clean"] = json::object();
  for (size_t i = 0; i < models.size(); ++i) {
    EvalReport clean = evaluate_model(models[i], metric.spec, ds.probe, ds.gallery, ks, protocol);
    table["clean"][model_paths[i]] = json::parse(eval_report_to_json(clean));
  }

  table["attacks"] = json::array();
  for (size_t a = 0; a < models.size(); ++a) {
    auto examples = attack_gallery(std::span<const ModelParams>(&models[a], 1), metric.spec,
                                   ds.probe, ds.gallery, cfg);
    std::vector<ImageRecord> adv_gallery = to_image_records(examples);
    json row;
    row["attacker"] = model_paths[a];
    row["evaluations"] = json::object();
    for (size_t b = 0; b < models.size(); ++b) {
      EvalReport rep =
          evaluate_model(models[b], metric.spec, ds.probe, adv_gallery, ks, protocol);
      row["evaluations"][model_paths[b]] = json::parse(eval_report_to_json(rep));
    }
    table["attacks"].push_back(std::move(row));
  }

  write_text(out_path, table.dump(2) + "\n");
  std::cout << "bench table -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial metric attack toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: machine parallelism)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic identity dataset");
  std::string synth_out;
  SynthSpec spec;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", spec.seed, "generation seed");
  synth->add_option("--train-ids", spec.num_train_ids, "training identities");
  synth->add_option("--test-ids", spec.num_test_ids, "test identities");
  synth->add_option("--images-per-id-per-camera", spec.images_per_id_per_camera,
                    "images per identity per camera");
  synth->add_option("--cameras", spec.num_cameras, "camera count (>= 2)");
  synth->add_option("--height", spec.height, "image height");
  synth->add_option("--width", spec.width, "image width");
  synth->add_option("--channels", spec.channels, "1 or 3");
  synth->add_option("--color-sigma", spec.jitter.color_sigma, "per-image color jitter sigma");
  synth->add_option("--shift-max", spec.jitter.shift_max, "max spatial shift, pixels");
  synth->add_option("--noise-sigma", spec.jitter.noise_sigma, "per-pixel noise sigma");

  // train
  auto* train = app.add_subcommand("train", "train an embedder checkpoint");
  std::string train_data, train_out, train_loss = "ce", hidden_text = "256,128";
  int feature_dim = 64;
  TrainHyper hyper;
  uint64_t init_seed = 0;
  train->add_option("--data", train_data, "dataset directory (from synth)")->required();
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--loss", train_loss, "training loss")->check(CLI::IsMember({"ce", "triplet"}));
  train->add_option("--hidden", hidden_text, "comma-separated hidden layer sizes");
  train->add_option("--feature-dim", feature_dim, "embedding dimension");
  train->add_option("--epochs", hyper.epochs, "training epochs");
  train->add_option("--lr", hyper.learning_rate, "learning rate");
  train->add_option("--batch-size", hyper.batch_size, "mini-batch size (P*K for triplet)");
  train->add_option("--margin", hyper.margin, "triplet margin");
  train->add_option("--pk-p", hyper.pk_p, "identities per triplet batch");
  train->add_option("--pk-k", hyper.pk_k, "images per identity per triplet batch");
  train->add_option("--seed", hyper.seed, "shuffling seed");
  train->add_option("--init-seed", init_seed, "weight init seed");

  // attack
  auto* attack = app.add_subcommand("attack", "generate an adversarial gallery");
  std::string attack_data, attack_out, attack_metric = "euclidean";
  std::vector<std::string> attack_models;
  AttackFlags attack_flags;
  attack->add_option("--data", attack_data, "dataset directory")->required();
  attack->add_option("--models", attack_models, "checkpoints; several = ensemble loss averaging")
      ->required()
      ->delimiter(',');
  attack->add_option("--out", attack_out, "output adversarial gallery directory")->required();
  attack->add_option("--metric", attack_metric, "euclidean or mahalanobis:FILE.json");
  attack_flags.add_to(attack);

  // defend
  auto* defend = app.add_subcommand("defend", "retrain a metric-preserving model");
  std::string defend_data, defend_model, defend_out_model, defend_adv_dir,
      defend_metric = "euclidean";
  AttackFlags defend_flags;
  TrainHyper defend_hyper;
  defend->add_option("--data", defend_data, "dataset directory")->required();
  defend->add_option("--model", defend_model, "clean checkpoint to defend")->required();
  defend->add_option("--out-model", defend_out_model, "defended checkpoint path")->required();
  defend->add_option("--out-adv-dir", defend_adv_dir, "directory for the adversarial training set")
      ->required();
  defend->add_option("--metric", defend_metric, "attack metric");
  defend_flags.add_to(defend);
  defend->add_option("--epochs", defend_hyper.epochs, "retrain epochs");
  defend->add_option("--lr", defend_hyper.learning_rate, "retrain learning rate");
  defend->add_option("--batch-size", defend_hyper.batch_size, "retrain batch size");
  defend->add_option("--margin", defend_hyper.margin, "triplet margin");
  defend->add_option("--pk-p", defend_hyper.pk_p, "identities per triplet batch");
  defend->add_option("--pk-k", defend_hyper.pk_k, "images per identity per triplet batch");
  defend->add_option("--retrain-seed", defend_hyper.seed, "fresh init + shuffling seed");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate mAP / CMC for a checkpoint");
  std::string eval_data, eval_model, eval_gallery, eval_metric = "euclidean",
              eval_protocol = "cross_camera", eval_out, eval_baseline, ranking_out = "ranking";
  std::vector<int> eval_ks = {1, 5, 10};
  int ranking_probe = -1, ranking_top_k = 10;
  eval_cmd->add_option("--data", eval_data, "dataset directory (probe set source)")->required();
  eval_cmd->add_option("--model", eval_model, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--gallery", eval_gallery,
                       "gallery directory override (e.g. an adversarial export)");
  eval_cmd->add_option("--metric", eval_metric, "evaluation metric");
  eval_cmd->add_option("--protocol", eval_protocol, "cross_camera or all")
      ->check(CLI::IsMember({"cross_camera", "all"}));
  eval_cmd->add_option("--ks", eval_ks, "CMC ranks")->delimiter(',');
  eval_cmd->add_option("--out", eval_out, "write the report JSON here");
  eval_cmd->add_option("--baseline", eval_baseline, "clean report JSON; prints the mAP ratio");
  eval_cmd->add_option("--ranking-probe", ranking_probe, "probe index for a ranking-list export");
  eval_cmd->add_option("--ranking-top-k", ranking_top_k, "ranking list length");
  eval_cmd->add_option("--ranking-out", ranking_out, "ranking list output prefix");

  // bench
  auto* bench = app.add_subcommand("bench", "white/black-box matrix over checkpoints");
  std::string bench_data, bench_out, bench_metric = "euclidean", bench_protocol = "cross_camera";
  std::vector<std::string> bench_models;
  std::vector<int> bench_ks = {1, 5, 10};
  AttackFlags bench_flags;
  bench->add_option("--data", bench_data, "dataset directory")->required();
  bench->add_option("--models", bench_models, "checkpoints to cross-attack")
      ->required()
      ->delimiter(',');
  bench->add_option("--out", bench_out, "output JSON table")->required();
  bench->add_option("--metric", bench_metric, "metric for attack and evaluation");
  bench->add_option("--protocol", bench_protocol, "cross_camera or all");
  bench->add_option("--ks", bench_ks, "CMC ranks")->delimiter(',');
  bench_flags.add_to(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help goes to stdout, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  set_max_threads(threads);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, spec);
    if (train->parsed()) {
      std::vector<int> hidden;
      for (const auto& part : CLI::detail::split(hidden_text, ','))
        hidden.push_back(std::stoi(part));
      if (train_loss == "triplet") hyper.batch_size = hyper.pk_p * hyper.pk_k;
      return cmd_train(train_data, train_out, train_loss, hidden, feature_dim, hyper, init_seed);
    }
    if (attack->parsed())
      return cmd_attack(attack_data, attack_models, attack_out, attack_flags, attack_metric);
    if (defend->parsed())
      return cmd_defend(defend_data, defend_model, defend_out_model, defend_adv_dir,
                        defend_flags, defend_metric, defend_hyper);
    if (eval_cmd->parsed())
      return cmd_eval(eval_data, eval_model, eval_gallery, eval_metric, eval_protocol, eval_ks,
                      eval_out, eval_baseline, ranking_probe, ranking_top_k, ranking_out);
    if (bench->parsed())
      return cmd_bench(bench_data, bench_models, bench_out, bench_flags, bench_metric,
                       bench_protocol, bench_ks);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
