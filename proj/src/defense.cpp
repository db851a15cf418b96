#include "matk/defense.hpp"

#include <map>

#include "matk/util.hpp"

namespace matk {

std::vector<AdversarialExample> attack_training_set(const ModelParams& model,
                                                    std::span<const ImageRecord> train_set,
                                                    const AttackConfig& attack_cfg,
                                                    const MetricSpec& metric) {
  attack_cfg.validate();
  if (attack_cfg.mode != AttackMode::kNonTargeted)
    throw Error("defense generation requires a non-targeted attack config");
  if (train_set.empty()) throw Error("empty training set");

  std::map<int, std::vector<int>> by_identity;
  for (size_t i = 0; i < train_set.size(); ++i)
    by_identity[train_set[i].identity].push_back(static_cast<int>(i));
  for (const auto& [id, members] : by_identity) {
    if (members.size() < 2) {
      throw Error("identity " + std::to_string(id) +
                  " has a single image; it cannot reference itself for the attack");
    }
  }

  EmbedderFeatures adapter(model);
  const FeatureModel* model_ptr = &adapter;
  std::span<const FeatureModel* const> models(&model_ptr, 1);

  std::vector<AdversarialExample> out(train_set.size());
  parallel_for(static_cast<int64_t>(train_set.size()), [&](int64_t i) {
    const ImageRecord& image = train_set[static_cast<size_t>(i)];
    std::vector<ImageRecord> refs;
    std::vector<int> ref_ids;
    for (int j : by_identity.at(image.identity)) {
      if (j == static_cast<int>(i)) continue;  // an image cannot reference itself
      refs.push_back(train_set[static_cast<size_t>(j)]);
      ref_ids.push_back(j);
    }
    out[static_cast<size_t>(i)] = attack_image(models, metric, refs, image, attack_cfg, ref_ids);
  });
  return out;
}

std::vector<ImageRecord> to_image_records(std::span<const AdversarialExample> examples) {
  std::vector<ImageRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) {
    ImageRecord rec;
    rec.pixels = ex.adversarial;
    rec.identity = ex.original.identity;
    rec.camera = ex.original.camera;
    rec.split = ex.original.split;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ImageRecord> generate_adv_training_set(const ModelParams& model,
                                                   std::span<const ImageRecord> train_set,
                                                   const AttackConfig& attack_cfg,
                                                   const MetricSpec& metric) {
  return to_image_records(attack_training_set(model, train_set, attack_cfg, metric));
}

TrainResult train_metric_preserving(const DefensePlan& plan,
                                    std::span<const ImageRecord> train_set,
                                    std::span<const ImageRecord> adv_set) {
  if (adv_set.size() != train_set.size())
    throw Error("adversarial set size " + std::to_string(adv_set.size()) +
                " does not match training set size " + std::to_string(train_set.size()));
  std::vector<ImageRecord> merged;
  merged.reserve(train_set.size() * 2);
  merged.insert(merged.end(), train_set.begin(), train_set.end());
  merged.insert(merged.end(), adv_set.begin(), adv_set.end());

  ModelParams fresh = init_model(plan.clean_model.config, plan.retrain_hyper.seed);
  fresh.training_loss_tag = plan.clean_model.training_loss_tag;
  if (plan.clean_model.training_loss_tag == TrainLoss::kTriplet)
    return train_triplet(fresh, merged, plan.retrain_hyper);
  return train_cross_entropy(fresh, merged, plan.retrain_hyper);
}

TrainResult train_metric_preserving(const DefensePlan& plan,
                                    std::span<const ImageRecord> train_set) {
  const std::vector<ImageRecord> adv =
      generate_adv_training_set(plan.clean_model, train_set, plan.attack_cfg, plan.metric);
  return train_metric_preserving(plan, train_set, adv);
}

}  // namespace matk
