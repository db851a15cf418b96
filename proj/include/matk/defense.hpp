#ifndef MATK_DEFENSE_HPP_
#define MATK_DEFENSE_HPP_

#include <span>
#include <vector>

#include "matk/attacks.hpp"
#include "matk/embedder.hpp"
#include "matk/metrics.hpp"

namespace matk {

// Metric-preserving retraining: attack the training set against the clean
// model, merge originals with their adversarial versions, and train a fresh
// model of the same architecture on the union.
struct DefensePlan {
  ModelParams clean_model;
  AttackConfig attack_cfg;  // mode must be non-targeted
  MetricSpec metric = MetricSpec::euclidean();
  TrainHyper retrain_hyper;
};

// Attacks every training image using its other same-identity images as
// references. Identities with a single image cannot be attacked and raise an
// error naming the identity.
std::vector<AdversarialExample> attack_training_set(const ModelParams& model,
                                                    std::span<const ImageRecord> train_set,
                                                    const AttackConfig& attack_cfg,
                                                    const MetricSpec& metric);

// Same, returning records that carry their source labels.
std::vector<ImageRecord> generate_adv_training_set(const ModelParams& model,
                                                   std::span<const ImageRecord> train_set,
                                                   const AttackConfig& attack_cfg,
                                                   const MetricSpec& metric);

std::vector<ImageRecord> to_image_records(std::span<const AdversarialExample> examples);

// Trains the defended model on train_set plus a precomputed adversarial set.
TrainResult train_metric_preserving(const DefensePlan& plan,
                                    std::span<const ImageRecord> train_set,
                                    std::span<const ImageRecord> adv_set);

// Generates the adversarial set internally, then retrains.
TrainResult train_metric_preserving(const DefensePlan& plan,
                                    std::span<const ImageRecord> train_set);

}  // namespace matk

#endif  // MATK_DEFENSE_HPP_
