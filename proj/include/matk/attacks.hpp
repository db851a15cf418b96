#ifndef MATK_ATTACKS_HPP_
#define MATK_ATTACKS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matk/dataset.hpp"
#include "matk/embedder.hpp"
#include "matk/metrics.hpp"

namespace matk {

enum class AttackMethod { kFgsm, kIFgsm, kMiFgsm };
enum class AttackMode { kNonTargeted, kTargeted };

const char* attack_method_name(AttackMethod m);
AttackMethod attack_method_from_name(const std::string& name);

struct TargetPolicy {
  enum Kind { kRandomOther, kFixedIdentity };
  Kind kind = kRandomOther;
  int identity = -1;  // kFixedIdentity only
};

// n = floor(min(eps + 4, 1.25 * eps)), at least 1.
int default_iters(float epsilon);

struct AttackConfig {
  AttackMethod method = AttackMethod::kIFgsm;
  float epsilon = 5.0f;  // pixel levels, (0, 255]
  float alpha = 1.0f;    // iterative step size
  float mu = 1.0f;       // momentum decay
  int iters = 0;         // 0 = auto via default_iters
  AttackMode mode = AttackMode::kNonTargeted;
  TargetPolicy target_policy;
  uint64_t seed = 0;

  int resolved_iters() const;
  void validate() const;
};

std::string attack_config_to_json(const AttackConfig& config);
std::string attack_config_hash(const AttackConfig& config);  // hex digest

struct AdversarialExample {
  ImageRecord original;
  Tensor adversarial;  // same shape as original.pixels, floats in [0, 255]
  AttackConfig config;
  std::vector<int> reference_probe_ids;
  std::vector<float> loss_trajectory;  // iterative methods; includes endpoints
  float loss_before = 0.0f;
  float loss_after = 0.0f;
  bool attacked = true;       // false: passed through unmodified (flagged)
  int target_identity = -1;   // targeted mode only
};

// Elementwise clamp to [max(0, orig - eps), min(255, orig + eps)].
Tensor clip_eps(const Tensor& x_adv, const Tensor& x_orig, float epsilon);

// Single-image attacks. `probe_refs` are the reference probe images for this
// gallery image: same-identity probes for non-targeted attacks, probes of the
// target identity for targeted attacks. `ref_ids` (optional) records the
// probe indices for bookkeeping.
AdversarialExample fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                        std::span<const ImageRecord> probe_refs, const ImageRecord& gallery_image,
                        const AttackConfig& config, std::span<const int> ref_ids = {});
AdversarialExample i_fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                          std::span<const ImageRecord> probe_refs,
                          const ImageRecord& gallery_image, const AttackConfig& config,
                          std::span<const int> ref_ids = {});
AdversarialExample mi_fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                           std::span<const ImageRecord> probe_refs,
                           const ImageRecord& gallery_image, const AttackConfig& config,
                           std::span<const int> ref_ids = {});

// Dispatches on config.method.
AdversarialExample attack_image(std::span<const FeatureModel* const> models,
                                const MetricSpec& metric,
                                std::span<const ImageRecord> probe_refs,
                                const ImageRecord& gallery_image, const AttackConfig& config,
                                std::span<const int> ref_ids = {});

// Attacks a whole gallery. Non-targeted: every gallery image uses the probes
// sharing its identity as references; images whose identity has no probes are
// passed through and flagged. Targeted: references come from the
// policy-selected target identity (never the image's own). Deterministic
// given config.seed; images are processed independently (parallelizable).
std::vector<AdversarialExample> attack_gallery(std::span<const FeatureModel* const> models,
                                               const MetricSpec& metric,
                                               std::span<const ImageRecord> probe_set,
                                               std::span<const ImageRecord> gallery_set,
                                               const AttackConfig& config);

// Convenience overload wrapping ModelParams checkpoints.
std::vector<AdversarialExample> attack_gallery(std::span<const ModelParams> models,
                                               const MetricSpec& metric,
                                               std::span<const ImageRecord> probe_set,
                                               std::span<const ImageRecord> gallery_set,
                                               const AttackConfig& config);

}  // namespace matk

#endif  // MATK_ATTACKS_HPP_
