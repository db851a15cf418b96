#include "matk/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "matk/util.hpp"

using nlohmann::json;

namespace matk {

const char* attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::kFgsm: return "fgsm";
    case AttackMethod::kIFgsm: return "i_fgsm";
    case AttackMethod::kMiFgsm: return "mi_fgsm";
  }
  return "?";
}

AttackMethod attack_method_from_name(const std::string& name) {
  if (name == "fgsm") return AttackMethod::kFgsm;
  if (name == "i_fgsm") return AttackMethod::kIFgsm;
  if (name == "mi_fgsm") return AttackMethod::kMiFgsm;
  throw Error("unknown attack method '" + name + "'");
}

int default_iters(float epsilon) {
  if (epsilon <= 0.0f) throw Error("default_iters requires epsilon > 0");
  const double n = std::floor(std::min(epsilon + 4.0, 1.25 * epsilon));
  return n < 1.0 ? 1 : static_cast<int>(n);
}

int AttackConfig::resolved_iters() const {
  if (method == AttackMethod::kFgsm) return 1;
  return iters > 0 ? iters : default_iters(epsilon);
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0f) || epsilon > 255.0f)
    throw Error("attack epsilon must be in (0, 255], got " + std::to_string(epsilon));
  if (!(alpha > 0.0f)) throw Error("attack alpha must be > 0");
  if (alpha > epsilon) throw Error("attack alpha must be <= epsilon");
  if (mu < 0.0f) throw Error("attack mu must be >= 0");
  if (iters < 0) throw Error("attack iters must be positive or 0 (auto)");
  if (mode == AttackMode::kTargeted && target_policy.kind == TargetPolicy::kFixedIdentity &&
      target_policy.identity < 0)
    throw Error("fixed-identity target policy requires a non-negative identity");
}

std::string attack_config_to_json(const AttackConfig& config) {
  json j = {{"method", attack_method_name(config.method)},
            {"epsilon", config.epsilon},
            {"alpha", config.alpha},
            {"mu", config.mu},
            {"iters", config.resolved_iters()},
            {"mode", config.mode == AttackMode::kNonTargeted ? "non_targeted" : "targeted"},
            {"target_policy",
             {{"kind", config.target_policy.kind == TargetPolicy::kRandomOther
                           ? "random_other"
                           : "fixed_identity"},
              {"identity", config.target_policy.identity}}},
            {"seed", config.seed}};
  return j.dump();
}

std::string attack_config_hash(const AttackConfig& config) {
  std::ostringstream os;
  os << std::hex << fnv1a64(attack_config_to_json(config));
  return os.str();
}

namespace {

// Clamp in double, then keep the float rounding inside the ball: when the
// ball is narrower than one float ulp the nearest representable value can
// land just outside it.
float clip_pixel(double v, float orig, float epsilon) {
  const double lo = std::max(0.0, static_cast<double>(orig) - epsilon);
  const double hi = std::min(255.0, static_cast<double>(orig) + epsilon);
  v = std::min(hi, std::max(lo, v));
  float c = static_cast<float>(v);
  if (static_cast<double>(c) > hi) {
    c = std::nextafterf(c, -std::numeric_limits<float>::infinity());
  } else if (static_cast<double>(c) < lo) {
    c = std::nextafterf(c, std::numeric_limits<float>::infinity());
  }
  return c;
}

}  // namespace

Tensor clip_eps(const Tensor& x_adv, const Tensor& x_orig, float epsilon) {
  if (!x_adv.same_shape(x_orig))
    throw Error("clip_eps shape mismatch: " + x_adv.shape_str() + " vs " + x_orig.shape_str());
  Tensor out = x_adv;
  for (int64_t i = 0; i < out.size(); ++i) {
    out.at(i) = clip_pixel(out.at(i), x_orig.at(i), epsilon);
  }
  return out;
}

namespace {

AdversarialExample run_attack(std::span<const FeatureModel* const> models,
                              const MetricSpec& metric,
                              std::span<const ImageRecord> probe_refs,
                              std::span<const int> ref_ids, const ImageRecord& gallery_image,
                              const AttackConfig& config) {
  config.validate();
  PreparedAttackLoss loss_fn(models, metric, probe_refs);

  AdversarialExample ex;
  ex.original = gallery_image;
  ex.config = config;
  if (ref_ids.empty()) {
    for (size_t i = 0; i < probe_refs.size(); ++i) ex.reference_probe_ids.push_back(static_cast<int>(i));
  } else {
    ex.reference_probe_ids.assign(ref_ids.begin(), ref_ids.end());
  }

  const Tensor& x0 = gallery_image.pixels;
  const int64_t d = x0.size();
  const double direction = config.mode == AttackMode::kNonTargeted ? 1.0 : -1.0;
  const int iters = config.resolved_iters();
  const float step = config.method == AttackMethod::kFgsm ? config.epsilon : config.alpha;
  const bool momentum = config.method == AttackMethod::kMiFgsm;

  Tensor x = x0;
  std::vector<double> g_acc(static_cast<size_t>(d), 0.0);
  for (int n = 0; n < iters; ++n) {
    const AttackLoss lg = loss_fn.eval(x);
    if (n == 0) ex.loss_before = lg.loss;
    ex.loss_trajectory.push_back(lg.loss);

    for (int64_t i = 0; i < d; ++i) {
      float s;
      if (momentum) {
        // g / ||g||_1 accumulated in double; a vanishing gradient contributes 0
        if (i == 0) {
          double l1 = 0.0;
          for (int64_t k = 0; k < d; ++k) l1 += std::abs(static_cast<double>(lg.gradient.at(k)));
          if (l1 >= 1e-12) {
            for (int64_t k = 0; k < d; ++k)
              g_acc[static_cast<size_t>(k)] =
                  config.mu * g_acc[static_cast<size_t>(k)] + lg.gradient.at(k) / l1;
          } else {
            for (int64_t k = 0; k < d; ++k) g_acc[static_cast<size_t>(k)] *= config.mu;
          }
        }
        const double g = g_acc[static_cast<size_t>(i)];
        s = g > 0.0 ? 1.0f : (g < 0.0 ? -1.0f : 0.0f);
      } else {
        const float g = lg.gradient.at(i);
        s = g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f);
      }
      const double v = static_cast<double>(x.at(i)) + direction * static_cast<double>(step) * s;
      x.at(i) = clip_pixel(v, x0.at(i), config.epsilon);
    }
  }
  ex.loss_after = loss_fn.eval_loss_only(x);
  ex.loss_trajectory.push_back(ex.loss_after);
  ex.adversarial = std::move(x);

  for (int64_t i = 0; i < d; ++i) {
    const float delta = std::abs(ex.adversarial.at(i) - x0.at(i));
    if (delta > config.epsilon + 1e-6f || ex.adversarial.at(i) < 0.0f ||
        ex.adversarial.at(i) > 255.0f) {
      throw Error("internal: adversarial pixel " + std::to_string(i) +
                  " violates the epsilon ball");
    }
  }
  return ex;
}

}  // namespace

AdversarialExample fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                        std::span<const ImageRecord> probe_refs,
                        const ImageRecord& gallery_image, const AttackConfig& config,
                        std::span<const int> ref_ids) {
  if (config.method != AttackMethod::kFgsm) throw Error("fgsm called with mismatched method");
  return run_attack(models, metric, probe_refs, ref_ids, gallery_image, config);
}

AdversarialExample i_fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                          std::span<const ImageRecord> probe_refs,
                          const ImageRecord& gallery_image, const AttackConfig& config,
                          std::span<const int> ref_ids) {
  if (config.method != AttackMethod::kIFgsm) throw Error("i_fgsm called with mismatched method");
  return run_attack(models, metric, probe_refs, ref_ids, gallery_image, config);
}

AdversarialExample mi_fgsm(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                           std::span<const ImageRecord> probe_refs,
                           const ImageRecord& gallery_image, const AttackConfig& config,
                           std::span<const int> ref_ids) {
  if (config.method != AttackMethod::kMiFgsm)
    throw Error("mi_fgsm called with mismatched method");
  return run_attack(models, metric, probe_refs, ref_ids, gallery_image, config);
}

AdversarialExample attack_image(std::span<const FeatureModel* const> models,
                                const MetricSpec& metric,
                                std::span<const ImageRecord> probe_refs,
                                const ImageRecord& gallery_image, const AttackConfig& config,
                                std::span<const int> ref_ids) {
  return run_attack(models, metric, probe_refs, ref_ids, gallery_image, config);
}

std::vector<AdversarialExample> attack_gallery(std::span<const FeatureModel* const> models,
                                               const MetricSpec& metric,
                                               std::span<const ImageRecord> probe_set,
                                               std::span<const ImageRecord> gallery_set,
                                               const AttackConfig& config) {
  config.validate();
  if (probe_set.empty()) throw Error("attack_gallery requires a non-empty probe set");

  std::map<int, std::vector<int>> probes_by_identity;
  for (size_t i = 0; i < probe_set.size(); ++i)
    probes_by_identity[probe_set[i].identity].push_back(static_cast<int>(i));

  std::vector<int> probe_identities;
  for (const auto& [id, _] : probes_by_identity) probe_identities.push_back(id);

  if (config.mode == AttackMode::kTargeted && probe_identities.size() < 2)
    throw Error("targeted attack requires at least two identities in the probe set");
  if (config.mode == AttackMode::kTargeted &&
      config.target_policy.kind == TargetPolicy::kFixedIdentity &&
      !probes_by_identity.count(config.target_policy.identity))
    throw Error("no probe of required identity " +
                std::to_string(config.target_policy.identity));

  std::vector<AdversarialExample> out(gallery_set.size());
  parallel_for(static_cast<int64_t>(gallery_set.size()), [&](int64_t gi) {
    const ImageRecord& gallery_image = gallery_set[static_cast<size_t>(gi)];

    auto pass_through = [&]() {
      AdversarialExample ex;
      ex.original = gallery_image;
      ex.adversarial = gallery_image.pixels;
      ex.config = config;
      ex.attacked = false;
      out[static_cast<size_t>(gi)] = std::move(ex);
    };

    int target = -1;
    const std::vector<int>* ref_indices = nullptr;
    if (config.mode == AttackMode::kNonTargeted) {
      auto it = probes_by_identity.find(gallery_image.identity);
      if (it == probes_by_identity.end()) {
        pass_through();  // identity absent from the probe set: flag and skip
        return;
      }
      ref_indices = &it->second;
    } else {
      if (config.target_policy.kind == TargetPolicy::kFixedIdentity) {
        target = config.target_policy.identity;
        if (target == gallery_image.identity) {
          pass_through();  // cannot target its own identity
          return;
        }
      } else {
        std::vector<int> candidates;
        for (int id : probe_identities)
          if (id != gallery_image.identity) candidates.push_back(id);
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<uint64_t>(gi)));
        std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
        target = candidates[pick(rng)];
      }
      ref_indices = &probes_by_identity.at(target);
    }

    std::vector<ImageRecord> refs;
    refs.reserve(ref_indices->size());
    for (int idx : *ref_indices) refs.push_back(probe_set[static_cast<size_t>(idx)]);

    AdversarialExample ex =
        run_attack(models, metric, refs, *ref_indices, gallery_image, config);
    ex.target_identity = target;
    out[static_cast<size_t>(gi)] = std::move(ex);
  });
  return out;
}

std::vector<AdversarialExample> attack_gallery(std::span<const ModelParams> models,
                                               const MetricSpec& metric,
                                               std::span<const ImageRecord> probe_set,
                                               std::span<const ImageRecord> gallery_set,
                                               const AttackConfig& config) {
  std::vector<EmbedderFeatures> adapters;
  adapters.reserve(models.size());
  for (const ModelParams& m : models) adapters.emplace_back(m);
  std::vector<const FeatureModel*> ptrs;
  ptrs.reserve(adapters.size());
  for (const auto& a : adapters) ptrs.push_back(&a);
  return attack_gallery(std::span<const FeatureModel* const>(ptrs), metric, probe_set,
                        gallery_set, config);
}

}  // namespace matk
