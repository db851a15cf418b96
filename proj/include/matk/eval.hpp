#ifndef MATK_EVAL_HPP_
#define MATK_EVAL_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "matk/dataset.hpp"
#include "matk/tensor.hpp"

namespace matk {

// cross_camera: gallery entries sharing the probe's identity AND camera are
// excluded before ranking (Market-style protocol). all: no exclusions.
enum class Protocol { kCrossCamera, kAll };

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct EvalReport {
  Protocol protocol = Protocol::kCrossCamera;
  double mAP = 0.0;
  std::map<int, double> rank;  // k -> accuracy
  int num_probes_evaluated = 0;
};

// Average precision per probe uses precision at each relevant hit; probes
// with no relevant gallery item after exclusions are skipped, not scored 0.
// Throws "no evaluable probes" when every probe is skipped.
double mean_average_precision(const Tensor& dist, std::span<const int> probe_labels,
                              std::span<const int> gallery_labels,
                              std::span<const int> probe_cams,
                              std::span<const int> gallery_cams, Protocol protocol);

// Rank-k accuracy: fraction of evaluable probes whose nearest relevant
// gallery item appears within the top k after exclusions.
std::map<int, double> cmc(const Tensor& dist, std::span<const int> probe_labels,
                          std::span<const int> gallery_labels, std::span<const int> probe_cams,
                          std::span<const int> gallery_cams, std::span<const int> ks,
                          Protocol protocol);

// mAP + CMC in one pass over the distance matrix.
EvalReport evaluate(const Tensor& dist, std::span<const int> probe_labels,
                    std::span<const int> gallery_labels, std::span<const int> probe_cams,
                    std::span<const int> gallery_cams, std::span<const int> ks,
                    Protocol protocol);

// adv.mAP / clean.mAP; requires clean.mAP > 0.
double map_ratio(const EvalReport& adv_report, const EvalReport& clean_report);

struct RankingList {
  int probe_index = 0;
  std::vector<int> gallery_order;   // ascending distance, ties by index
  std::vector<char> relevant;       // identity match flags, aligned to order
  std::vector<float> distances;
};

// Top-k gallery entries for one probe, no protocol exclusions. Relevance
// flags mark gallery entries whose identity equals probe_label.
RankingList ranking_list(int probe_index, int probe_label, const Tensor& dist,
                         std::span<const int> gallery_labels, int top_k);

std::string eval_report_to_json(const EvalReport& report);
std::string ranking_list_to_json(const RankingList& list);

// Side-by-side strip: the probe tile then the ranked gallery tiles, each with
// a colored marker band (probe blue, relevant green, irrelevant red).
PngImage ranking_strip(const ImageRecord& probe, std::span<const ImageRecord> gallery,
                       const RankingList& list);

}  // namespace matk

#endif  // MATK_EVAL_HPP_
