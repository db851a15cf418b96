#include "matk/eval.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

using nlohmann::json;

namespace matk {

const char* protocol_name(Protocol p) {
  return p == Protocol::kCrossCamera ? "cross_camera" : "all";
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "cross_camera") return Protocol::kCrossCamera;
  if (name == "all") return Protocol::kAll;
  throw Error("unknown protocol '" + name + "'");
}

namespace {

void check_eval_args(const Tensor& dist, std::span<const int> probe_labels,
                     std::span<const int> gallery_labels, std::span<const int> probe_cams,
                     std::span<const int> gallery_cams) {
  if (dist.rank() != 2) throw Error("distance matrix must be rank 2");
  if (static_cast<int>(probe_labels.size()) != dist.dim(0) ||
      static_cast<int>(probe_cams.size()) != dist.dim(0))
    throw Error("probe label/camera arrays do not match distance matrix rows");
  if (static_cast<int>(gallery_labels.size()) != dist.dim(1) ||
      static_cast<int>(gallery_cams.size()) != dist.dim(1))
    throw Error("gallery label/camera arrays do not match distance matrix columns");
}

// Ranked relevance flags for one probe after protocol exclusions.
std::vector<char> probe_relevance(const Tensor& dist, int pi, std::span<const int> probe_labels,
                                  std::span<const int> gallery_labels,
                                  std::span<const int> probe_cams,
                                  std::span<const int> gallery_cams, Protocol protocol) {
  const int nx = dist.dim(1);
  std::vector<std::pair<float, int>> order;
  order.reserve(static_cast<size_t>(nx));
  for (int j = 0; j < nx; ++j) {
    if (protocol == Protocol::kCrossCamera &&
        gallery_labels[static_cast<size_t>(j)] == probe_labels[static_cast<size_t>(pi)] &&
        gallery_cams[static_cast<size_t>(j)] == probe_cams[static_cast<size_t>(pi)]) {
      continue;
    }
    order.emplace_back(dist.at(pi, j), j);
  }
  std::sort(order.begin(), order.end());
  std::vector<char> relevant;
  relevant.reserve(order.size());
  for (const auto& [d, j] : order) {
    relevant.push_back(gallery_labels[static_cast<size_t>(j)] ==
                       probe_labels[static_cast<size_t>(pi)]);
  }
  return relevant;
}

}  // namespace

double mean_average_precision(const Tensor& dist, std::span<const int> probe_labels,
                              std::span<const int> gallery_labels,
                              std::span<const int> probe_cams,
                              std::span<const int> gallery_cams, Protocol protocol) {
  check_eval_args(dist, probe_labels, gallery_labels, probe_cams, gallery_cams);
  double ap_sum = 0.0;
  int evaluated = 0;
  for (int pi = 0; pi < dist.dim(0); ++pi) {
    const auto relevant =
        probe_relevance(dist, pi, probe_labels, gallery_labels, probe_cams, gallery_cams, protocol);
    int total_relevant = 0;
    for (char r : relevant) total_relevant += r;
    if (total_relevant == 0) continue;  // skipped, not scored 0
    int hits = 0;
    double ap = 0.0;
    for (size_t pos = 0; pos < relevant.size(); ++pos) {
      if (relevant[pos]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
      }
    }
    ap_sum += ap / total_relevant;
    ++evaluated;
  }
  if (evaluated == 0) throw Error("no evaluable probes");
  return ap_sum / evaluated;
}

std::map<int, double> cmc(const Tensor& dist, std::span<const int> probe_labels,
                          std::span<const int> gallery_labels, std::span<const int> probe_cams,
                          std::span<const int> gallery_cams, std::span<const int> ks,
                          Protocol protocol) {
  check_eval_args(dist, probe_labels, gallery_labels, probe_cams, gallery_cams);
  for (int k : ks) {
    if (k <= 0) throw Error("cmc ranks must be positive");
  }
  std::map<int, int> hits;
  for (int k : ks) hits[k] = 0;
  int evaluated = 0;
  for (int pi = 0; pi < dist.dim(0); ++pi) {
    const auto relevant =
        probe_relevance(dist, pi, probe_labels, gallery_labels, probe_cams, gallery_cams, protocol);
    int first = -1;
    for (size_t pos = 0; pos < relevant.size(); ++pos) {
      if (relevant[pos]) {
        first = static_cast<int>(pos);
        break;
      }
    }
    if (first < 0) continue;
    ++evaluated;
    for (int k : ks) {
      if (first < k) ++hits[k];
    }
  }
  if (evaluated == 0) throw Error("no evaluable probes");
  std::map<int, double> out;
  for (int k : ks) out[k] = static_cast<double>(hits[k]) / evaluated;
  return out;
}

EvalReport evaluate(const Tensor& dist, std::span<const int> probe_labels,
                    std::span<const int> gallery_labels, std::span<const int> probe_cams,
                    std::span<const int> gallery_cams, std::span<const int> ks,
                    Protocol protocol) {
  EvalReport report;
  report.protocol = protocol;
  report.mAP =
      mean_average_precision(dist, probe_labels, gallery_labels, probe_cams, gallery_cams, protocol);
  report.rank = cmc(dist, probe_labels, gallery_labels, probe_cams, gallery_cams, ks, protocol);
  int evaluated = 0;
  for (int pi = 0; pi < dist.dim(0); ++pi) {
    const auto relevant =
        probe_relevance(dist, pi, probe_labels, gallery_labels, probe_cams, gallery_cams, protocol);
    for (char r : relevant) {
      if (r) {
        ++evaluated;
        break;
      }
    }
  }
  report.num_probes_evaluated = evaluated;
  return report;
}

double map_ratio(const EvalReport& adv_report, const EvalReport& clean_report) {
  if (clean_report.mAP <= 0.0) throw Error("map_ratio requires clean mAP > 0");
  return adv_report.mAP / clean_report.mAP;
}

RankingList ranking_list(int probe_index, int probe_label, const Tensor& dist,
                         std::span<const int> gallery_labels, int top_k) {
  if (dist.rank() != 2) throw Error("distance matrix must be rank 2");
  const int nx = dist.dim(1);
  if (probe_index < 0 || probe_index >= dist.dim(0))
    throw Error("probe index out of range");
  if (static_cast<int>(gallery_labels.size()) != nx)
    throw Error("gallery label array does not match distance matrix columns");
  if (top_k < 0 || top_k > nx)
    throw Error("top_k " + std::to_string(top_k) + " exceeds gallery size " + std::to_string(nx));

  std::vector<std::pair<float, int>> order;
  order.reserve(static_cast<size_t>(nx));
  for (int j = 0; j < nx; ++j) order.emplace_back(dist.at(probe_index, j), j);
  std::sort(order.begin(), order.end());

  RankingList list;
  list.probe_index = probe_index;
  for (int r = 0; r < top_k; ++r) {
    const int gj = order[static_cast<size_t>(r)].second;
    list.gallery_order.push_back(gj);
    list.distances.push_back(order[static_cast<size_t>(r)].first);
    list.relevant.push_back(gallery_labels[static_cast<size_t>(gj)] == probe_label ? 1 : 0);
  }
  return list;
}

std::string eval_report_to_json(const EvalReport& report) {
  json rank = json::object();
  for (const auto& [k, v] : report.rank) rank[std::to_string(k)] = v;
  json j = {{"protocol", protocol_name(report.protocol)},
            {"mAP", report.mAP},
            {"rank", rank},
            {"num_probes_evaluated", report.num_probes_evaluated}};
  return j.dump(2);
}

std::string ranking_list_to_json(const RankingList& list) {
  json j = {{"probe_index", list.probe_index},
            {"gallery_order", list.gallery_order},
            {"distances", list.distances},
            {"relevant", json::array()}};
  for (char r : list.relevant) j["relevant"].push_back(static_cast<bool>(r));
  return j.dump(2);
}

PngImage ranking_strip(const ImageRecord& probe, std::span<const ImageRecord> gallery,
                       const RankingList& list) {
  const Tensor& p = probe.pixels;
  const int h = p.dim(0), w = p.dim(1);
  const int tiles = 1 + static_cast<int>(list.gallery_order.size());
  const int band = 2, sep = 1;
  PngImage strip;
  strip.height = h + band;
  strip.width = tiles * w + (tiles - 1) * sep;
  strip.channels = 3;
  strip.data.assign(static_cast<size_t>(strip.height) * strip.width * 3, 255);

  auto blit = [&](const Tensor& px, int tile, uint8_t br, uint8_t bg, uint8_t bb) {
    const int x0 = tile * (w + sep);
    const int c_in = px.dim(2);
    for (int x = 0; x < w; ++x) {
      for (int b = 0; b < band; ++b) {
        uint8_t* dst = strip.data.data() +
                       (static_cast<size_t>(b) * strip.width + x0 + x) * 3;
        dst[0] = br;
        dst[1] = bg;
        dst[2] = bb;
      }
      for (int y = 0; y < h; ++y) {
        uint8_t* dst = strip.data.data() +
                       (static_cast<size_t>(y + band) * strip.width + x0 + x) * 3;
        for (int c = 0; c < 3; ++c) {
          const float v = px.at(y, x, c_in == 3 ? c : 0);
          dst[c] = static_cast<uint8_t>(std::min(255.0f, std::max(0.0f, std::round(v))));
        }
      }
    }
  };

  blit(p, 0, 64, 64, 255);  // probe: blue band
  for (size_t r = 0; r < list.gallery_order.size(); ++r) {
    const ImageRecord& g = gallery[static_cast<size_t>(list.gallery_order[r])];
    if (g.pixels.dim(0) != h || g.pixels.dim(1) != w)
      throw Error("ranking_strip requires uniform image sizes");
    if (list.relevant[r])
      blit(g.pixels, static_cast<int>(r) + 1, 32, 200, 32);
    else
      blit(g.pixels, static_cast<int>(r) + 1, 220, 32, 32);
  }
  return strip;
}

}  // namespace matk
