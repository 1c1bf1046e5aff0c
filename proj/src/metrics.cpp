#include "fieldmatch/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fieldmatch {

using nlohmann::json;

const int kMetricCutoffs[3] = {10, 100, 500};

RankingMetrics ranking_metrics(std::vector<RankedCandidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("ranking_metrics: empty candidate list");
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.company_id < b.company_id;
  });

  RankingMetrics m;
  m.candidates = static_cast<int>(candidates.size());
  for (const auto& c : candidates) {
    if (c.label != 0 && c.label != 1) throw std::invalid_argument("ranking_metrics: bad label");
    m.positives += c.label;
  }
  if (m.positives == 0) throw std::invalid_argument("ranking_metrics: no positive candidates");

  // AP over the deterministic ranked order.
  int seen_positives = 0;
  double ap_sum = 0.0;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    if (candidates[r].label == 1) {
      ++seen_positives;
      ap_sum += static_cast<double>(seen_positives) / static_cast<double>(r + 1);
    }
  }
  m.ap = ap_sum / m.positives;

  // Tie-aware AUC via average ranks on score order (ascending).
  {
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&candidates](std::size_t a, std::size_t b) {
      return candidates[a].score < candidates[b].score;
    });
    std::vector<double> rank(candidates.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() &&
             candidates[order[j + 1]].score == candidates[order[i]].score) {
        ++j;
      }
      const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
      i = j + 1;
    }
    const int P = m.positives;
    const int N = m.candidates - P;
    if (N > 0) {
      double rank_sum = 0.0;
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (candidates[k].label == 1) rank_sum += rank[k];
      }
      m.auc = (rank_sum - static_cast<double>(P) * (P + 1) / 2.0) /
              (static_cast<double>(P) * static_cast<double>(N));
    } else {
      m.auc = 1.0;  // degenerate: no negatives to misrank
    }
  }

  for (int k : kMetricCutoffs) {
    const int k_eff = std::min<int>(k, m.candidates);
    int hits = 0;
    for (int r = 0; r < k_eff; ++r) hits += candidates[static_cast<std::size_t>(r)].label;
    m.precision_at[k] = static_cast<double>(hits) / static_cast<double>(k_eff);
    m.recall_at[k] = static_cast<double>(hits) / static_cast<double>(m.positives);
  }
  return m;
}

void save_metrics_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics report '" + path + "'");
  json header{{"kind", "meta"},
              {"config_fingerprint", report.config_fingerprint},
              {"seed", report.seed}};
  out << header.dump() << "\n";
  for (const auto& [name, value] : report.summary) {
    json line{{"kind", "summary"}, {"metric", name}, {"value", value}};
    out << line.dump() << "\n";
  }
  for (const auto& ps : report.per_solution) {
    json line{{"kind", "solution"},
              {"id", ps.solution_id},
              {"ap", ps.metrics.ap},
              {"auc", ps.metrics.auc},
              {"positives", ps.metrics.positives},
              {"candidates", ps.metrics.candidates}};
    for (const auto& [k, v] : ps.metrics.precision_at) line["p_at_" + std::to_string(k)] = v;
    for (const auto& [k, v] : ps.metrics.recall_at) line["r_at_" + std::to_string(k)] = v;
    out << line.dump() << "\n";
  }
  for (const auto& w : report.warnings) {
    json line{{"kind", "warning"}, {"message", w}};
    out << line.dump() << "\n";
  }
}

MetricsReport load_metrics_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics report '" + path + "'");
  MetricsReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("metrics report line " + std::to_string(line_no) +
                               ": malformed (" + std::string(e.what()) + ")");
    }
    const std::string kind = obj.at("kind").get<std::string>();
    if (kind == "meta") {
      report.config_fingerprint = obj.at("config_fingerprint").get<std::string>();
      report.seed = obj.at("seed").get<std::uint64_t>();
    } else if (kind == "summary") {
      report.summary[obj.at("metric").get<std::string>()] = obj.at("value").get<double>();
    } else if (kind == "solution") {
      MetricsReport::PerSolution ps;
      ps.solution_id = obj.at("id").get<std::string>();
      ps.metrics.ap = obj.at("ap").get<double>();
      ps.metrics.auc = obj.at("auc").get<double>();
      ps.metrics.positives = obj.at("positives").get<int>();
      ps.metrics.candidates = obj.at("candidates").get<int>();
      for (int k : kMetricCutoffs) {
        const std::string pk = "p_at_" + std::to_string(k);
        const std::string rk = "r_at_" + std::to_string(k);
        if (obj.contains(pk)) ps.metrics.precision_at[k] = obj[pk].get<double>();
        if (obj.contains(rk)) ps.metrics.recall_at[k] = obj[rk].get<double>();
      }
      report.per_solution.push_back(std::move(ps));
    } else if (kind == "warning") {
      report.warnings.push_back(obj.at("message").get<std::string>());
    } else {
      throw std::runtime_error("metrics report line " + std::to_string(line_no) +
                               ": unknown kind '" + kind + "'");
    }
  }
  return report;
}

}  // namespace fieldmatch
