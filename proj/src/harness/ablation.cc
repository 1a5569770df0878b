#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mvp/harness.h"

namespace mvp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string TaskFor(const std::string& metric) {
  if (metric == "mean_map") return "agnostic";
  if (metric == "edit_action") return "specific";
  if (metric == "r1" || metric == "r5" || metric == "r10") return "summary";
  throw std::invalid_argument("unknown ablation metric '" + metric + "'");
}

std::string ValueText(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::vector<double> Ranks(const std::vector<double>& x) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

RunConfig WithSetting(const RunConfig& base, const std::string& key,
                      const json& value) {
  if (key == "pair.n_predictions") {
    RunConfig c = base;
    c.pair.n_future = value.get<int>() * c.pair.stride;
    return c;
  }
  json j = ToJson(base);
  std::string pointer = "/" + key;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr)) throw std::invalid_argument("unknown config key '" + key + "'");
  j[ptr] = value;
  return RunConfigFromJson(j);
}

std::string ArmLabel(const std::vector<std::pair<std::string, json>>& cell,
                     const RunConfig& config) {
  std::string label;
  for (const auto& [k, v] : cell) {
    if (!label.empty()) label += ";";
    label += k + "=" + ValueText(v);
  }
  RunConfig neutral = config;
  neutral.model_seed = 0;
  neutral.sampling_seed = 0;
  return (label.empty() ? "base" : label) + "@" + ConfigHash(neutral).substr(0, 8);
}

void WriteAblationCsv(const std::vector<AblationRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out.precision(10);
    out << "arm,seed_count,metric,mean,std\n";
    for (const AblationRow& r : rows) {
      out << r.arm << "," << r.seed_count << "," << r.metric << "," << r.mean
          << "," << r.std << "\n";
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

std::vector<AblationRow> RunAblation(const RunConfig& base,
                                     const std::vector<AblationAxis>& grid,
                                     int seeds, const std::string& metric,
                                     const synth::Corpus& corpus,
                                     const fs::path& csv,
                                     const ProgressFn& progress) {
  if (seeds < 1) throw std::invalid_argument("ablation needs >= 1 seed");
  const std::string task = TaskFor(metric);
  for (const AblationAxis& axis : grid) {
    if (axis.values.empty()) {
      throw std::invalid_argument("ablation axis '" + axis.key + "' has no values");
    }
  }
  // Cartesian product, first axis slowest.
  std::vector<std::vector<std::pair<std::string, json>>> cells = {{}};
  for (const AblationAxis& axis : grid) {
    std::vector<std::vector<std::pair<std::string, json>>> next;
    for (const auto& cell : cells)
      for (const json& v : axis.values) {
        auto c = cell;
        c.emplace_back(axis.key, v);
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }

  std::vector<AblationRow> rows;
  json runs = json::array();
  for (const auto& cell : cells) {
    AblationRow row;
    row.metric = metric;
    RunConfig cell_config = base;
    std::string setup_error;
    try {
      // Stride first so pair.n_predictions sees the cell's stride.
      auto ordered = cell;
      std::stable_partition(ordered.begin(), ordered.end(), [](const auto& kv) {
        return kv.first != "pair.n_predictions";
      });
      for (const auto& [k, v] : ordered) cell_config = WithSetting(cell_config, k, v);
      cell_config.Validate();
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    row.arm = ArmLabel(cell, cell_config);
    for (int s = 0; s < seeds; ++s) {
      double value = std::numeric_limits<double>::quiet_NaN();
      json run = {{"arm", row.arm}, {"seed", s}};
      try {
        if (!setup_error.empty()) throw std::invalid_argument(setup_error);
        RunConfig rc = cell_config;
        rc.model_seed = base.model_seed + static_cast<uint64_t>(s);
        rc.sampling_seed = base.sampling_seed + static_cast<uint64_t>(s);
        if (!base.out_dir.empty()) {
          rc.out_dir = (fs::path(base.out_dir) /
                        (ConfigHash(rc).substr(0, 12) + "_s" + std::to_string(s)))
                           .string();
        }
        if (progress) progress("cell " + row.arm + " seed " + std::to_string(s));
        const PretrainResult pre = RunPretrain(rc, corpus);
        const json probe = RunProbe(rc, pre.params, corpus, task);
        value = probe.at(metric).get<double>();
        run["config_hash"] = ConfigHash(rc);
        run["final_hash"] = pre.final_hash;
        run["value"] = value;
        if (progress) progress("  " + metric + " = " + std::to_string(value));
      } catch (const std::exception& e) {
        row.errors.push_back("seed " + std::to_string(s) + ": " + e.what());
        run["error"] = e.what();
        if (progress) progress("  failed: " + std::string(e.what()));
      }
      row.values.push_back(value);
      runs.push_back(run);
    }
    std::vector<double> ok;
    for (double v : row.values) {
      if (std::isfinite(v)) ok.push_back(v);
    }
    row.seed_count = static_cast<int>(ok.size());
    if (ok.empty()) {
      row.mean = row.std = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / ok.size();
      double ss = 0.0;
      for (double v : ok) ss += (v - row.mean) * (v - row.mean);
      row.std = ok.size() > 1 ? std::sqrt(ss / (ok.size() - 1)) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  if (!csv.empty()) {
    WriteAblationCsv(rows, csv);
    std::ofstream(csv.string() + ".runs.json") << runs.dump(2) << "\n";
  }
  return rows;
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("Spearman needs two equal-length samples of size >= 2");
  }
  const std::vector<double> rx = Ranks(x);
  const std::vector<double> ry = Ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

std::vector<fs::path> ListCheckpoints(const fs::path& run_dir) {
  std::vector<fs::path> out;
  const fs::path dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("no checkpoints directory in " + run_dir.string());
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("step_", 0) == 0) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ReportResult RunReport(const std::vector<fs::path>& checkpoints,
                       const synth::Corpus& corpus, const ProgressFn& progress) {
  ReportResult r;
  for (const fs::path& dir : checkpoints) {
    const Checkpoint ck = LoadCheckpoint(dir);
    const RunConfig config = RunConfigFromJson(ck.config);
    ParamSet params = InitModel(config);
    ApplyCheckpoint(ck, params);
    const json probe = RunProbe(config, params, corpus, "agnostic");
    r.steps.push_back(ck.step);
    r.pretrain_accuracy.push_back(ck.metrics.at("pretrain_region_accuracy"));
    r.mean_map.push_back(probe.at("mean_map"));
    if (progress) {
      progress("step " + std::to_string(ck.step) + " pretrain_acc " +
               std::to_string(r.pretrain_accuracy.back()) + " mean_map " +
               std::to_string(r.mean_map.back()));
    }
  }
  r.spearman = Spearman(r.pretrain_accuracy, r.mean_map);
  return r;
}

}  // namespace mvp
