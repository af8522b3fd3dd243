// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gacoop/config.hpp"
#include "gacoop/metrics.hpp"
#include "gacoop/synthetic.hpp"
#include "gacoop/trainer.hpp"

namespace gacoop {

inline constexpr Strategy kAllStrategies[] = {Strategy::CoOp, Strategy::LoCoOp, Strategy::GaCoOp};

/// One (strategy, seed) run of generate → train → evaluate.
struct CellResult {
  Strategy strategy = Strategy::CoOp;
  std::uint64_t seed = 0;
  EvalReport report;
  TrainLog log;
};

/// Config with every random stream keyed off `seed`.
inline Config with_seed(Config cfg, std::uint64_t seed) {
  cfg.train.seed = seed;
  cfg.synth.seed = seed;
  return cfg;
}

inline CellResult run_cell(const Config& cfg, const SyntheticBenchmark& data, const FrozenTextEncoder& enc) {
  TrainResult tr = train(cfg.train, data.train, enc);
  CellResult cell{cfg.train.strategy, cfg.train.seed, {}, std::move(tr.log)};
  cell.report = evaluate(tr.params, enc, data.id_test, {{"synthetic_ood", data.ood}});
  cell.report.conflicts = tr.conflicts;
  return cell;
}

/// Runs every strategy on seeds base, base+1, …, base+k−1. Each seed shares
/// one encoder and one benchmark across the strategies. Results are ordered
/// by (seed, strategy).
inline std::vector<CellResult> run_bench(const Config& base, std::size_t n_seeds) {
  std::vector<CellResult> cells;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    const Config cfg = with_seed(base, base.train.seed + k);
    const FrozenTextEncoder enc = make_encoder(cfg.train, cfg.synth.n_classes, cfg.synth.embed_dim);
    const SyntheticBenchmark data = generate_synthetic(cfg.synth, enc);
    for (Strategy s : kAllStrategies) {
      Config c = cfg;
      c.train.strategy = s;
      cells.push_back(run_cell(c, data, enc));
    }
  }
  return cells;
}

/// Per-strategy means over seeds, one row per dataset (plus `average`).
struct AggregateRow {
  Strategy strategy = Strategy::CoOp;
  std::string dataset;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double id_acc = 0.0;
  double conflict_ratio = 0.0;
  std::size_t n_seeds = 0;
};

inline std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells) {
  std::vector<AggregateRow> rows;
  for (Strategy s : kAllStrategies) {
    std::map<std::string, AggregateRow> by_dataset;
    std::vector<std::string> order;
    auto add = [&](const std::string& name, double fpr, double au, const CellResult& c) {
      auto [it, fresh] = by_dataset.try_emplace(name);
      if (fresh) order.push_back(name);
      AggregateRow& r = it->second;
      r.strategy = s;
      r.dataset = name;
      r.fpr95 += fpr;
      r.auroc += au;
      r.id_acc += c.report.id_accuracy;
      r.conflict_ratio += c.report.conflicts.conflict_ratio();
      ++r.n_seeds;
    };
    for (const CellResult& c : cells) {
      if (c.strategy != s) continue;
      for (const OodResult& d : c.report.per_dataset) add(d.dataset, d.fpr95, d.auroc, c);
      add("average", c.report.avg_fpr95, c.report.avg_auroc, c);
    }
    for (const std::string& name : order) {
      AggregateRow r = by_dataset[name];
      const double n = static_cast<double>(r.n_seeds);
      r.fpr95 /= n;
      r.auroc /= n;
      r.id_acc /= n;
      r.conflict_ratio /= n;
      rows.push_back(r);
    }
  }
  return rows;
}

inline const AggregateRow* find_row(const std::vector<AggregateRow>& rows, Strategy s, const std::string& dataset) {
  for (const auto& r : rows)
    if (r.strategy == s && r.dataset == dataset) return &r;
  return nullptr;
}

inline constexpr const char* kAggregateCsvHeader = "strategy,dataset,fpr95,auroc,id_acc,conflict_ratio,n_seeds";

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = std::string(kAggregateCsvHeader) + '\n';
  for (const auto& r : rows)
    out += std::string(to_string(r.strategy)) + ',' + r.dataset + ',' + format_fixed(r.fpr95) + ',' +
           format_fixed(r.auroc) + ',' + format_fixed(r.id_acc) + ',' + format_fixed(r.conflict_ratio) + ',' +
           std::to_string(r.n_seeds) + '\n';
  return out;
}

inline std::string per_seed_csv(const std::vector<CellResult>& cells) {
  std::string out = std::string(kReportCsvHeader) + '\n';
  for (const auto& c : cells) out += report_csv_rows(c.report, to_string(c.strategy), c.seed);
  return out;
}

/// Aligned text table: one line per strategy, FPR95/AUROC per dataset in
/// percent, then the average and ID accuracy.
inline std::string pretty_table(const std::vector<AggregateRow>& rows) {
  std::vector<std::string> datasets;
  for (const auto& r : rows)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  std::ostringstream o;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-8s", "Method");
  o << buf;
  for (const auto& d : datasets) {
    std::snprintf(buf, sizeof(buf), " | %-17s", d.c_str());
    o << buf;
  }
  o << " | ID acc   | conflict\n";
  std::snprintf(buf, sizeof(buf), "%-8s", "");
  o << buf;
  for (std::size_t i = 0; i < datasets.size(); ++i) o << " | FPR95↓   AUROC↑ ";
  o << " |          |\n";
  for (Strategy s : kAllStrategies) {
    bool any = false;
    for (const auto& d : datasets) any = any || find_row(rows, s, d);
    if (!any) continue;
    std::snprintf(buf, sizeof(buf), "%-8s", to_string(s));
    o << buf;
    double id_acc = 0.0;
    double conflict = 0.0;
    for (const auto& d : datasets) {
      const AggregateRow* r = find_row(rows, s, d);
      if (!r) {
        o << " | " << std::string(17, ' ');
        continue;
      }
      std::snprintf(buf, sizeof(buf), " | %7.2f  %7.2f ", 100.0 * r->fpr95, 100.0 * r->auroc);
      o << buf;
      id_acc = r->id_acc;
      conflict = r->conflict_ratio;
    }
    std::snprintf(buf, sizeof(buf), " | %7.2f  | %7.4f\n", 100.0 * id_acc, conflict);
    o << buf;
  }
  return o.str();
}

inline const char* const kSweepParams[] = {"lambda", "k_rank", "tau", "beta"};

inline constexpr const char* kSweepCsvHeader = "param,value,strategy,dataset,fpr95,auroc,id_acc,conflict_ratio,n_seeds";

/// Runs the bench once per value of one config key and stacks the
/// aggregate rows.
inline std::string run_sweep(const Config& base, const std::string& param, const std::vector<std::string>& values,
                             std::size_t n_seeds) {
  require(std::find(std::begin(kSweepParams), std::end(kSweepParams), param) != std::end(kSweepParams),
          ErrorKind::Config, "sweep parameter must be one of lambda, k_rank, tau, beta");
  std::string out = std::string(kSweepCsvHeader) + '\n';
  for (const std::string& v : values) {
    Config cfg = base;
    set_config_value(cfg, param, v);
    validate(cfg);
    for (const auto& r : aggregate(run_bench(cfg, n_seeds)))
      out += param + ',' + v + ',' + to_string(r.strategy) + ',' + r.dataset + ',' + format_fixed(r.fpr95) + ',' +
             format_fixed(r.auroc) + ',' + format_fixed(r.id_acc) + ',' + format_fixed(r.conflict_ratio) + ',' +
             std::to_string(r.n_seeds) + '\n';
  }
  return out;
}

}  // namespace gacoop
