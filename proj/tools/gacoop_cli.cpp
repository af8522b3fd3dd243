// SPDX-License-Identifier: Apache-2.0
//
// gacoop: generate synthetic feature banks, train prompts with the coop,
// locoop or gacoop strategy, evaluate OOD detection, and run the benchmark,
// sweep and self-check harnesses.
//
// Exit codes: 0 ok, 1 usage, 2 I/O, 3 file format, 4 config / dimension
// mismatch, 5 numeric abort, 6 property violation.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gacoop/gacoop.hpp"

namespace fs = std::filesystem;
using namespace gacoop;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kFormat = 3, kConfig = 4, kNumeric = 5, kProperty = 6 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return kIo;
    case ErrorKind::BadMagic:
    case ErrorKind::VersionMismatch:
    case ErrorKind::Truncated:
    case ErrorKind::InvariantViolation: return kFormat;
    case ErrorKind::Config:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ContractViolation: return kConfig;
    case ErrorKind::NumericAbort:
    case ErrorKind::DegenerateVector: return kNumeric;
    case ErrorKind::PropertyViolation: return kProperty;
  }
  return kUsage;
}

constexpr const char* kConfigFile = "config.txt";

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

/// --config if given, else <data-dir>/config.txt if present, else defaults.
Config resolve_config(const std::string& config_path, const std::string& data_dir) {
  if (!config_path.empty()) return load_config(config_path);
  if (!data_dir.empty() && fs::exists(fs::path(data_dir) / kConfigFile))
    return load_config((fs::path(data_dir) / kConfigFile).string());
  return default_config();
}

void apply_seed(Config& cfg, const std::optional<std::uint64_t>& seed) {
  if (seed) cfg = with_seed(cfg, *seed);
}

FeatureBank load_bank(const fs::path& path) {
  std::vector<std::string> warnings;
  FeatureBank b = read_bank(path.string(), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << path.string() << ": " << w << '\n';
  return b;
}

std::vector<NamedBank> load_ood_banks(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("ood", 0) == 0 && e.path().extension() == ".fbnk")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::Io, "no ood*.fbnk banks in '" + dir.string() + "'");
  std::vector<NamedBank> banks;
  for (const auto& f : files) banks.push_back({f.stem().string(), load_bank(f)});
  return banks;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,l_coop,l_ood,train_acc,conflict_ratio\n";
  for (const auto& e : log.epochs)
    out += std::to_string(e.epoch) + ',' + format_fixed(e.l_coop, 9) + ',' + format_fixed(e.l_ood, 9) + ',' +
           format_fixed(e.train_accuracy) + ',' + format_fixed(e.conflict_ratio) + '\n';
  return out;
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::size_t pos = 0;
    while (pos <= item.size()) {
      const auto comma = item.find(',', pos);
      const auto piece = item.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!piece.empty()) out.push_back(piece);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-aligned prompt tuning for few-shot OOD detection"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file (defaults used when absent)");
    cmd->add_option("--seed", seed, "master seed; overrides the config's seed");
  };

  // gen-data
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-data", "Write train / id_test / ood feature banks for the synthetic benchmark");
  add_common(gen);
  gen->add_option("--out-dir", out_dir, "output directory")->required();

  // train
  std::string data_dir;
  std::string strategy_name;
  std::string checkpoint_out;
  std::string log_out;
  auto* tr = app.add_subcommand("train", "Train the prompt on <data-dir>/train.fbnk and write a checkpoint");
  add_common(tr);
  tr->add_option("--data-dir", data_dir, "directory with train.fbnk (and config.txt)")->required();
  tr->add_option("--strategy", strategy_name, "coop | locoop | gacoop (default: config value, gacoop)")
      ->check(CLI::IsMember({"coop", "locoop", "gacoop"}));
  tr->add_option("--out", checkpoint_out, "checkpoint path")->required();
  tr->add_option("--log", log_out, "per-epoch log CSV (default: <out>.log.csv)");

  // eval
  std::string checkpoint_in;
  std::string report_out;
  bool pretty = false;
  auto* ev = app.add_subcommand("eval", "Score id_test.fbnk and ood*.fbnk with a checkpoint");
  add_common(ev);
  ev->add_option("--checkpoint", checkpoint_in, "checkpoint written by train")->required();
  ev->add_option("--data-dir", data_dir, "directory with id_test.fbnk and ood*.fbnk")->required();
  ev->add_option("--out", report_out, "report CSV path")->required();
  ev->add_flag("--pretty", pretty, "also print an aligned table");

  // bench
  std::size_t n_seeds = 1;
  auto* bench = app.add_subcommand("bench", "gen -> train -> eval for every strategy over several seeds");
  add_common(bench);
  bench->add_option("--seeds", n_seeds, "number of seeds (seed, seed+1, ...)")->capture_default_str();
  bench->add_option("--out-dir", out_dir, "writes aggregate.csv and per_seed.csv")->required();
  bench->add_flag("--pretty", pretty, "also print an aligned table");

  // sweep
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run bench over a grid of one parameter");
  add_common(sweep);
  sweep->add_option("--param", sweep_param, "lambda | k_rank | tau | beta")
      ->required()
      ->check(CLI::IsMember({"lambda", "k_rank", "tau", "beta"}));
  sweep->add_option("--values", sweep_values, "values, space or comma separated")->required();
  sweep->add_option("--seeds", n_seeds, "seeds per grid point")->capture_default_str();
  sweep->add_option("--out", sweep_out, "sweep CSV path")->required();

  // grad-check
  std::size_t trials = 100;
  std::vector<std::size_t> align_dims{2, 16, 512, 4096};
  std::size_t pairs = 10000;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference and alignment-rule self checks");
  gc->add_option("--trials", trials, "finite-difference instances")->capture_default_str();
  gc->add_option("--dims", align_dims, "vector dimensions for the alignment suite")->capture_default_str();
  gc->add_option("--pairs", pairs, "total alignment pairs, split evenly across --dims")->capture_default_str();
  gc->add_option("--seed", seed, "seed for the random instances (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      Config cfg = resolve_config(config_path, "");
      apply_seed(cfg, seed);
      const FrozenTextEncoder enc = make_encoder(cfg.train, cfg.synth.n_classes, cfg.synth.embed_dim);
      const SyntheticBenchmark data = generate_synthetic(cfg.synth, enc);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      write_bank(data.train, (dir / "train.fbnk").string());
      write_bank(data.id_test, (dir / "id_test.fbnk").string());
      write_bank(data.ood, (dir / "ood.fbnk").string());
      write_text(dir / kConfigFile, dump_config(cfg));
      std::cout << "wrote " << data.train.n_samples << " train, " << data.id_test.n_samples << " id_test, "
                << data.ood.n_samples << " ood samples to " << dir.string() << '\n';
    } else if (tr->parsed()) {
      Config cfg = resolve_config(config_path, data_dir);
      apply_seed(cfg, seed);
      if (!strategy_name.empty()) cfg.train.strategy = *parse_strategy(strategy_name);
      const FeatureBank bank = load_bank(fs::path(data_dir) / "train.fbnk");
      const FrozenTextEncoder enc = make_encoder(cfg.train, bank.n_classes, bank.embed_dim);
      const TrainResult result = train(cfg.train, bank, enc);
      write_checkpoint({cfg.train.strategy, cfg.train.seed, result.params}, checkpoint_out);
      write_text(log_out.empty() ? checkpoint_out + ".log.csv" : log_out, train_log_csv(result.log));
      char sum[32];
      std::snprintf(sum, sizeof(sum), "%016llx", static_cast<unsigned long long>(result.log.final_checksum));
      std::cout << to_string(cfg.train.strategy) << ": " << result.log.epochs.size() << " epochs, final train acc "
                << format_fixed(result.log.epochs.back().train_accuracy, 4) << ", conflict ratio "
                << format_fixed(result.conflicts.conflict_ratio(), 4) << ", checksum " << sum << '\n';
    } else if (ev->parsed()) {
      Config cfg = resolve_config(config_path, data_dir);
      const Checkpoint ckpt = read_checkpoint(checkpoint_in);
      cfg = with_seed(cfg, seed.value_or(ckpt.seed));
      check_same_size(ckpt.params.size(), cfg.train.context_length * cfg.train.token_dim,
                      "checkpoint parameter count vs config context_length*token_dim");
      check_same_size(ckpt.params.context_length, cfg.train.context_length, "checkpoint context length vs config");
      const FeatureBank id_test = load_bank(fs::path(data_dir) / "id_test.fbnk");
      const std::vector<NamedBank> ood = load_ood_banks(data_dir);
      const FrozenTextEncoder enc = make_encoder(cfg.train, id_test.n_classes, id_test.embed_dim);
      const EvalReport report = evaluate(ckpt.params, enc, id_test, ood);
      write_text(report_out, std::string(kReportCsvHeader) + '\n' +
                                 report_csv_rows(report, to_string(ckpt.strategy), cfg.train.seed));
      if (pretty) {
        std::vector<AggregateRow> rows;
        for (const auto& d : report.per_dataset)
          rows.push_back({ckpt.strategy, d.dataset, d.fpr95, d.auroc, report.id_accuracy, 0.0, 1});
        rows.push_back({ckpt.strategy, "average", report.avg_fpr95, report.avg_auroc, report.id_accuracy, 0.0, 1});
        std::cout << pretty_table(rows);
      }
    } else if (bench->parsed()) {
      Config cfg = resolve_config(config_path, "");
      apply_seed(cfg, seed);
      if (n_seeds < 1) throw Error(ErrorKind::Config, "--seeds must be >= 1");
      const auto cells = run_bench(cfg, n_seeds);
      const auto rows = aggregate(cells);
      write_text(fs::path(out_dir) / "aggregate.csv", aggregate_csv(rows));
      write_text(fs::path(out_dir) / "per_seed.csv", per_seed_csv(cells));
      std::cout << cells.size() << " training runs\n";
      if (pretty) std::cout << pretty_table(rows);
    } else if (sweep->parsed()) {
      Config cfg = resolve_config(config_path, "");
      apply_seed(cfg, seed);
      if (n_seeds < 1) throw Error(ErrorKind::Config, "--seeds must be >= 1");
      write_text(sweep_out, run_sweep(cfg, sweep_param, split_list(sweep_values), n_seeds));
    } else if (gc->parsed()) {
      const std::uint64_t s = seed.value_or(0);
      const verify::FdReport fd = verify::run_fd_suite(trials, verify::FdDims{}, s);
      const bool fd_ok = fd.max_rel_err_ce < 1e-4 && fd.max_rel_err_ood < 1e-4;
      std::cout << "finite differences: " << fd.instances << " instances, max rel err ce " << fd.max_rel_err_ce
                << ", ood " << fd.max_rel_err_ood << (fd_ok ? "  ok" : "  FAILED") << '\n';
      if (align_dims.empty()) throw Error(ErrorKind::Config, "--dims must not be empty");
      const verify::AlignReport al = verify::run_align_suite(std::max<std::size_t>(1, pairs / align_dims.size()),
                                                             align_dims, s);
      std::cout << "alignment rule: " << al.pairs << " pairs (" << al.obtuse_pairs << " obtuse), violations: safety "
                << al.safety_violations << ", norm " << al.norm_violations << ", acute identity "
                << al.acute_identity_violations << ", residual " << al.residual_violations << ", idempotence "
                << al.idempotence_violations << ", scale covariance " << al.covariance_violations
                << (al.total_violations() == 0 ? "  ok" : "  FAILED") << '\n';
      if (!fd_ok || al.total_violations() != 0) return kProperty;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
