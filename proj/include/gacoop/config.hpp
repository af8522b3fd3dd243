// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "gacoop/error.hpp"

namespace gacoop {

enum class Strategy : std::uint8_t { CoOp = 0, LoCoOp = 1, GaCoOp = 2 };
enum class LrSchedule { Constant, Cosine };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::CoOp: return "coop";
    case Strategy::LoCoOp: return "locoop";
    case Strategy::GaCoOp: return "gacoop";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "coop") return Strategy::CoOp;
  if (s == "locoop") return Strategy::LoCoOp;
  if (s == "gacoop") return Strategy::GaCoOp;
  return std::nullopt;
}

struct TrainConfig {
  Strategy strategy = Strategy::GaCoOp;
  std::size_t epochs = 50;
  double lr = 0.002;
  std::size_t batch_size = 32;
  double lambda = 0.25;
  double tau = 0.01;
  std::optional<std::size_t> k_rank;  // unset: half the class count
  std::size_t context_length = 16;
  std::size_t token_dim = 8;
  std::uint64_t seed = 0;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  /// Non-default ablation: also step along G_o after alignment.
  bool add_ood_gradient = false;
  /// When false, G_o is the raw regularizer gradient instead of λ·∇L_ood.
  bool scale_ood_by_lambda = true;
  bool prompt_init_zeros = false;
  double prompt_init_std = 0.02;

  std::size_t effective_k_rank(std::size_t n_classes) const { return k_rank.value_or(n_classes / 2); }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct SynthConfig {
  std::size_t n_classes = 20;
  std::size_t embed_dim = 64;
  std::size_t n_regions = 9;
  std::size_t train_shots = 4;
  std::size_t test_per_class = 50;
  double alpha = 0.8;  // signal strength
  double rho = 0.6;    // probability a region carries class signal
  double beta = 0.3;   // probability a class-signal region is corrupted toward background
  std::size_t n_background = 8;
  std::size_t n_ood_classes = 10;
  std::size_t n_ood_samples = 500;
  double ood_margin = 0.3;
  double teacher_ctx_std = 0.2;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct Config {
  TrainConfig train;
  SynthConfig synth;

  friend bool operator==(const Config&, const Config&) = default;
};

inline Config default_config() { return Config{}; }

inline void validate(const Config& c) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::Config, field + ": " + why);
  };
  const auto& t = c.train;
  if (!(t.lr > 0.0)) fail("lr", "must be > 0");
  if (t.epochs < 1) fail("epochs", "must be >= 1");
  if (t.batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(t.lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (!(t.tau > 0.0)) fail("tau", "must be > 0");
  if (t.context_length < 1) fail("context_length", "must be >= 1");
  if (t.token_dim < 1) fail("token_dim", "must be >= 1");
  if (!(t.prompt_init_std >= 0.0)) fail("prompt_init_std", "must be >= 0");
  const auto& s = c.synth;
  auto prob = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(name, "must lie in [0, 1]");
  };
  prob(s.alpha, "alpha");
  prob(s.rho, "rho");
  prob(s.beta, "beta");
  if (s.n_classes < 1) fail("n_classes", "must be >= 1");
  if (s.embed_dim < 1) fail("embed_dim", "must be >= 1");
  if (s.train_shots < 1) fail("train_shots", "must be >= 1");
  if (s.test_per_class < 1) fail("test_per_class", "must be >= 1");
  if (s.n_background < 1) fail("n_background", "must be >= 1");
  if (s.n_ood_classes < 1) fail("n_ood_classes", "must be >= 1");
  if (s.n_ood_samples < 1) fail("n_ood_samples", "must be >= 1");
  if (!(s.ood_margin > 0.0 && s.ood_margin <= 1.0)) fail("ood_margin", "must lie in (0, 1]");
  if (!(s.teacher_ctx_std >= 0.0)) fail("teacher_ctx_std", "must be >= 0");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorKind::Config, std::string(key) + ": cannot parse '" + std::string(text) + "'");
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorKind::Config, std::string(key) + ": expected true/false, got '" + std::string(text) + "'");
}

using Setter = std::function<void(Config&, std::string_view key, std::string_view value)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> m;
    auto size_field = [](auto member_of) {
      return [member_of](Config& c, std::string_view k, std::string_view v) {
        if (!v.empty() && v.front() == '-') throw Error(ErrorKind::Config, std::string(k) + ": must be non-negative");
        member_of(c) = parse_number<std::size_t>(k, v);
      };
    };
    auto double_field = [](auto member_of) {
      return [member_of](Config& c, std::string_view k, std::string_view v) {
        member_of(c) = parse_number<double>(k, v);
      };
    };
    m["strategy"] = [](Config& c, std::string_view k, std::string_view v) {
      auto s = parse_strategy(v);
      if (!s) throw Error(ErrorKind::Config, std::string(k) + ": expected coop|locoop|gacoop");
      c.train.strategy = *s;
    };
    m["epochs"] = size_field([](Config& c) -> std::size_t& { return c.train.epochs; });
    m["lr"] = double_field([](Config& c) -> double& { return c.train.lr; });
    m["batch_size"] = size_field([](Config& c) -> std::size_t& { return c.train.batch_size; });
    m["lambda"] = double_field([](Config& c) -> double& { return c.train.lambda; });
    m["tau"] = double_field([](Config& c) -> double& { return c.train.tau; });
    m["k_rank"] = [](Config& c, std::string_view k, std::string_view v) {
      if (v == "auto") {
        c.train.k_rank.reset();
        return;
      }
      if (!v.empty() && v.front() == '-') throw Error(ErrorKind::Config, std::string(k) + ": must be non-negative");
      c.train.k_rank = parse_number<std::size_t>(k, v);
    };
    m["context_length"] = size_field([](Config& c) -> std::size_t& { return c.train.context_length; });
    m["token_dim"] = size_field([](Config& c) -> std::size_t& { return c.train.token_dim; });
    m["seed"] = [](Config& c, std::string_view k, std::string_view v) {
      c.train.seed = c.synth.seed = parse_number<std::uint64_t>(k, v);
    };
    m["lr_schedule"] = [](Config& c, std::string_view k, std::string_view v) {
      if (v == "cosine") c.train.lr_schedule = LrSchedule::Cosine;
      else if (v == "constant") c.train.lr_schedule = LrSchedule::Constant;
      else throw Error(ErrorKind::Config, std::string(k) + ": expected constant|cosine");
    };
    m["add_ood_gradient"] = [](Config& c, std::string_view k, std::string_view v) {
      c.train.add_ood_gradient = parse_bool(k, v);
    };
    m["scale_ood_by_lambda"] = [](Config& c, std::string_view k, std::string_view v) {
      c.train.scale_ood_by_lambda = parse_bool(k, v);
    };
    m["prompt_init"] = [](Config& c, std::string_view k, std::string_view v) {
      if (v == "gaussian") c.train.prompt_init_zeros = false;
      else if (v == "zeros") c.train.prompt_init_zeros = true;
      else throw Error(ErrorKind::Config, std::string(k) + ": expected gaussian|zeros");
    };
    m["prompt_init_std"] = double_field([](Config& c) -> double& { return c.train.prompt_init_std; });
    m["n_classes"] = size_field([](Config& c) -> std::size_t& { return c.synth.n_classes; });
    m["embed_dim"] = size_field([](Config& c) -> std::size_t& { return c.synth.embed_dim; });
    m["n_regions"] = size_field([](Config& c) -> std::size_t& { return c.synth.n_regions; });
    m["train_shots"] = size_field([](Config& c) -> std::size_t& { return c.synth.train_shots; });
    m["test_per_class"] = size_field([](Config& c) -> std::size_t& { return c.synth.test_per_class; });
    m["alpha"] = double_field([](Config& c) -> double& { return c.synth.alpha; });
    m["rho"] = double_field([](Config& c) -> double& { return c.synth.rho; });
    m["beta"] = double_field([](Config& c) -> double& { return c.synth.beta; });
    m["n_background"] = size_field([](Config& c) -> std::size_t& { return c.synth.n_background; });
    m["n_ood_classes"] = size_field([](Config& c) -> std::size_t& { return c.synth.n_ood_classes; });
    m["n_ood_samples"] = size_field([](Config& c) -> std::size_t& { return c.synth.n_ood_samples; });
    m["ood_margin"] = double_field([](Config& c) -> double& { return c.synth.ood_margin; });
    m["teacher_ctx_std"] = double_field([](Config& c) -> double& { return c.synth.teacher_ctx_std; });
    return m;
  }();
  return table;
}

}  // namespace detail

/// Applies one `key = value` override on top of `c`.
inline void set_config_value(Config& c, std::string_view key, std::string_view value) {
  const auto& table = detail::setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorKind::Config, "unknown key '" + std::string(key) + "'");
  it->second(c, key, value);
}

/// Parses the flat `key = value` format on top of the defaults. Blank lines
/// and `#` comments are ignored; unknown or repeated keys are errors.
inline Config parse_config(std::string_view text) {
  Config c = default_config();
  std::map<std::string, int, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (seen.count(key))
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    seen.emplace(std::string(key), 1);
    try {
      set_config_value(c, key, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Effective configuration in the same format parse_config reads.
inline std::string dump_config(const Config& c) {
  using detail::format_double;
  const auto& t = c.train;
  const auto& s = c.synth;
  std::ostringstream o;
  o << "strategy = " << to_string(t.strategy) << '\n'
    << "epochs = " << t.epochs << '\n'
    << "lr = " << format_double(t.lr) << '\n'
    << "batch_size = " << t.batch_size << '\n'
    << "lambda = " << format_double(t.lambda) << '\n'
    << "tau = " << format_double(t.tau) << '\n'
    << "k_rank = " << (t.k_rank ? std::to_string(*t.k_rank) : std::string("auto")) << '\n'
    << "context_length = " << t.context_length << '\n'
    << "token_dim = " << t.token_dim << '\n'
    << "seed = " << t.seed << '\n'
    << "lr_schedule = " << (t.lr_schedule == LrSchedule::Cosine ? "cosine" : "constant") << '\n'
    << "add_ood_gradient = " << (t.add_ood_gradient ? "true" : "false") << '\n'
    << "scale_ood_by_lambda = " << (t.scale_ood_by_lambda ? "true" : "false") << '\n'
    << "prompt_init = " << (t.prompt_init_zeros ? "zeros" : "gaussian") << '\n'
    << "prompt_init_std = " << format_double(t.prompt_init_std) << '\n'
    << "n_classes = " << s.n_classes << '\n'
    << "embed_dim = " << s.embed_dim << '\n'
    << "n_regions = " << s.n_regions << '\n'
    << "train_shots = " << s.train_shots << '\n'
    << "test_per_class = " << s.test_per_class << '\n'
    << "alpha = " << format_double(s.alpha) << '\n'
    << "rho = " << format_double(s.rho) << '\n'
    << "beta = " << format_double(s.beta) << '\n'
    << "n_background = " << s.n_background << '\n'
    << "n_ood_classes = " << s.n_ood_classes << '\n'
    << "n_ood_samples = " << s.n_ood_samples << '\n'
    << "ood_margin = " << format_double(s.ood_margin) << '\n'
    << "teacher_ctx_std = " << format_double(s.teacher_ctx_std) << '\n';
  return o.str();
}

}  // namespace gacoop
