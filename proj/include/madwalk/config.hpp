#pragma once

// Experiment configuration: flat `key = value` text grouped in [sections].
// [common] applies to every subcommand, a section named after the subcommand
// overrides it. Lines starting with '#' are comments.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "madwalk/error.hpp"
#include "madwalk/formulas.hpp"
#include "madwalk/tree.hpp"
#include "madwalk/walk.hpp"

namespace madwalk {

/// Untyped sectioned key/value store with a canonical text form (sections and
/// keys sorted, one space around '=').
class KeyValueConfig {
 public:
  using Section = std::map<std::string, std::string>;

  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig c;
    std::string section = "common";
    int lineNo = 0;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      auto line = detail::trim(text.substr(0, nl));
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++lineNo;
      if (line.empty() || line.front() == '#') continue;
      if (line.front() == '[') {
        detail::require(line.back() == ']', "config line " + std::to_string(lineNo) + ": unterminated section");
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        detail::require(!section.empty(), "config line " + std::to_string(lineNo) + ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      detail::require(eq != std::string_view::npos, "config line " + std::to_string(lineNo) + ": expected key = value");
      const std::string key(detail::trim(line.substr(0, eq)));
      detail::require(!key.empty(), "config line " + std::to_string(lineNo) + ": empty key");
      auto& s = c.sections_[section];
      detail::require(!s.count(key), "config line " + std::to_string(lineNo) + ": duplicate key '" + key + "'");
      s[key] = std::string(detail::trim(line.substr(eq + 1)));
    }
    return c;
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [name, keys] : sections_) {
      if (keys.empty()) continue;
      if (!out.empty()) out += '\n';
      out += '[' + name + "]\n";
      for (const auto& [k, v] : keys) out += k + " = " + v + '\n';
    }
    return out;
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
  }
  const std::map<std::string, Section>& sections() const noexcept { return sections_; }

  /// [common] overlaid with [name].
  Section merged(const std::string& name) const {
    Section out;
    if (auto it = sections_.find("common"); it != sections_.end()) out = it->second;
    if (auto it = sections_.find(name); it != sections_.end()) {
      for (const auto& [k, v] : it->second) out[k] = v;
    }
    return out;
  }

 private:
  std::map<std::string, Section> sections_;
};

enum class ParamMode { Raw, Multiplicative, Additive };

inline std::string_view toString(ParamMode m) {
  switch (m) {
    case ParamMode::Raw: return "raw";
    case ParamMode::Multiplicative: return "multiplicative";
    case ParamMode::Additive: return "additive";
  }
  return "?";
}

inline const std::vector<std::string>& subcommandNames() {
  static const std::vector<std::string> names{"verify", "phase-diagram", "speed-curve", "coupling", "green", "simulate"};
  return names;
}

struct ExperimentConfig {
  std::string subcommand = "verify";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "out";

  ParamMode mode = ParamMode::Raw;
  double u0 = 1.0, u1 = 1.0;
  double alpha = 1.0, beta = 0.0, eps = 0.05;
  std::string law = "regular:2";
  std::uint32_t d = 2;

  std::vector<double> u0Grid, u1Grid, betaGrid;
  std::uint64_t runs = 100;
  std::uint64_t steps = 100000;
  std::uint64_t horizon = 20000;
  int level = 40;
  int margin = 0;  ///< 0 picks the default confirmation margin
  int generations = 20;

  /// Defaults for a subcommand; every key is present so canonical text is complete.
  static ExperimentConfig defaults(const std::string& subcommand) {
    ExperimentConfig c;
    c.subcommand = subcommand;
    if (subcommand == "phase-diagram") {
      c.u0Grid = {0.1, 0.3, 0.7, 1.2, 1.6, 2.0, 2.5};
      c.u1Grid = {0.1, 0.2, 0.6, 1.2, 1.5, 2.0, 3.0};
      c.runs = 600;
    } else if (subcommand == "speed-curve") {
      c.mode = ParamMode::Multiplicative;
      c.alpha = 15.0;
      c.d = 10;
      c.law = "regular:10";
      c.betaGrid = {0.0, 0.05, 0.1};
      c.runs = 4;
      c.steps = 1000000;
    } else if (subcommand == "coupling") {
      c.mode = ParamMode::Multiplicative;
      c.alpha = 15.0;
      c.d = 10;
      c.law = "regular:10";
      c.runs = 4;
      c.steps = 1000000;
    } else if (subcommand == "green") {
      c.runs = 200;
    } else if (subcommand == "simulate") {
      c.steps = 1000;
    }
    return c;
  }

  WalkParams walkParams() const { return walkParamsAt(beta); }
  WalkParams walkParamsAt(double b) const {
    switch (mode) {
      case ParamMode::Raw: return WalkParams::make(u0, u1);
      case ParamMode::Multiplicative: return multiplicativeParams(alpha, b);
      case ParamMode::Additive: return additiveParams(alpha, b);
    }
    return WalkParams{u0, u1};
  }
  OffspringLaw offspringLaw() const { return OffspringLaw::parse(law); }

  void validate() const {
    bool known = false;
    for (const auto& n : subcommandNames()) known |= n == subcommand;
    detail::require(known, "unknown subcommand '" + subcommand + "'");
    detail::require(threads >= 1, "threads must be >= 1");
    detail::require(d >= 1, "d must be >= 1");
    detail::require(runs >= 1, "runs must be >= 1");
    detail::require(eps >= 0.0, "eps must be >= 0");
    detail::require(margin >= 0, "margin must be >= 0");
    detail::require(level >= 2, "level must be >= 2");
    detail::require(generations >= 0, "generations must be >= 0");
    (void)offspringLaw();
    if (mode == ParamMode::Raw) {
      (void)walkParams();
    } else {
      detail::require(alpha > 0.0, "alpha must be positive");
      detail::require(beta >= 0.0, "beta must be >= 0");
      for (double b : betaGrid) detail::require(b >= 0.0, "beta grid values must be >= 0");
    }
    for (double x : u0Grid) detail::require(x > 0.0, "u0 grid values must be positive");
    for (double x : u1Grid) detail::require(x > 0.0, "u1 grid values must be positive");
  }

  /// Apply keys from [common] and [subcommand]; unknown keys are errors.
  void apply(const KeyValueConfig& kv) {
    for (const auto& [key, value] : kv.merged(subcommand)) set(key, value);
  }

  void set(const std::string& key, const std::string& value) {
    auto dbl = [&] { return detail::parseDouble(value, key); };
    auto u64 = [&] { return detail::parseInteger<std::uint64_t>(value, key); };
    auto i32 = [&] { return detail::parseInteger<int>(value, key); };
    if (key == "seed") seed = u64();
    else if (key == "threads") threads = detail::parseInteger<unsigned>(value, key);
    else if (key == "out") out = value;
    else if (key == "mode") mode = parseMode(value);
    else if (key == "u0") u0 = dbl();
    else if (key == "u1") u1 = dbl();
    else if (key == "alpha") alpha = dbl();
    else if (key == "beta") beta = dbl();
    else if (key == "eps") eps = dbl();
    else if (key == "law") law = value;
    else if (key == "d") d = detail::parseInteger<std::uint32_t>(value, key);
    else if (key == "u0_grid") u0Grid = parseList(value, key);
    else if (key == "u1_grid") u1Grid = parseList(value, key);
    else if (key == "beta_grid") betaGrid = parseList(value, key);
    else if (key == "runs") runs = u64();
    else if (key == "steps") steps = u64();
    else if (key == "horizon") horizon = u64();
    else if (key == "level") level = i32();
    else if (key == "margin") margin = i32();
    else if (key == "generations") generations = i32();
    else throw ConfigError("unknown config key '" + key + "'");
  }

  KeyValueConfig toKeyValue() const {
    KeyValueConfig kv;
    kv.set("common", "seed", std::to_string(seed));
    kv.set("common", "threads", std::to_string(threads));
    kv.set("common", "out", out);
    const std::string& s = subcommand;
    kv.set(s, "mode", std::string(toString(mode)));
    kv.set(s, "u0", detail::formatDouble(u0));
    kv.set(s, "u1", detail::formatDouble(u1));
    kv.set(s, "alpha", detail::formatDouble(alpha));
    kv.set(s, "beta", detail::formatDouble(beta));
    kv.set(s, "eps", detail::formatDouble(eps));
    kv.set(s, "law", law);
    kv.set(s, "d", std::to_string(d));
    kv.set(s, "u0_grid", formatList(u0Grid));
    kv.set(s, "u1_grid", formatList(u1Grid));
    kv.set(s, "beta_grid", formatList(betaGrid));
    kv.set(s, "runs", std::to_string(runs));
    kv.set(s, "steps", std::to_string(steps));
    kv.set(s, "horizon", std::to_string(horizon));
    kv.set(s, "level", std::to_string(level));
    kv.set(s, "margin", std::to_string(margin));
    kv.set(s, "generations", std::to_string(generations));
    return kv;
  }

  std::string canonical() const { return toKeyValue().canonical(); }

  /// Parse config text for a subcommand on top of its defaults.
  static ExperimentConfig fromText(const std::string& subcommand, std::string_view text) {
    ExperimentConfig c = defaults(subcommand);
    c.apply(KeyValueConfig::parse(text));
    c.validate();
    return c;
  }

  bool operator==(const ExperimentConfig&) const = default;

 private:
  static ParamMode parseMode(std::string_view v) {
    if (v == "raw") return ParamMode::Raw;
    if (v == "multiplicative") return ParamMode::Multiplicative;
    if (v == "additive") return ParamMode::Additive;
    throw ConfigError("mode must be raw, multiplicative or additive");
  }
  static std::vector<double> parseList(std::string_view v, const std::string& key) {
    std::vector<double> out;
    while (!detail::trim(v).empty()) {
      const auto comma = v.find(',');
      out.push_back(detail::parseDouble(detail::trim(v.substr(0, comma)), key));
      v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
    }
    return out;
  }
  static std::string formatList(const std::vector<double>& xs) {
    std::string out;
    for (double x : xs) {
      if (!out.empty()) out += ',';
      out += detail::formatDouble(x);
    }
    return out;
  }
};

}  // namespace madwalk
