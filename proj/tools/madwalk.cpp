// madwalk: experiment runner. Every subcommand reads defaults, then --config,
// then command-line flags, and writes CSV files into --out.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "madwalk/config.hpp"
#include "madwalk/coupling.hpp"
#include "madwalk/rubin.hpp"
#include "madwalk/stats.hpp"
#include "madwalk/verify.hpp"
#include "madwalk/walk.hpp"

using namespace madwalk;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kInvariant = 2, kInsufficient = 3 };

// Runs fn(i) for i in [0, n) on a pool; each i is handled by exactly one worker.
template <class Fn>
void parallelFor(std::size_t n, unsigned threads, Fn fn) {
  threads = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::ofstream openCsv(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  std::ofstream f(fs::path(cfg.out) / name);
  if (!f) throw ConfigError("cannot write " + (fs::path(cfg.out) / name).string());
  f.precision(10);
  return f;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

int runVerify(const ExperimentConfig&) {
  const auto results = runVerifySuite();
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%-4s %-48s err=%-12.3g tol=%.3g\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.error, r.tolerance);
    failed += !r.pass;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed ? kInvariant : kOk;
}

int runPhaseDiagram(const ExperimentConfig& cfg) {
  const auto law = cfg.offspringLaw();
  struct Cell {
    double u0, u1;
    RecurrenceReport rep;
  };
  std::vector<Cell> cells;
  for (double u0 : cfg.u0Grid) {
    for (double u1 : cfg.u1Grid) cells.push_back({u0, u1, {}});
  }
  parallelFor(cells.size(), cfg.threads, [&](std::size_t i) {
    cells[i].rep = classifyRecurrence(WalkParams::make(cells[i].u0, cells[i].u1), law, cfg.horizon, cfg.level,
                                      cfg.runs, deriveSeed(cfg.seed, i));
  });
  auto f = openCsv(cfg, "phase.csv");
  f << "u0,u1,d,margin,escape_freq,ci_lo,ci_hi,verdict,theory\n";
  int agree = 0, decided = 0;
  for (const auto& c : cells) {
    const auto& th = *c.rep.theoretical;
    f << fmt(c.u0) << ',' << fmt(c.u1) << ',' << fmt(law.mean()) << ',' << fmt(th.margin) << ','
      << fmt(c.rep.escapeFrequency) << ',' << fmt(c.rep.ci.lo) << ',' << fmt(c.rep.ci.hi) << ','
      << toString(c.rep.verdict) << ',' << toString(th.phase) << '\n';
    if (c.rep.verdict != EmpiricalVerdict::Inconclusive && th.phase != Phase::Critical) {
      ++decided;
      agree += toString(c.rep.verdict) == toString(th.phase);
    }
  }
  std::printf("%zu cells, %d decided, %d agree with theory\n", cells.size(), decided, agree);
  return kOk;
}

int runSpeedCurve(const ExperimentConfig& cfg) {
  const auto law = cfg.offspringLaw();
  const std::vector<double> betas = cfg.betaGrid.empty() ? std::vector<double>{cfg.beta} : cfg.betaGrid;
  std::vector<SpeedEstimate> est(betas.size());
  const int margin = cfg.margin > 0 ? cfg.margin : 30;
  parallelFor(betas.size(), cfg.threads, [&](std::size_t i) {
    est[i] = directSpeed(cfg.walkParamsAt(betas[i]), law, cfg.steps, cfg.runs, margin, deriveSeed(cfg.seed, i));
  });
  auto f = openCsv(cfg, "speed.csv");
  f << "mode,alpha,beta,u0,u1,law,v,se,blocks\n";
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const auto p = cfg.walkParamsAt(betas[i]);
    f << toString(cfg.mode) << ',' << fmt(cfg.alpha) << ',' << fmt(betas[i]) << ',' << fmt(p.u0) << ',' << fmt(p.u1)
      << ',' << law.text() << ',' << fmt(est[i].v) << ',' << fmt(est[i].standardError) << ',' << est[i].blockCount
      << '\n';
    std::printf("beta=%-8s v=%.6f se=%.2e blocks=%llu\n", fmt(betas[i]).c_str(), est[i].v, est[i].standardError,
                static_cast<unsigned long long>(est[i].blockCount));
  }
  return kOk;
}

int runCoupling(const ExperimentConfig& cfg) {
  detail::require(cfg.mode == ParamMode::Multiplicative, "coupling supports multiplicative reinforcement only");
  const auto c = couplingProbs(cfg.alpha, cfg.d, cfg.beta, cfg.eps);
  const auto h = harvestRuns(c, cfg.steps, static_cast<std::uint32_t>(cfg.runs), cfg.seed, cfg.margin, cfg.threads);
  auto f = openCsv(cfg, "blocks.csv");
  f << "run,blockIndex,duration,dlevelBeta,dlevelBetaEps,backsteps,decoupledAt,discrepancy\n";
  for (const auto& b : h.blocks) {
    f << b.run << ',' << b.index << ',' << b.duration << ',' << b.dlevelBeta << ',' << b.dlevelBetaEps << ','
      << b.backsteps << ',';
    if (b.decoupled()) f << b.decoupledAt;
    f << ',' << b.discrepancy() << '\n';
  }
  const auto& inv = h.invariants;
  std::printf("alpha=%g d=%u beta=%g eps=%g margin=%d steps=%llu blocks=%zu discarded=%.4f\n", cfg.alpha, cfg.d,
              cfg.beta, cfg.eps, h.margin, static_cast<unsigned long long>(h.steps), h.blocks.size(),
              h.discardFraction());
  std::printf("hard violations=%llu (|B|=2 negative discrepancies: %llu)\n",
              static_cast<unsigned long long>(inv.hardViolations()),
              static_cast<unsigned long long>(inv.doubleBackstepNegative));
  const auto s = speedDiffEstimator(h.blocks);
  std::printf("v(beta)=%.6f (%.2e)  v(beta+eps)=%.6f (%.2e)  diff=%.3e (%.2e)\n", s.vBeta, s.seBeta, s.vBetaEps,
              s.seBetaEps, s.diff, s.seDiff);
  const auto st = decouplingStats(h.blocks, c);
  std::printf("P(|B|=1, disc>=1)=%.3e (%.1e), lower bound %.3e\n", st.pSinglePositive, st.pSinglePositiveSe,
              st.singleLowerBound);
  for (const auto& row : st.rows) {
    std::printf("  |B|=%u  P=%.3e  P(D)=%.3e", row.k, row.pBackstepsEq, row.pD);
    if (row.upperBound) std::printf("  bound %.3e", *row.upperBound);
    std::printf("\n");
  }
  return inv.hardViolations() ? kInvariant : kOk;
}

int runGreen(const ExperimentConfig& cfg) {
  const auto law = cfg.offspringLaw();
  const auto p = cfg.walkParams();
  const auto nStar = greenNStar(p, law.mean());
  detail::require(nStar.has_value(), "green process is subcritical for every n <= 200 at these parameters");
  std::vector<GreenProcess> runs(cfg.runs);
  parallelFor(runs.size(), cfg.threads, [&](std::size_t r) {
    LazyTree tree(law, deriveSeed(cfg.seed, 2 * r));
    runs[r] = greenProcess(tree, p, *nStar, cfg.generations, ClockStore(deriveSeed(cfg.seed, 2 * r + 1)));
  });
  auto f = openCsv(cfg, "green.csv");
  f << "run,generation,count\n";
  std::size_t survived = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::size_t g = 0; g < runs[r].generations.size(); ++g) f << r << ',' << g << ',' << runs[r].generations[g] << '\n';
    survived += runs[r].survived;
  }
  std::printf("n*=%d  mean offspring d^n* psi_n* = %.4f  survival to generation %d: %zu/%zu\n", *nStar,
              std::pow(law.mean(), *nStar) * psi(p, *nStar), cfg.generations, survived, runs.size());
  return kOk;
}

int runSimulate(const ExperimentConfig& cfg) {
  LazyTree tree(cfg.offspringLaw(), cfg.seed);
  MadWalk w(tree, cfg.walkParams());
  CounterRng rng(deriveSeed(cfg.seed, 1));
  std::vector<NodeRef> path{w.position()};
  for (std::uint64_t n = 0; n < cfg.steps; ++n) path.push_back(w.step(rng.uniform()));
  auto f = openCsv(cfg, "trajectory.csv");
  writeTrajectoryCsv(f, tree, path);
  std::printf("%llu steps, final level %d\n", static_cast<unsigned long long>(cfg.steps), tree.level(path.back()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"madwalk: once-reinforced biased random walks on trees"};
  app.require_subcommand(1);
  app.fallthrough();
  std::map<std::string, std::string> flags;
  std::string configFile;
  app.add_option("--config", configFile, "key = value config file")->check(CLI::ExistingFile);
  for (const char* key : {"seed", "threads", "out"}) app.add_option(std::string("--") + key, flags[key]);

  const std::vector<std::pair<std::string, std::string>> keys{
      {"mode", "raw | multiplicative | additive"},
      {"u0", "unvisited child weight (raw mode)"},
      {"u1", "visited child weight (raw mode)"},
      {"alpha", "bias"},
      {"beta", "reinforcement"},
      {"eps", "coupling increment of beta"},
      {"law", "offspring law: regular:d | table:k=p,... | geom:p"},
      {"d", "arity of the regular tree (coupling)"},
      {"u0-grid", "comma separated u0 values"},
      {"u1-grid", "comma separated u1 values"},
      {"beta-grid", "comma separated beta values"},
      {"runs", "independent runs"},
      {"steps", "steps per run"},
      {"horizon", "step cap per excursion"},
      {"level", "escape level"},
      {"margin", "regeneration confirmation margin (0 = automatic)"},
      {"generations", "green generations"},
  };
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help{
      {"verify", "formula and oracle checks"},
      {"phase-diagram", "empirical recurrence/transience over a (u0, u1) grid"},
      {"speed-curve", "regeneration speed estimates over a beta grid"},
      {"coupling", "coupled walks at beta and beta+eps, blocks.csv"},
      {"green", "green branching process counts"},
      {"simulate", "single trajectory dump"},
  };
  for (const auto& name : subcommandNames()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    subs[name] = sub;
    for (const auto& [key, text] : keys) sub->add_option("--" + key, flags[key], text);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    std::string name;
    for (const auto& [n, sub] : subs) {
      if (sub->parsed()) name = n;
    }
    auto cfg = ExperimentConfig::defaults(name);
    if (!configFile.empty()) {
      std::ifstream in(configFile);
      std::stringstream text;
      text << in.rdbuf();
      cfg.apply(KeyValueConfig::parse(text.str()));
    }
    for (const auto& [key, value] : flags) {
      if (value.empty()) continue;
      std::string k = key;
      std::replace(k.begin(), k.end(), '-', '_');
      cfg.set(k, value);
    }
    cfg.validate();
    if (name != "verify") {
      fs::create_directories(cfg.out);
      std::ofstream(fs::path(cfg.out) / (name + ".conf")) << cfg.canonical();
    }
    if (name == "verify") return runVerify(cfg);
    if (name == "phase-diagram") return runPhaseDiagram(cfg);
    if (name == "speed-curve") return runSpeedCurve(cfg);
    if (name == "coupling") return runCoupling(cfg);
    if (name == "green") return runGreen(cfg);
    return runSimulate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariant;
  } catch (const InsufficientData& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return kInsufficient;
  }
}
