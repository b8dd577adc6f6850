#include "klgauss/cli.hpp"

#include "klgauss/catalog.hpp"
#include "klgauss/gamma.hpp"
#include "klgauss/inverse.hpp"
#include "klgauss/optimizer.hpp"
#include "klgauss/parallel.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace klgauss {

namespace {

using json = nlohmann::json;

constexpr unsigned long long kDefaultSeed = 20170101;

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

json mode_set_json(const std::string& name, const ModeSet& ms) {
  json modes = json::array(), hessians = json::array();
  for (int i = 0; i < ms.size(); ++i) {
    modes.push_back(vector_json(ms.modes[i]));
    hessians.push_back(matrix_json(ms.hessians[i]));
  }
  return {{"problem", name},
          {"dim", ms.dim()},
          {"modes", modes},
          {"hessians", hessians},
          {"v2", ms.v2_values},
          {"beta_raw", ms.raw_weights},
          {"beta", vector_json(ms.weights)}};
}

struct Options {
  std::string problem;
  double eps = 0.0;
  std::vector<double> eps_list;
  std::string family = "single";
  int n = 2;
  double xi1 = MixtureConstraints{}.min_weight;
  double xi2 = MixtureConstraints{}.min_separation;
  std::optional<int> draws;
  std::optional<unsigned long long> seed;
  std::string out;
  std::string estimator = "gh";
  std::string logz = "laplace";
  std::string config;
  int jobs = 0;
  bool verbose = false;
};

// Writes to --out when given, otherwise to the command's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw std::invalid_argument("cannot open output file '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

OptimizerConfig optimizer_config(const Options& o) {
  OptimizerConfig cfg;
  cfg.seed = o.seed.value_or(kDefaultSeed);
  cfg.verbose = o.verbose;
  EstimatorMethod m;
  if (o.estimator == "gh") {
    m = EstimatorMethod::gauss_hermite;
  } else if (o.estimator == "mc") {
    m = EstimatorMethod::monte_carlo;
  } else {
    throw std::invalid_argument("unknown estimator '" + o.estimator + "' (expected gh or mc)");
  }
  cfg.estimator.expectation = m;
  cfg.estimator.entropy = m;
  cfg.estimator.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

MixtureConstraints constraints(const Options& o) {
  MixtureConstraints xi;
  xi.min_weight = o.xi1;
  xi.min_separation = o.xi2;
  return xi;
}

Problem problem_of(const Options& o) {
  if (o.problem.empty()) throw std::invalid_argument("--problem is required");
  Problem p = load_problem(o.problem);
  if (o.seed) p.search.seed = *o.seed;
  return p;
}

int cmd_modes(const Options& o, std::ostream& out) {
  const Problem p = problem_of(o);
  const ModeSet ms = p.modes();
  Sink sink(o.out, out);
  sink.get() << mode_set_json(p.name, ms).dump(2) << '\n';
  return exit_ok;
}

int cmd_approx(const Options& o, std::ostream& out) {
  if (!(o.eps > 0.0)) throw std::invalid_argument("--eps must be positive");
  const Family family = parse_family(o.family);
  const LogZMethod logz = parse_logz(o.logz);
  const OptimizerConfig cfg = optimizer_config(o);
  const Problem p = problem_of(o);
  const ModeSet ms = p.modes();
  const TargetMeasure mu = p.measure(o.eps);
  const double log_z = log_normalization(mu, ms, logz);

  json result;
  bool converged = false;
  if (family == Family::single) {
    const SingleResult r = minimize_single(mu, log_z, cfg, &ms, nullptr);
    result = to_json(r, o.eps, o.verbose);
    converged = r.converged;
  } else {
    const MixtureResult r = minimize_mixture(mu, log_z, o.n, constraints(o), cfg, &ms, nullptr);
    result = to_json(r, o.eps, o.verbose);
    converged = r.converged;
  }
  result["problem"] = p.name;
  result["log_z"] = log_z;
  result["logz_method"] = to_string(logz);
  Sink sink(o.out, out);
  sink.get() << result.dump(2) << '\n';
  return converged ? exit_ok : exit_not_converged;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  SweepConfig cfg;
  cfg.family = parse_family(o.family);
  cfg.n = o.n;
  cfg.xi = constraints(o);
  cfg.log_z = parse_logz(o.logz);
  cfg.optimizer = optimizer_config(o);
  const Problem p = problem_of(o);
  const SweepResult r = sweep(p, o.eps_list, cfg);
  Sink sink(o.out, out);
  write_sweep_csv(sink.get(), r);
  for (const auto& rec : r.records)
    if (!rec.converged) return exit_not_converged;
  return exit_ok;
}

int cmd_bvm(const Options& o, std::ostream& out) {
  std::ifstream in(o.config);
  if (!in) throw std::invalid_argument("cannot read config file '" + o.config + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  BvMConfig cfg = bvm_config_from_json(json::parse(buf.str()));
  if (o.draws) cfg.draws = *o.draws;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.optimizer.seed = *o.seed;
  }
  cfg.validate();
  const BvMResult r = bvm_experiment(cfg);
  Sink sink(o.out, out);
  write_bvm_csv(sink.get(), r);
  return r.aborted() ? exit_aborted : exit_ok;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Random seed (default 20170101)");
  cmd->add_option("--out", o.out, "Output file (default: standard output)");
  cmd->add_option("--jobs", o.jobs, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
}

void add_optimizer(CLI::App* cmd, Options& o) {
  cmd->add_option("--family", o.family, "single or mixture")->check(CLI::IsMember({"single", "mixture"}));
  cmd->add_option("--n", o.n, "Mixture components");
  cmd->add_option("--xi1", o.xi1, "Minimum mixture weight");
  cmd->add_option("--xi2", o.xi2, "Minimum mean separation");
  cmd->add_option("--estimator", o.estimator, "gh or mc")->check(CLI::IsMember({"gh", "mc"}));
  cmd->add_option("--logz", o.logz, "laplace or quadrature")->check(CLI::IsMember({"laplace", "quadrature"}));
  cmd->add_flag("--verbose", o.verbose, "Include per-start traces");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Best Gaussian and Gaussian-mixture approximations of concentrating measures", "klgauss"};
  app.require_subcommand(1);

  CLI::App* modes = app.add_subcommand("modes", "Locate the modes of the limit potential");
  modes->add_option("--problem", o.problem, "Builtin problem name or JSON file")->required();
  add_common(modes, o);

  CLI::App* approx = app.add_subcommand("approx", "Minimize the KL divergence at one eps");
  approx->add_option("--problem", o.problem, "Builtin problem name or JSON file")->required();
  approx->add_option("--eps", o.eps, "Concentration parameter")->required();
  add_optimizer(approx, o);
  add_common(approx, o);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run the optimizer along a decreasing eps list");
  sweep_cmd->add_option("--problem", o.problem, "Builtin problem name or JSON file")->required();
  sweep_cmd->add_option("--eps-list", o.eps_list, "Comma-separated eps values")->required()->delimiter(',');
  add_optimizer(sweep_cmd, o);
  add_common(sweep_cmd, o);

  CLI::App* bvm = app.add_subcommand("bvm", "Run the posterior-contraction experiment");
  bvm->add_option("config", o.config, "JSON experiment config")->required();
  bvm->add_option("--draws", o.draws, "Noise draws per eps (overrides the config)");
  add_common(bvm, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return exit_ok;
    }
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }

  try {
    if (o.jobs > 0) set_worker_count(o.jobs);
    if (modes->parsed()) return cmd_modes(o, out);
    if (approx->parsed()) return cmd_approx(o, out);
    if (sweep_cmd->parsed()) return cmd_sweep(o, out);
    return cmd_bvm(o, out);
  } catch (const DegenerateModeError& e) {
    err << "degenerate problem: " << e.what() << '\n';
    return exit_degenerate;
  } catch (const ModeSearchError& e) {
    err << "mode search failed: " << e.what() << '\n';
    return exit_degenerate;
  } catch (const json::exception& e) {
    err << "invalid JSON: " << e.what() << '\n';
    return exit_invalid;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return exit_invalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }
}

}  // namespace klgauss
