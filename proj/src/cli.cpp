#include "dirspglm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dirspglm/error.hpp"
#include "dirspglm/inference.hpp"
#include "dirspglm/io.hpp"
#include "dirspglm/mcmc.hpp"
#include "dirspglm/ml_fit.hpp"
#include "dirspglm/sim.hpp"
#include "dirspglm/stats.hpp"

namespace dirspglm::cli {

namespace {

constexpr const char* kOrigin = "cli";
constexpr std::uint64_t kDefaultSeed = 20240101;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::invalid_input, kOrigin, msg); }

struct RunConfig {
  std::string command;

  // data
  std::string data, response = "y", covariates, support = "0,1,2,3,4,5";
  bool no_intercept = false;
  std::string link = "log";
  std::string mu0 = "mean";

  // mcmc
  int iters = 5000, burnin = 2000;
  double alpha = 1.0, rho = 1.0;
  std::string H = "empirical";
  std::string beta_update = "joint", fisher_mode = "frozen_at_init", f0_weights = "sum_to_one",
              f0_move = "componentwise", beta_truncation = "reject";

  // prediction
  std::string chain, y0, x, samples;
  double level = 0.95;

  // simulation
  int scenario = 1, n = 25, reps = 200, jobs = 1;
  std::string records, rule = "ratio_of_medians";

  std::string out;
  std::uint64_t seed = kDefaultSeed;
  bool timestamp = true;
};

template <class E>
E pick(const std::string& value, const std::string& what, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, v] : options)
    if (value == name) return v;
  fail("unknown " + what + " '" + value + "'");
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

SupportPtr parse_support(const RunConfig& c) {
  try {
    return make_support(io::parse_number_list(c.support, "--support"));
  } catch (const Error& e) {
    fail(std::string("invalid support: ") + e.what());
  }
}

io::CsvSpec csv_spec(const RunConfig& c) {
  io::CsvSpec spec;
  spec.response = c.response;
  spec.add_intercept = !c.no_intercept;
  if (!c.covariates.empty()) {
    std::stringstream ss(c.covariates);
    std::string name;
    while (std::getline(ss, name, ',')) spec.covariates.push_back(name);
  }
  return spec;
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) fail(flag + " is required");
  if (!std::filesystem::exists(path)) fail(flag + " file '" + path + "' does not exist");
}

double resolve_mu0(const RunConfig& c, const Dataset& data) {
  if (c.mu0 == "mean") return data.y.mean();
  if (c.mu0 == "median") return stats::median(std::vector<double>(data.y.data(), data.y.data() + data.n()));
  return io::parse_number_list(c.mu0, "--mu0").at(0);
}

void validate_mu0_text(const std::string& s) {
  if (s == "mean" || s == "median") return;
  if (io::parse_number_list(s, "--mu0").size() != 1) fail("--mu0 takes one value");
}

McmcConfig mcmc_config(const RunConfig& c) {
  McmcConfig m;
  m.n_iter = c.iters;
  m.burn_in = c.burnin;
  m.alpha = c.alpha;
  m.rho = c.rho;
  m.beta_update = pick<BetaUpdate>(c.beta_update, "beta update",
                                   {{"joint", BetaUpdate::joint}, {"one_at_a_time", BetaUpdate::one_at_a_time}});
  m.fisher_mode = pick<FisherMode>(c.fisher_mode, "Fisher mode",
                                   {{"frozen_at_init", FisherMode::frozen_at_init},
                                    {"recomputed", FisherMode::recomputed}});
  m.f0_weight_scale = pick<WeightScale>(c.f0_weights, "f0 weight scale",
                                        {{"sum_to_one", WeightScale::sum_to_one},
                                         {"sum_to_n", WeightScale::sum_to_n}});
  m.f0_move = pick<F0Move>(c.f0_move, "f0 move",
                           {{"componentwise", F0Move::componentwise}, {"whole_vector", F0Move::whole_vector}});
  m.beta_truncation = pick<BetaTruncation>(c.beta_truncation, "beta truncation",
                                           {{"reject", BetaTruncation::reject}, {"redraw", BetaTruncation::redraw}});
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  if (c.out.empty()) fail("--out is required");
  if (c.n < 1) fail("--n must be positive");
  const SimScenario scenario = SimScenario::from_id(c.scenario);
  RngStream rng(c.seed, 0);
  const Dataset data = simulate_dataset(c.n, scenario, rng);
  io::write_atomic(c.out, io::dataset_csv(data));
  out << "wrote " << data.n() << " rows to " << c.out << '\n';
  return 0;
}

int cmd_fit_bayes(const RunConfig& c, std::ostream& out) {
  require_file(c.data, "--data");
  const SupportPtr support = parse_support(c);
  const LinkSpec link = LinkSpec::parse(c.link);
  validate_mu0_text(c.mu0);
  McmcConfig mc = mcmc_config(c);
  const CenteringMode hmode =
      pick<CenteringMode>(c.H, "H mode", {{"empirical", CenteringMode::empirical}, {"uniform", CenteringMode::uniform}});
  const std::string chain_path = c.out.empty() ? "chain.csv" : c.out;

  const io::CsvSpec spec = csv_spec(c);
  const Dataset data = io::load_csv(c.data, spec, support);
  mc.H = centering_distribution(data, hmode);
  mc.mu0 = resolve_mu0(c, data);
  const ReferenceMean ref(*support, *mc.mu0);

  std::optional<ChainInit> init;
  try {
    const MlFit ml = fit_ml(data, link, ref);
    if (ml.converged && in_constraint_set(data, link, ml.beta_hat)) init = ChainInit{ml.beta_hat, {}};
  } catch (const Error&) {
    // Fall back to the default start.
  }
  RngStream rng(c.seed, 0);
  const PosteriorChain chain = run_chain(data, link, mc, rng, init);

  io::write_atomic(chain_path, io::chain_csv(chain));
  io::write_atomic(io::sidecar_path(chain_path),
                   io::chain_summary(chain, c.timestamp ? iso_timestamp() : "").dump(2) + "\n");

  const auto names = io::design_names(c.data, spec);
  out << "param,mean,median,sd,lower,upper\n";
  const auto summary = posterior_summaries(chain, c.level);
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    std::string name = s.name;
    if (i < names.size()) name += "[" + names[i] + "]";
    out << name << ',' << io::fmt6(s.mean) << ',' << io::fmt6(s.median) << ',' << io::fmt6(s.sd) << ','
        << io::fmt6(s.lower) << ',' << io::fmt6(s.upper) << '\n';
  }
  out << "acceptance,beta=" << io::fmt6(chain.beta_stats.rate()) << ",f0=" << io::fmt6(chain.f0_stats.rate())
      << '\n';
  return 0;
}

int cmd_fit_ml(const RunConfig& c, std::ostream& out) {
  require_file(c.data, "--data");
  const SupportPtr support = parse_support(c);
  const LinkSpec link = LinkSpec::parse(c.link);
  validate_mu0_text(c.mu0);
  const io::CsvSpec spec = csv_spec(c);
  const Dataset data = io::load_csv(c.data, spec, support);
  const double mu0 = resolve_mu0(c, data);
  const MlFit fit = fit_ml(data, link, ReferenceMean(*support, mu0));
  if (!c.out.empty()) io::write_atomic(c.out, io::ml_fit_json(fit, mu0).dump(2) + "\n");

  const auto names = io::design_names(c.data, spec);
  out << "param,estimate,lower,upper\n";
  if (fit.converged) {
    const auto ci = wald_ci(fit, c.level);
    for (std::size_t j = 0; j < ci.size(); ++j)
      out << "beta_" << j << '[' << names[j] << "]," << io::fmt6(ci[j].estimate) << ',' << io::fmt6(ci[j].lower)
          << ',' << io::fmt6(ci[j].upper) << '\n';
  } else {
    for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j)
      out << "beta_" << j << '[' << names[static_cast<std::size_t>(j)] << "]," << io::fmt6(fit.beta_hat[j])
          << ",NA,NA\n";
  }
  for (std::size_t l = 0; l < fit.f0_hat.size(); ++l)
    out << "f0_" << l << ',' << io::fmt6(fit.f0_hat[l]) << ",NA,NA\n";
  out << "loglik," << io::fmt6(fit.loglik) << ",converged," << (fit.converged ? "true" : "false") << '\n';
  return fit.converged ? 0 : 3;
}

int cmd_predict(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_file(c.chain, "--chain");
  require_file(io::sidecar_path(c.chain).string(), "chain sidecar");
  if (c.y0.empty()) fail("--y0 is required");
  if (c.x.empty()) fail("--x is required");
  if (!(c.level > 0.0 && c.level < 1.0)) fail("--level must lie in (0,1)");
  const auto y0s = io::parse_number_list(c.y0, "--y0");
  const auto xs = io::parse_number_list(c.x, "--x");
  const PosteriorChain chain = io::read_chain(c.chain);
  if (static_cast<Eigen::Index>(xs.size()) != chain.beta.cols())
    fail("--x has " + std::to_string(xs.size()) + " entries but the chain has " +
         std::to_string(chain.beta.cols()) + " coefficients");

  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  std::vector<FunctionalPosterior> results;
  for (double y0 : y0s) {
    results.push_back(exceedance_posterior(chain, {y0, x}, c.level, Execution::parallel));
    if (results.back().needs_warning())
      err << "warning: " << io::fmt6(100.0 * results.back().boundary_fraction())
          << "% of draws put the mean on the support boundary for y0 = " << io::fmt6(y0) << '\n';
  }
  const std::string table = io::prediction_csv(y0s, results);
  if (!c.out.empty()) io::write_atomic(c.out, table);
  if (!c.samples.empty()) io::write_atomic(c.samples, io::samples_csv(results.front().samples));
  out << table;
  return 0;
}

int cmd_replicate(const RunConfig& c, std::ostream& out) {
  ReplicationConfig rc;
  rc.scenario = SimScenario::from_id(c.scenario);
  if (c.n < 2) fail("--n must be at least 2");
  if (c.reps < 1) fail("--reps must be positive");
  if (c.jobs < 1) fail("--jobs must be positive");
  rc.n = c.n;
  rc.R = c.reps;
  rc.jobs = c.jobs;
  rc.seed = c.seed;
  rc.level = c.level;
  rc.mcmc = mcmc_config(c);
  rc.relative_rule = pick<RelativeRule>(c.rule, "relative rule",
                                        {{"ratio_of_medians", RelativeRule::ratio_of_medians},
                                         {"median_of_ratios", RelativeRule::median_of_ratios}});
  const ReplicationResult res = run_replication(rc);

  std::ostringstream metrics;
  write_metrics_csv(metrics, res.metrics);
  if (!c.out.empty()) io::write_atomic(c.out, metrics.str());
  if (!c.records.empty()) {
    std::ostringstream recs;
    write_records_csv(recs, res.records);
    io::write_atomic(c.records, recs.str());
  }
  out << metrics.str();
  out << "failures," << res.failures << ",attempted," << res.attempted << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Parsing

void add_data_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--data", c.data, "Input CSV");
  sub->add_option("--response", c.response, "Response column")->capture_default_str();
  sub->add_option("--covariates", c.covariates, "Comma-separated covariate columns (default: all others)");
  sub->add_flag("--no-intercept", c.no_intercept, "Do not prepend an intercept column");
  sub->add_option("--support", c.support, "Comma-separated support scores")->capture_default_str();
  sub->add_option("--link", c.link, "log or identity")->capture_default_str();
  sub->add_option("--mu0", c.mu0, "Reference mean: mean, median, or a number")->capture_default_str();
  sub->add_option("--level", c.level, "Interval level")->capture_default_str();
}

void add_mcmc_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--iters", c.iters, "Total MCMC iterations")->capture_default_str();
  sub->add_option("--burnin", c.burnin, "Burn-in iterations")->capture_default_str();
  sub->add_option("--alpha", c.alpha, "Dirichlet concentration")->capture_default_str();
  sub->add_option("--rho", c.rho, "Proposal scale in (0,1]")->capture_default_str();
  sub->add_option("--H", c.H, "Centering distribution: empirical or uniform")->capture_default_str();
  sub->add_option("--beta-update", c.beta_update, "joint or one_at_a_time")->capture_default_str();
  sub->add_option("--fisher-mode", c.fisher_mode, "frozen_at_init or recomputed")->capture_default_str();
  sub->add_option("--f0-weights", c.f0_weights, "sum_to_one or sum_to_n")->capture_default_str();
  sub->add_option("--f0-move", c.f0_move, "componentwise or whole_vector")->capture_default_str();
  sub->add_option("--beta-truncation", c.beta_truncation, "reject or redraw")->capture_default_str();
}

struct Parsed {
  std::unique_ptr<CLI::App> app;
  std::map<std::string, CLI::App*> subs;
  CLI::Option* seed_opt = nullptr;
};

Parsed build(RunConfig& c, std::string& config_path) {
  Parsed p;
  p.app = std::make_unique<CLI::App>("Semiparametric GLM fitting with a Dirichlet prior on the baseline", "dirspglm");
  p.app->require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", c.out, "Output path");
    sub->add_option("--config", config_path, "key = value config file; flags override it");
    sub->add_option("--seed", c.seed, "Random seed (default: $DIRSPGLM_SEED or 20240101)");
    sub->add_flag("!--no-timestamp", c.timestamp, "Omit the timestamp from JSON sidecars");
  };

  auto* sim = p.app->add_subcommand("simulate", "Simulate a dataset from a scenario");
  sim->add_option("--scenario", c.scenario, "1 or 2")->capture_default_str();
  sim->add_option("--n", c.n, "Sample size")->capture_default_str();
  common(sim);

  auto* bayes = p.app->add_subcommand("fit-bayes", "Run the posterior sampler and write a chain");
  add_data_options(bayes, c);
  add_mcmc_options(bayes, c);
  common(bayes);

  auto* ml = p.app->add_subcommand("fit-ml", "Maximum likelihood fit");
  add_data_options(ml, c);
  common(ml);

  auto* pred = p.app->add_subcommand("predict-exceedance", "Posterior exceedance probabilities from a chain");
  pred->add_option("--chain", c.chain, "Chain CSV (sidecar JSON alongside)");
  pred->add_option("--y0", c.y0, "Threshold(s), comma-separated");
  pred->add_option("--x", c.x, "Covariate vector including the intercept, comma-separated");
  pred->add_option("--level", c.level, "Interval level")->capture_default_str();
  pred->add_option("--samples", c.samples, "Write per-draw values for the first threshold here");
  common(pred);

  auto* rep = p.app->add_subcommand("replicate", "Replicated simulation study");
  rep->add_option("--scenario", c.scenario, "1 or 2")->capture_default_str();
  rep->add_option("--n", c.n, "Sample size per replicate")->capture_default_str();
  rep->add_option("--reps", c.reps, "Number of replicates")->capture_default_str();
  rep->add_option("--jobs", c.jobs, "Parallel workers")->capture_default_str();
  rep->add_option("--records", c.records, "Per-replicate record CSV");
  rep->add_option("--rule", c.rule, "ratio_of_medians or median_of_ratios")->capture_default_str();
  rep->add_option("--level", c.level, "Interval level")->capture_default_str();
  add_mcmc_options(rep, c);
  common(rep);

  p.subs = {{"simulate", sim}, {"fit-bayes", bayes}, {"fit-ml", ml}, {"predict-exceedance", pred},
            {"replicate", rep}};
  return p;
}

std::string flag_name(const std::string& arg) {
  if (arg.rfind("--", 0) != 0) return {};
  const auto eq = arg.find('=');
  return arg.substr(0, eq);
}

// Appends `--key=value` for every config entry not already given on the
// command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  if (!std::filesystem::exists(path)) fail("--config file '" + path + "' does not exist");
  std::set<std::string> given;
  for (const auto& a : args) given.insert(flag_name(a));
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : io::parse_config(io::read_file(path))) {
    if (key == "config" || given.count("--" + key)) continue;
    merged.push_back("--" + key + "=" + value);
  }
  return merged;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& origin, const std::string& msg) {
  nlohmann::json j{{"kind", kind}, {"origin", origin}, {"message", msg}};
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const std::vector<std::string> merged = merge_config(args);
    RunConfig c;
    std::string config_path;
    Parsed p = build(c, config_path);
    try {
      std::vector<std::string> rev(merged.rbegin(), merged.rend());
      p.app->parse(rev);
    } catch (const CLI::CallForHelp&) {
      out << p.app->help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << p.app->help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      print_error(err, "invalid_input", kOrigin, e.what());
      return 2;
    }

    for (const auto& [name, sub] : p.subs) {
      if (!sub->parsed()) continue;
      c.command = name;
      if (sub->count("--seed") == 0) {
        if (const char* env = std::getenv("DIRSPGLM_SEED")) {
          try {
            c.seed = std::stoull(env);
          } catch (const std::exception&) {
            fail("DIRSPGLM_SEED is not an unsigned integer");
          }
        }
      }
    }

    if (c.command == "simulate") return cmd_simulate(c, out);
    if (c.command == "fit-bayes") return cmd_fit_bayes(c, out);
    if (c.command == "fit-ml") return cmd_fit_ml(c, out);
    if (c.command == "predict-exceedance") return cmd_predict(c, out, err);
    if (c.command == "replicate") return cmd_replicate(c, out);
    fail("no command given");
  } catch (const Error& e) {
    print_error(err, std::string(to_string(e.kind())), e.origin(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", kOrigin, e.what());
    return 1;
  }
}

}  // namespace dirspglm::cli
