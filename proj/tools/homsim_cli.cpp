// Batch driver: parses experiment configs, runs seeded simulations through the
// public library operations, and emits CSV/JSON data files.
//
// Exit codes: 0 ok, 2 config error, 3 numerical-tolerance violation.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "homsim/io.hpp"

namespace fs = std::filesystem;
using namespace homsim;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  int grid_j = 0;
  double cutoff_tol = 0.0;
};

json load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return json::object();
  std::ifstream in(opts.config_path);
  if (!in) throw ConfigError("cannot read config file " + opts.config_path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  return cfg;
}

double get_num(const json& cfg, const std::string& key, double fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return cfg.at(key).get<double>();
}

int get_int(const json& cfg, const std::string& key, int fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  return cfg.at(key).get<int>();
}

struct SignalSpec {
  std::string kind = "coherent";
  double beta = std::sqrt(3.0);
  double r = 0.0;
  int n = 0;
};

SignalSpec parse_signal(const json& cfg, SignalSpec def) {
  if (!cfg.contains("signal")) return def;
  const json& s = cfg.at("signal");
  if (!s.is_object()) throw ConfigError("'signal' must be an object");
  SignalSpec out = def;
  out.kind = s.value("kind", def.kind);
  out.beta = get_num(s, "beta", def.beta);
  out.r = get_num(s, "r", def.r);
  out.n = get_int(s, "n", def.n);
  if (out.kind != "coherent" && out.kind != "squeezed" && out.kind != "number" &&
      out.kind != "vacuum")
    throw ConfigError("unknown signal kind '" + out.kind + "'");
  return out;
}

FockVector build_signal(const SignalSpec& s, const TruncationPolicy& policy) {
  if (s.kind == "coherent") return coherent_state(cd(s.beta, 0.0), policy);
  if (s.kind == "squeezed") return squeezed_coherent_state(s.r, s.beta, policy);
  if (s.kind == "vacuum") return number_state(0, 8);
  return number_state(s.n);
}

std::string describe_signal(const SignalSpec& s) {
  if (s.kind == "coherent") return "coherent beta=" + format_double(s.beta);
  if (s.kind == "squeezed")
    return "squeezed r=" + format_double(s.r) + " beta=" + format_double(s.beta);
  if (s.kind == "vacuum") return "vacuum";
  return "number n=" + std::to_string(s.n);
}

double signal_x_span(const SignalSpec& s) {
  if (s.kind == "coherent") return default_x_span(s.beta, 0.0);
  if (s.kind == "squeezed") return default_x_span(s.beta, s.r);
  if (s.kind == "vacuum") return 6.0;
  return std::max(6.0, std::sqrt(2.0 * s.n + 1.0) + 3.0);
}

PhaseDistribution parse_prior(const json& cfg, const std::string& key, int J) {
  if (!cfg.contains(key)) return PhaseDistribution::uniform(J);
  const json& p = cfg.at(key);
  const std::string kind = p.value("kind", "uniform");
  if (kind == "uniform") return PhaseDistribution::uniform(J);
  if (kind == "table") {
    const auto vals = p.at("weights").get<std::vector<double>>();
    if (static_cast<int>(vals.size()) != J)
      throw ConfigError("'" + key + "' table must have grid_j entries");
    return PhaseDistribution::from_weights(
        Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
  }
  throw ConfigError("unknown prior kind '" + kind + "'");
}

TruncationPolicy make_policy(const CommonOpts& opts, const json& cfg) {
  TruncationPolicy policy;
  policy.tail_tolerance = opts.cutoff_tol > 0.0
                              ? opts.cutoff_tol
                              : get_num(cfg, "tail_tolerance", policy.tail_tolerance);
  return policy;
}

// seed fan-out to a small worker pool; each seed writes its own files
void for_each_seed(const std::vector<std::uint64_t>& seeds,
                   const std::function<void(std::uint64_t)>& fn) {
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(seeds.size())));
  if (workers == 1) {
    for (auto s : seeds) fn(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= seeds.size()) return;
        try {
          fn(seeds[i]);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

int cmd_povm(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const TruncationPolicy policy = make_policy(opts, cfg);
  const double alpha = get_num(cfg, "alpha", std::sqrt(15.0));
  const double phi = get_num(cfg, "phi", 0.0);
  const double mass_tol = get_num(cfg, "mass_tolerance", 1e-10);
  const SignalSpec sig = parse_signal(cfg, SignalSpec{"vacuum", 0.0, 0.0, 0});
  const DensityOperator rho = DensityOperator::from_pure(build_signal(sig, policy));

  const BeamSplitterPOVM povm =
      build_povm(alpha, phi, rho.cutoff(), mass_tol, signal_x_span(sig), policy);
  povm.validate();
  const QuadratureDistribution dist = quadrature_distribution(rho, povm);

  fs::create_directories(opts.out_dir);
  write_distribution_csv(fs::path(opts.out_dir) / "povm_dist.csv", dist,
                         {"alpha=" + format_double(alpha) + " phi=" + format_double(phi),
                          "signal=" + describe_signal(sig),
                          "omitted_mass=" + format_double(povm.omitted_mass())});
  std::cout << "povm: dn window [" << povm.grid().dn_min << ", " << povm.grid().dn_max
            << "], omitted mass " << format_double(povm.omitted_mass()) << "\n";
  return 0;
}

int cmd_fig2(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const TruncationPolicy policy = make_policy(opts, cfg);
  const double alpha = get_num(cfg, "alpha", std::sqrt(15.0));
  const int M = get_int(cfg, "M", 10000);
  const int J = opts.grid_j > 0 ? opts.grid_j : get_int(cfg, "grid_j", 720);
  const int baseline_resamples = get_int(cfg, "baseline_resamples", 200);
  const SignalSpec sig =
      parse_signal(cfg, SignalSpec{"squeezed", std::sqrt(3.0) * std::exp(-1.0), -1.0, 0});
  if (M < 1) throw ConfigError("M must be >= 1");

  const DensityOperator rho = DensityOperator::from_pure(build_signal(sig, policy));
  const BeamSplitterPOVM povm = build_povm(alpha, 0.0, rho.cutoff(),
                                           get_num(cfg, "mass_tolerance", 1e-10),
                                           signal_x_span(sig), policy);
  const QuadraturePhaseSeries series(rho, povm);
  const PhaseLikelihoodTable table(series, J);
  const PhaseDistribution prior = PhaseDistribution::uniform(J);

  fs::create_directories(opts.out_dir);
  for_each_seed(opts.seeds, [&](std::uint64_t seed) {
    SampleOptions sample_opt;
    sample_opt.record_trace = false;
    SequentialRun run = run_sequential(table, prior, M, seed, sample_opt);
    run.record.alpha = alpha;
    run.record.signal = describe_signal(sig);
    run.record.prior = "uniform";

    const LocalizationSummary loc = localization_summary(run.trace);
    const double phi0 = loc.phi_modes.empty() ? 0.0 : loc.phi_modes.front();
    const Eigen::VectorXd prob = series.eval(phi0);
    const QuadratureDistribution model{povm.grid(), prob,
                                       prob * std::sqrt(2.0) * alpha};
    const EmpiricalMeasure emp = empirical_measure(run.record, povm.grid());
    const double tv = distance(emp, model).tv;
    const std::vector<double> baseline =
        resampling_tv_baseline(model, M, baseline_resamples, seed * 1000003 + 17);
    const double p95 = percentile(baseline, 0.95);

    const std::string stem = "fig2_seed" + std::to_string(seed);
    write_overlay_csv(fs::path(opts.out_dir) / (stem + "_overlay.csv"), model, emp,
                      {"seed=" + std::to_string(seed), "signal=" + describe_signal(sig),
                       "alpha=" + format_double(alpha) + " M=" + std::to_string(M),
                       "phi0=" + format_double(phi0)});
    json summary{{"seed", seed},
                 {"M", M},
                 {"alpha", alpha},
                 {"signal", describe_signal(sig)},
                 {"phi0_posterior_mode", phi0},
                 {"posterior_modes", loc.phi_modes},
                 {"posterior_width", loc.width},
                 {"mean_x", run.record.mean_x()},
                 {"tv_distance", tv},
                 {"tv_baseline_p95", p95},
                 {"within_baseline", tv < p95}};
    if (sig.kind == "coherent" || sig.kind == "squeezed") {
      const PhasePair est = estimate_phase_from_mean(run.record.mean_x(), sig.beta, sig.r);
      summary["phi0_from_mean"] = {est.phi_plus, est.phi_minus};
    }
    std::ofstream js = open_output(fs::path(opts.out_dir) / (stem + "_summary.json"));
    js << summary.dump(2) << "\n";
  });
  return 0;
}

int cmd_localize(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const TruncationPolicy policy = make_policy(opts, cfg);
  const double alpha = get_num(cfg, "alpha", std::sqrt(15.0));
  const int M = get_int(cfg, "M", 2000);
  const int J = opts.grid_j > 0 ? opts.grid_j : get_int(cfg, "grid_j", 720);
  const SignalSpec sig = parse_signal(cfg, SignalSpec{"coherent", std::sqrt(3.0), 0.0, 0});

  const DensityOperator rho = DensityOperator::from_pure(build_signal(sig, policy));
  const BeamSplitterPOVM povm = build_povm(alpha, 0.0, rho.cutoff(),
                                           get_num(cfg, "mass_tolerance", 1e-10),
                                           signal_x_span(sig), policy);
  const QuadraturePhaseSeries series(rho, povm);
  const PhaseLikelihoodTable table(series, J);
  const PhaseDistribution prior = parse_prior(cfg, "prior", J);

  fs::create_directories(opts.out_dir);
  for_each_seed(opts.seeds, [&](std::uint64_t seed) {
    SequentialRun run = run_sequential(table, prior, M, seed);
    run.record.alpha = alpha;
    run.record.signal = describe_signal(sig);
    run.record.prior = cfg.contains("prior") ? "table" : "uniform";
    const std::string stem = "localize_seed" + std::to_string(seed);
    std::ofstream js = open_output(fs::path(opts.out_dir) / (stem + "_record.json"));
    js << record_to_json(run.record).dump(2) << "\n";
    write_trace_csv(fs::path(opts.out_dir) / (stem + "_trace.csv"), run.trace,
                    {"seed=" + std::to_string(seed), "signal=" + describe_signal(sig)});
  });
  return 0;
}

ScenarioKind parse_kind(const std::string& s) {
  if (s == "common_source_cw") return ScenarioKind::CommonSourceCW;
  if (s == "common_source_pw") return ScenarioKind::CommonSourcePW;
  if (s == "independent_cw_lo") return ScenarioKind::IndependentCWLO;
  if (s == "independent_pw_lo") return ScenarioKind::IndependentPWLO;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

int cmd_tomo(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const TruncationPolicy policy = make_policy(opts, cfg);
  const int J = opts.grid_j > 0 ? opts.grid_j : get_int(cfg, "grid_j", 720);

  Scenario base;
  base.kind = parse_kind(cfg.value("scenario", "common_source_cw"));
  base.alpha = get_num(cfg, "alpha", std::sqrt(15.0));
  base.beta = get_num(cfg, "beta", std::sqrt(3.0));
  base.policy = policy;
  base.K = get_int(cfg, "K", 12);
  base.M = get_int(cfg, "M", 5000);
  base.mass_tolerance = get_num(cfg, "mass_tolerance", 1e-10);
  if (cfg.contains("theta")) base.theta = cfg.at("theta").get<std::vector<double>>();
  const SignalSpec sig = parse_signal(cfg, SignalSpec{"coherent", base.beta, 0.0, 0});
  base.beta = sig.beta;
  if (sig.kind == "coherent")
    base.operation = {SignalOperation::Kind::Identity, 0.0, 0};
  else if (sig.kind == "squeezed")
    base.operation = {SignalOperation::Kind::Squeeze, sig.r, 0};
  else
    base.operation = {SignalOperation::Kind::Number, 0.0, sig.n};
  base.lo_prior = parse_prior(cfg, "prior", J);
  base.signal_prior = parse_prior(cfg, "signal_prior", J);
  base.validate();

  WignerSettings wig;
  if (cfg.contains("wigner")) {
    const json& w = cfg.at("wigner");
    wig.extent = get_num(w, "extent", 0.0);
    wig.points = get_int(w, "points", 0);
    wig.k_max = get_num(w, "k_max", 0.0);
    wig.n_xi = get_int(w, "n_xi", 256);
  }

  const DensityOperator rho0 = base.signal_rho0();
  fs::create_directories(opts.out_dir);
  for_each_seed(opts.seeds, [&](std::uint64_t seed) {
    Scenario s = base;
    s.seed = seed;
    const QuadratureDataset ds = run_scenario(s);
    const std::string stem = "tomo_" + to_string(s.kind) + "_seed" + std::to_string(seed);
    for (std::size_t k = 0; k < ds.blocks.size(); ++k)
      write_dataset_block_csv(
          fs::path(opts.out_dir) / (stem + "_theta" + std::to_string(k) + ".csv"), ds.grid,
          ds.blocks[k], {"seed=" + std::to_string(seed)});
    const WignerGrid w = reconstruct_wigner(ds, wig);
    write_wigner_csv(fs::path(opts.out_dir) / (stem + "_wigner.csv"), w,
                     {"seed=" + std::to_string(seed)});
    const auto scores = score_references(
        w, {{"signal", rho0},
            {"coherent", DensityOperator::from_pure(coherent_state(cd(s.beta, 0.0), policy))},
            {"mixed", phase_averaged_laser_state(s.beta, policy)}});
    json summary{{"seed", seed},
                 {"scenario", to_string(s.kind)},
                 {"wigner_integral", w.integral()},
                 {"scores", json::array()}};
    for (const auto& sc : scores)
      summary["scores"].push_back({{"reference", sc.name},
                                   {"overlap", sc.overlap},
                                   {"normalized", sc.normalized},
                                   {"rotation", sc.rotation}});
    std::ofstream js = open_output(fs::path(opts.out_dir) / (stem + "_summary.json"));
    js << summary.dump(2) << "\n";
  });
  return 0;
}

int cmd_discriminate(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const std::string source = cfg.value("source", "cw");
  if (source != "cw" && source != "pw")
    throw ConfigError("'source' must be \"cw\" or \"pw\"");
  DiscriminationParams params;
  params.policy = make_policy(opts, cfg);
  params.alpha = get_num(cfg, "alpha", params.alpha);
  params.beta = get_num(cfg, "beta", params.beta);
  params.K = get_int(cfg, "K", params.K);
  params.M = get_int(cfg, "M", params.M);
  params.grid_j = opts.grid_j > 0 ? opts.grid_j : get_int(cfg, "grid_j", params.grid_j);
  if (params.K < 3) throw ConfigError("K must be >= 3 for reconstruction");

  fs::create_directories(opts.out_dir);
  for_each_seed(opts.seeds, [&](std::uint64_t seed) {
    const DiscriminationReport rep = discriminate_cw_pw(
        source == "cw" ? LaserKind::CW : LaserKind::PW, params, seed);
    std::ofstream js = open_output(fs::path(opts.out_dir) /
                                   ("discriminate_" + source + "_seed" +
                                    std::to_string(seed) + ".json"));
    js << report_to_json(rep).dump(2) << "\n";
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homodyne detection and tomography simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON experiment config");
    sub->add_option("--seed", opts.seeds, "simulation seed (repeatable)");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--grid-j", opts.grid_j, "phase grid size");
    sub->add_option("--cutoff-tol", opts.cutoff_tol, "Fock truncation tail tolerance");
  };
  CLI::App* povm = app.add_subcommand("povm", "POVM diagnostics and distribution dump");
  CLI::App* fig2 = app.add_subcommand("fig2", "empirical measure vs model overlay runs");
  CLI::App* localize = app.add_subcommand("localize", "sequential phase localization runs");
  CLI::App* tomo = app.add_subcommand("tomo", "tomography scenario runs");
  CLI::App* discriminate =
      app.add_subcommand("discriminate", "CW/PW laser source discrimination");
  for (auto* sub : {povm, fig2, localize, tomo, discriminate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  if (opts.seeds.empty()) opts.seeds = {1};
  try {
    if (povm->parsed()) return cmd_povm(opts);
    if (fig2->parsed()) return cmd_fig2(opts);
    if (localize->parsed()) return cmd_localize(opts);
    if (tomo->parsed()) return cmd_tomo(opts);
    if (discriminate->parsed()) return cmd_discriminate(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GridMismatchError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ToleranceError& e) {
    std::cerr << "tolerance violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
