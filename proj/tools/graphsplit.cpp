// graphsplit command-line front end: validate, gen-scheme, solve, benchmark.
// Exit codes: 0 success, 1 validation or assertion failure, 2 input error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "graphsplit/io.hpp"

using namespace graphsplit;
namespace fs = std::filesystem;

namespace {

struct InputError : Error {
  using Error::Error;
};

json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_flag(const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); }

json optional_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<double> broadcast(const std::vector<double>& v, int count, double fallback, const char* name) {
  if (v.empty()) return std::vector<double>(count, fallback);
  if (v.size() == 1) return std::vector<double>(count, v[0]);
  if (static_cast<int>(v.size()) != count)
    throw InputError(std::string("--") + name + " needs 1 or " + std::to_string(count) + " values");
  return v;
}

void emit(const json& j, const std::string& out) {
  std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_text_file(out, text);
}

// ---- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string scheme_path;
  int psd_level = 0;
  std::vector<double> ell, l_norm;
  long d = 1;
  std::string regime = "auto";
};

int cmd_validate(const ValidateArgs& a) {
  CoefficientScheme s = scheme_from_json(read_json_file(a.scheme_path));
  auto ell = broadcast(a.ell, s.p, 1.0, "ell");
  auto norms = broadcast(a.l_norm, s.r, 1.0, "l-norm");
  if (a.d < 1) throw InputError("--d must be positive");

  json rep;
  auto st = validate_standing(s, s.r > 0, s.p > 0);
  rep["standing"] = {{"ker_M", st.ker_M}, {"sum_N", st.sum_N}, {"PR", st.PR},  {"HK", st.HK},
                     {"Q_sum", st.Q_sum}, {"all", st.all()},    {"messages", st.messages}};
  auto ex = check_explicit(s);
  rep["explicit"] = ex.is_explicit;

  Regime regime = a.regime == "lipschitz"                       ? Regime::lipschitz
                  : a.regime == "cocoercive"                    ? Regime::cocoercive
                  : (s.p > 0 && !s.Q.isZero(0.0))               ? Regime::lipschitz
                                                                : Regime::cocoercive;
  rep["regime"] = to_string(regime);
  rep["gamma"] = s.gamma;
  bool steps_ok = false;
  try {
    double tau = compute_tau(compute_UW(s), ell, regime);
    StepBounds sb(tau, norms, regime);
    rep["tau"] = tau;
    rep["gamma_max"] = optional_number(sb.gamma_max());
    steps_ok = s.gamma > 0 && s.gamma < sb.gamma_max();
    rep["eta_max"] = steps_ok ? optional_number(sb.eta_max(s.gamma)) : json(nullptr);
    rep["lambda_max"] = steps_ok ? optional_number(sb.lambda_max(s.gamma)) : json(nullptr);
  } catch (const SchemeError& e) {
    rep["tau"] = nullptr;
    rep["step_error"] = e.what();
  }
  rep["gamma_in_range"] = steps_ok;

  std::vector<LinearMap> L;
  for (double nrm : norms) L.emplace_back(Matrix(nrm * Matrix::Identity(a.d, a.d)), nrm);
  PsdReport psd = validate_psd(s, L, ell, a.d);
  rep["psd"] = {{"exact", psd.exact},
                {"A320", optional_flag(psd.A320)},
                {"A321", optional_flag(psd.A321)},
                {"A322", optional_flag(psd.A322)},
                {"min_eig_320", optional_value(psd.min_eig_320)},
                {"min_eig_321", optional_value(psd.min_eig_321)},
                {"min_eig_322", optional_value(psd.min_eig_322)}};
  rep["psd_level"] = a.psd_level;
  auto level = psd.level(a.psd_level);
  bool passed = st.all() && level.value_or(false);
  rep["passed"] = passed;
  emit(rep, "");
  return passed ? 0 : 1;
}

// ---- gen-scheme -----------------------------------------------------------

struct GenArgs {
  std::string family, graph_path, out;
  int n = 0, r = -1, p = -1;
  double gamma = 0.5, eta = 1.0;
  std::optional<double> kappa;
};

int cmd_gen_scheme(const GenArgs& a) {
  CoefficientScheme s;
  if (!a.graph_path.empty()) {
    GraphSpec g = graph_from_json(read_json_file(a.graph_path));
    int r = a.r < 0 ? g.n - 1 : a.r, p = a.p < 0 ? g.n - 1 : a.p;
    auto onto = onto_decomposition(g);
    s = scheme_from_graph(g, a.kappa, a.gamma, a.eta, r, p);
    std::fprintf(stderr, "onto decomposition: %s, |MM^T - Lap| = %.3g\n", to_string(onto.source),
                 (s.M * s.M.transpose() - laplacian(g, true)).cwiseAbs().maxCoeff());
  } else {
    if (a.family.empty() || a.n < 2) throw InputError("gen-scheme needs --graph or --family with --n >= 2");
    int r = a.r < 0 ? a.n - 1 : a.r, p = a.p < 0 ? a.n - 1 : a.p;
    s = scheme_by_name(a.family, a.n, r, p, a.gamma, a.eta);
  }
  emit(scheme_to_json(s), a.out);
  return 0;
}

// ---- solve ----------------------------------------------------------------

struct InstanceArgs {
  std::string dir;
  std::uint64_t seed = 0;
  int n = 5, m = 50, k = 10;
  long d = 200;
  double mu = 15.0, nu = 5.0, noise_var = 1e-3;

  FusedLassoInstance make() const {
    if (!dir.empty()) return load_instance(dir);
    InstanceParams p;
    p.seed = seed;
    p.n = n;
    p.m = m;
    p.d = d;
    p.k_nonzero = k;
    p.mu = mu;
    p.nu = nu;
    p.noise_var = noise_var;
    try {
      return gen_instance(p);
    } catch (const Error& e) {
      throw InputError(e.what());
    }
  }
};

void add_instance_flags(CLI::App* app, InstanceArgs& ia) {
  app->add_option("--instance", ia.dir, "instance directory (meta.json, A.csv, b.csv)");
  app->add_option("--seed", ia.seed, "seed for a generated instance");
  app->add_option("--agents", ia.n, "agents of a generated instance")->check(CLI::PositiveNumber);
  app->add_option("--m", ia.m, "rows of a generated instance")->check(CLI::PositiveNumber);
  app->add_option("--d", ia.d, "dimension of a generated instance")->check(CLI::Range(2L, 1L << 30));
  app->add_option("--k", ia.k, "nonzeros of x_true")->check(CLI::NonNegativeNumber);
  app->add_option("--mu", ia.mu, "l1 weight per agent")->check(CLI::NonNegativeNumber);
  app->add_option("--nu", ia.nu, "total variation weight per agent")->check(CLI::NonNegativeNumber);
  app->add_option("--noise-var", ia.noise_var)->check(CLI::NonNegativeNumber);
}

struct SolveArgs {
  InstanceArgs inst;
  std::string family = "sequential", scheme_path, out;
  double gamma_hat = 0.5, eta_hat = 0.1, lambda_hat = 0.9;
  double tol = 1e-6;
  long max_iters = 20000, record_every = 1;
};

int cmd_solve(const SolveArgs& a) {
  FusedLassoInstance inst = a.inst.make();
  ProblemInstance prob = to_problem(inst);
  CoefficientScheme scheme;
  double lambda;
  if (!a.scheme_path.empty()) {
    scheme = scheme_from_json(read_json_file(a.scheme_path));
    lambda = a.lambda_hat * Solver(scheme, prob).lambda_max();
  } else {
    FamilyRun fr = configure_family(a.family, prob, a.gamma_hat, a.eta_hat, a.lambda_hat);
    scheme = fr.scheme;
    lambda = fr.lambda;
  }
  Solver solver(scheme, prob);
  SolveOptions opt;
  opt.max_iters = a.max_iters;
  opt.residual_tol = a.tol;
  opt.lambda = lambda;
  opt.record_every = a.record_every;
  opt.objective = [&inst](const Vector& x) { return inst.objective(x); };
  SolveReport rep = solver.solve(opt);
  auto cert = certify_solution(prob, rep.final_eval, rep.final.x[0], rep.dual_certificate, 1e-5);

  json summary = {{"family", scheme.family ? json(*scheme.family) : json(nullptr)},
                  {"gamma", scheme.gamma},
                  {"lambda", lambda},
                  {"tau", solver.tau()},
                  {"iterations", rep.iters_run},
                  {"converged", rep.converged},
                  {"final_residual", rep.final_residual},
                  {"objective", inst.objective(rep.final.x[0])},
                  {"consensus_gap", cert.consensus_gap},
                  {"inclusion_residual", cert.inclusion_residual}};
  if (!a.out.empty()) {
    write_text_file(fs::path(a.out) / "history.csv", history_csv(rep));
    write_text_file(fs::path(a.out) / "final.json", final_state_json(rep).dump(2) + "\n");
    write_text_file(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  }
  emit(summary, "");
  return rep.converged ? 0 : 1;
}

// ---- benchmark ------------------------------------------------------------

struct BenchArgs {
  InstanceArgs inst;
  std::string config_path, out;
  std::vector<std::string> families;
  std::optional<double> gamma_hat, eta_hat, lambda_hat, tol;
  std::optional<long> max_iters;
  int threads = 0;
  bool full_grid = false;
  double parity_tol = 1e-10;
  bool skip_parity = false;
};

void apply_config(const json& j, ExperimentConfig& cfg, InstanceArgs& ia, double& parity_tol) {
  try {
    if (j.contains("families")) cfg.families = j["families"].get<std::vector<std::string>>();
    if (j.contains("gamma_hats")) cfg.gamma_hats = j["gamma_hats"].get<std::vector<double>>();
    if (j.contains("eta_hats")) cfg.eta_hats = j["eta_hats"].get<std::vector<double>>();
    if (j.contains("lambda_hats")) cfg.lambda_hats = j["lambda_hats"].get<std::vector<double>>();
    cfg.base_gamma_hat = j.value("base_gamma_hat", cfg.base_gamma_hat);
    cfg.base_eta_hat = j.value("base_eta_hat", cfg.base_eta_hat);
    cfg.base_lambda_hat = j.value("base_lambda_hat", cfg.base_lambda_hat);
    cfg.full_grid = j.value("full_grid", cfg.full_grid);
    cfg.max_iters = j.value("max_iters", cfg.max_iters);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.record_every = j.value("record_every", cfg.record_every);
    cfg.threads = j.value("threads", cfg.threads);
    parity_tol = j.value("parity_tol", parity_tol);
    if (j.contains("instance")) {
      const json& in = j["instance"];
      ia.seed = in.value("seed", ia.seed);
      ia.n = in.value("n", ia.n);
      ia.m = in.value("m", ia.m);
      ia.d = in.value("d", ia.d);
      ia.k = in.value("k_nonzero", ia.k);
      ia.mu = in.value("mu", ia.mu);
      ia.nu = in.value("nu", ia.nu);
      ia.noise_var = in.value("noise_var", ia.noise_var);
      ia.dir = in.value("dir", ia.dir);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

int cmd_benchmark(BenchArgs a) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) apply_config(read_json_file(a.config_path), cfg, a.inst, a.parity_tol);
  if (!a.families.empty()) cfg.families = a.families;
  if (a.gamma_hat) cfg.base_gamma_hat = *a.gamma_hat;
  if (a.eta_hat) cfg.base_eta_hat = *a.eta_hat;
  if (a.lambda_hat) cfg.base_lambda_hat = *a.lambda_hat;
  if (a.tol) cfg.tol = *a.tol;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.full_grid) cfg.full_grid = true;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }

  FusedLassoInstance inst = a.inst.make();
  fs::path out(a.out);
  save_instance(inst, out / "instance");

  auto rows = run_grid(inst, cfg);
  write_text_file(out / "grid.csv", grid_csv(rows));
  write_text_file(out / "timing.csv", timing_csv(rows));
  bool hard_failure = false;
  for (const auto& r : rows) {
    if (r.status.rfind("error", 0) == 0) hard_failure = true;
    if (!r.curve.empty()) write_text_file(out / "curves" / curve_filename(r), curve_csv(r));
  }

  std::printf("%-10s %6s %6s %6s %10s %14s %18s  %s\n", "family", "g_hat", "e_hat", "l_hat", "iters",
              "residual", "objective", "status");
  for (const auto& r : rows)
    std::printf("%-10s %6g %6g %6g %10ld %14.4e %18.10g  %s\n", r.family.c_str(), r.gamma_hat, r.eta_hat,
                r.lambda_hat, r.iters_to_tol, r.final_residual, r.final_objective, r.status.c_str());

  json summary;
  summary["cells"] = rows.size();
  summary["tol"] = cfg.tol;
  json findings = json::array();
  for (const auto& f : cfg.families) {
    auto t = trend_findings(rows, cfg, f);
    findings.push_back({{"family", f},
                        {"best_gamma_hat", t.best_gamma_hat},
                        {"gamma_near_base", t.gamma_near_base},
                        {"lambda_decreasing", t.lambda_decreasing},
                        {"small_eta_best", t.small_eta_best}});
    std::printf("findings %-10s best gamma_hat %g (near base: %s), larger lambda_hat faster: %s, "
                "small eta_hat best: %s\n",
                f.c_str(), t.best_gamma_hat, t.gamma_near_base ? "yes" : "no",
                t.lambda_decreasing ? "yes" : "no", t.small_eta_best ? "yes" : "no");
  }
  summary["findings"] = findings;

  bool parity_ok = true;
  if (!a.skip_parity) {
    auto ref = reference_solve(inst, std::min(1e-10, a.parity_tol));
    ProblemInstance prob = to_problem(inst);
    ParityOptions po;
    po.gamma_hat = cfg.base_gamma_hat;
    po.eta_hat = cfg.base_eta_hat;
    po.lambda_hat = cfg.base_lambda_hat;
    po.tol = a.parity_tol;
    po.max_iters = std::max(cfg.max_iters, 200000L);
    std::string csv = "family,iters,final_residual,objective,ref_objective,rel_objective_diff,x_inf_diff,passed\n";
    json parity = json::array();
    for (const auto& f : cfg.families) {
      ParityRow p;
      try {
        p = parity_run(inst, prob, ref, f, po);
      } catch (const Error& e) {
        std::fprintf(stderr, "parity %s: %s\n", f.c_str(), e.what());
        hard_failure = true;
        p.family = f;
      }
      parity_ok = parity_ok && p.passed;
      csv += f + "," + std::to_string(p.iters) + "," + fmt17(p.final_residual) + "," + fmt17(p.objective) +
             "," + fmt17(p.ref_objective) + "," + fmt17(p.rel_objective_diff) + "," + fmt17(p.x_inf_diff) +
             "," + (p.passed ? "true" : "false") + "\n";
      parity.push_back({{"family", f},
                        {"rel_objective_diff", p.rel_objective_diff},
                        {"x_inf_diff", p.x_inf_diff},
                        {"passed", p.passed}});
      std::printf("parity %-10s rel objective diff %.3e, x inf diff %.3e: %s\n", f.c_str(),
                  p.rel_objective_diff, p.x_inf_diff, p.passed ? "PASS" : "FAIL");
    }
    write_text_file(out / "parity.csv", csv);
    summary["parity"] = parity;
    summary["reference_objective"] = ref.objective;
  }
  summary["parity_ok"] = parity_ok;
  write_text_file(out / "summary.json", summary.dump(2) + "\n");
  return parity_ok && !hard_failure ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphsplit: graph-based primal-dual splitting"};
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "check a scheme file against the standing and PSD assumptions");
  validate->add_option("scheme", va.scheme_path, "scheme JSON file")->required();
  validate->add_option("--psd-level", va.psd_level, "0: Omega, 1: Omega - gamma U1, 2: Omega - gamma/2 U2")
      ->check(CLI::Range(0, 2));
  validate->add_option("--ell", va.ell, "cocoercivity/Lipschitz constants of C_j (one or p values)");
  validate->add_option("--l-norm", va.l_norm, "operator norms of L_k (one or r values)");
  validate->add_option("--d", va.d, "ambient dimension for the assembled PSD check");
  validate->add_option("--regime", va.regime)->check(CLI::IsMember({"auto", "cocoercive", "lipschitz"}));

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-scheme", "write a coefficient scheme for a family or a graph");
  gen->add_option("--family", ga.family)->check(CLI::IsMember({"sequential", "star", "complete", "ring",
                                                              "ring-lipschitz"}));
  gen->add_option("--n", ga.n);
  gen->add_option("--r", ga.r);
  gen->add_option("--p", ga.p);
  gen->add_option("--gamma", ga.gamma)->check(CLI::PositiveNumber);
  gen->add_option("--eta", ga.eta)->check(CLI::PositiveNumber);
  gen->add_option("--graph", ga.graph_path, "graph JSON {n, edges, subgraph_edges}");
  gen->add_option("--kappa", ga.kappa)->check(CLI::NonNegativeNumber);
  gen->add_option("--out", ga.out);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve a fused lasso instance with one scheme");
  add_instance_flags(solve, sa.inst);
  solve->add_option("--family", sa.family)->check(CLI::IsMember({"sequential", "star", "complete"}));
  solve->add_option("--scheme", sa.scheme_path, "scheme JSON instead of a family");
  solve->add_option("--gamma-hat", sa.gamma_hat)->check(CLI::Range(0.0, 1.0));
  solve->add_option("--eta-hat", sa.eta_hat)->check(CLI::Range(0.0, 1.0));
  solve->add_option("--lambda-hat", sa.lambda_hat)->check(CLI::Range(0.0, 1.0));
  solve->add_option("--tol", sa.tol)->check(CLI::PositiveNumber);
  solve->add_option("--max-iters", sa.max_iters)->check(CLI::PositiveNumber);
  solve->add_option("--record-every", sa.record_every)->check(CLI::PositiveNumber);
  solve->add_option("--out", sa.out, "directory for history.csv, final.json, summary.json");

  BenchArgs ba;
  auto* bench = app.add_subcommand("benchmark", "run the fused lasso parameter grid");
  add_instance_flags(bench, ba.inst);
  bench->add_option("--config", ba.config_path, "experiment config JSON");
  bench->add_option("--families", ba.families)->delimiter(',');
  bench->add_option("--gamma-hat", ba.gamma_hat, "base gamma_hat");
  bench->add_option("--eta-hat", ba.eta_hat, "base eta_hat");
  bench->add_option("--lambda-hat", ba.lambda_hat, "base lambda_hat");
  bench->add_option("--tol", ba.tol);
  bench->add_option("--max-iters", ba.max_iters);
  bench->add_option("--threads", ba.threads);
  bench->add_flag("--full-grid", ba.full_grid);
  bench->add_option("--parity-tol", ba.parity_tol)->check(CLI::PositiveNumber);
  bench->add_flag("--skip-parity", ba.skip_parity);
  bench->add_option("--out", ba.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(va);
    if (*gen) return cmd_gen_scheme(ga);
    if (*solve) return cmd_solve(sa);
    if (*bench) return cmd_benchmark(ba);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
