#include "dsaga/cli.hpp"

#include "dsaga/baselines.hpp"
#include "dsaga/diagnostics.hpp"
#include "dsaga/quadratic_theory.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace dsaga {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw Error("bad number '" + s + "' for " + what);
  return v;
}

std::size_t to_count(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw Error("bad count '" + s + "' for " + what);
  return v;
}

std::vector<std::vector<double>> per_node_values(const std::string& s, const std::string& what) {
  std::vector<std::vector<double>> out;
  for (const auto& node : split(s, '|')) {
    std::vector<double> coords;
    for (const auto& c : split(node, ';')) coords.push_back(to_double(c, what));
    out.push_back(std::move(coords));
  }
  return out;
}

}  // namespace

SyntheticSpec parse_synthetic(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error("synthetic spec needs 'kind:key=value,...'");
  SyntheticSpec spec;
  const std::string kind = text.substr(0, colon);
  if (kind == "gaussian")
    spec.kind = SyntheticSpec::Kind::gaussian;
  else if (kind == "diagquad")
    spec.kind = SyntheticSpec::Kind::diagquad;
  else
    throw Error("unknown synthetic kind '" + kind + "'");

  for (const auto& item : split(text.substr(colon + 1), ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("synthetic spec item '" + item + "' needs '='");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (spec.kind == SyntheticSpec::Kind::gaussian) {
      if (key == "n") {
        spec.n = to_count(value, key);
      } else if (key == "d") {
        spec.d = to_count(value, key);
      } else if (key == "label") {
        if (value == "logistic") spec.label = LabelRule::logistic;
        else if (value == "linear") spec.label = LabelRule::linear;
        else if (value == "constant") spec.label = LabelRule::constant;
        else throw Error("unknown label rule '" + value + "'");
      } else if (key == "scale") {
        spec.scale = to_double(value, key);
      } else if (key == "noise") {
        spec.noise = to_double(value, key);
      } else if (key == "cov") {
        if (value == "identity") continue;
        if (value.rfind("diag:", 0) != 0) throw Error("cov must be identity or diag:a;b;...");
        for (const auto& v : split(value.substr(5), ';')) spec.diag_cov.push_back(to_double(v, key));
      } else {
        throw Error("unknown gaussian key '" + key + "'");
      }
    } else {
      if (key == "h") spec.h = per_node_values(value, key);
      else if (key == "c") spec.c = per_node_values(value, key);
      else throw Error("unknown diagquad key '" + key + "'");
    }
  }
  if (spec.kind == SyntheticSpec::Kind::gaussian) {
    if (spec.n == 0 || spec.d == 0) throw Error("gaussian spec needs n >= 1 and d >= 1");
    if (!spec.diag_cov.empty() && spec.diag_cov.size() != spec.d)
      throw Error("cov=diag needs d entries");
  } else {
    if (spec.h.empty() || spec.h.size() != spec.c.size())
      throw Error("diagquad needs h and c for the same number of nodes");
    for (std::size_t i = 0; i < spec.h.size(); ++i)
      if (spec.h[i].size() != spec.h[0].size() || spec.c[i].size() != spec.h[0].size())
        throw Error("diagquad node " + std::to_string(i) + " has the wrong dimension");
  }
  return spec;
}

double RunSpec::effective_lambda() const {
  if (lambda) return *lambda;
  return objective == "quadratic" ? 0.0 : 0.01;
}

Loss RunSpec::loss() const {
  return objective == "quadratic" ? Loss::quadratic : Loss::logistic;
}

void RunSpec::validate() const {
  if (k < 1) throw Error("--k must be >= 1");
  if (u < 1) throw Error("--u must be >= 1");
  if (t < 1) throw Error("--t must be >= 1");
  if (effective_lambda() < 0.0) throw Error("--lambda must be >= 0");
  if (exact_inner && objective != "quadratic")
    throw Error("--exact-inner needs --objective quadratic");
  if (exact_inner && refresh_memory) throw Error("--refresh-memory has no effect with --exact-inner");
  const bool needs_data = command == "run" || command == "sweep" || command == "optimum" ||
                          (command == "verify" && which == "lemma1");
  if (needs_data && data_path.empty() == synthetic.empty())
    throw Error("give exactly one of --data and --synthetic");
  if (command == "verify" && which != "lemma1" && which != "lemma2")
    throw Error("verify needs 'lemma1' or 'lemma2'");
  if (command == "verify" && which == "lemma1" && objective != "quadratic")
    throw Error("verify lemma1 needs --objective quadratic");
  if (command == "sweep") {
    if (axis != "K" && axis != "U") throw Error("--axis must be K or U");
    if (values.empty()) throw Error("--values must not be empty");
  }
}

Problem build_problem(const RunSpec& spec, std::size_t k) {
  Objective obj{spec.loss(), spec.effective_lambda(), {}, {}};
  if (!spec.data_path.empty()) {
    Dataset data = read_libsvm(spec.data_path);
    std::vector<Shard> shards;
    if (spec.identical_shards) {
      for (std::size_t i = 0; i < k; ++i) shards.push_back({int(i), data});
    } else {
      shards = partition(data, k, spec.seed);
    }
    return {obj, std::move(data), std::move(shards)};
  }

  const SyntheticSpec syn = parse_synthetic(spec.synthetic);
  if (syn.kind == SyntheticSpec::Kind::diagquad) {
    if (obj.loss != Loss::quadratic) throw Error("diagquad needs --objective quadratic");
    if (syn.h.size() != k)
      throw Error("diagquad describes " + std::to_string(syn.h.size()) + " nodes but K=" +
                  std::to_string(k));
    std::vector<Shard> shards;
    std::vector<Example> pooled;
    const std::size_t d = syn.h[0].size();
    for (std::size_t i = 0; i < k; ++i) {
      Matrix h = Matrix::Zero(d, d);
      Vector c(d);
      for (std::size_t j = 0; j < d; ++j) {
        h(j, j) = syn.h[i][j];
        c[j] = syn.c[i][j];
      }
      Dataset local = make_quadratic_dataset(h, c);
      pooled.insert(pooled.end(), local.examples().begin(), local.examples().end());
      shards.push_back({int(i), std::move(local)});
    }
    return {obj, Dataset(std::move(pooled), d), std::move(shards)};
  }

  LabelSpec labels;
  labels.rule = syn.label.value_or(obj.loss == Loss::logistic ? LabelRule::logistic
                                                             : LabelRule::linear);
  labels.noise = syn.noise;
  labels.teacher_scale = syn.scale;
  CovarianceSpec cov = IdentityCovariance{};
  if (!syn.diag_cov.empty()) cov = DiagonalCovariance{syn.diag_cov};
  Dataset data = generate_gaussian(syn.n, syn.d, cov, spec.seed, labels);
  std::vector<Shard> shards;
  if (spec.identical_shards) {
    for (std::size_t i = 0; i < k; ++i) shards.push_back({int(i), data});
  } else {
    shards = partition(data, k, spec.seed);
  }
  return {obj, std::move(data), std::move(shards)};
}

namespace {

struct Output {
  std::ostream& out;
  std::ostream& err;
};

void emit_csv(const std::vector<TraceRecord>& records, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-")
    write_csv(records, out);
  else
    write_csv(records, path);
}

ClusterConfig cluster_config(const RunSpec& spec, std::size_t k, std::size_t u, bool iterates) {
  ClusterConfig config;
  config.nodes = k;
  config.passes_per_round = u;
  config.rounds = spec.t;
  config.seed = spec.seed;
  config.inner = spec.exact_inner ? InnerSolve::exact : InnerSolve::iterative;
  config.sync = spec.sync_gradient == "memory" ? SyncGradient::memory : SyncGradient::exact;
  config.refresh_memory = spec.refresh_memory;
  config.record_iterates = iterates;
  config.threads = spec.threads;
  return config;
}

struct Start {
  Vector w;
  double prior_passes = 0.0;
};

Start starting_point(const RunSpec& spec, const Problem& p) {
  Start s{Vector::Zero(static_cast<Eigen::Index>(p.data.dimension())), 0.0};
  if (spec.warmstart) {
    s.w = sgd_warmstart(p.obj, p.data, s.w, spec.seed + 2);
    s.prior_passes = 1.0;
  }
  return s;
}

bool keep_round(const RunSpec& spec, std::int64_t round) {
  const auto every = static_cast<std::int64_t>(std::max<std::size_t>(spec.trace_every, 1));
  return round % every == 0 || round == static_cast<std::int64_t>(spec.t);
}

struct DsagaRun {
  std::vector<TraceRecord> trace;
  std::optional<MetricReport> report;
  ClusterConfig config;
};

DsagaRun run_dsaga_spec(const RunSpec& spec, std::size_t k, std::size_t u, bool with_report) {
  const Problem p = build_problem(spec, k);
  const Reference ref = reference_optimum(p.obj, p.shards);
  const Start start = starting_point(spec, p);
  DsagaRun run;
  run.config = cluster_config(spec, k, u, with_report);
  DsagaTraceOptions options;
  options.w_star = &ref.w;
  options.run_id = spec.run_id;
  options.prior_passes = start.prior_passes;
  const DsagaResult result = run_dsaga(p.obj, p.shards, run.config, start.w, options);
  for (const auto& r : result.trace)
    if (keep_round(spec, *r.round)) run.trace.push_back(r);
  if (with_report) run.report = rate_report(result, p.obj, p.shards, run.config, ref);
  return run;
}

std::vector<TraceRecord> solver_records(const SolverResult& run, const Reference& ref,
                                        const RunSpec& spec,
                                        double prior, const std::string& algo) {
  std::vector<TraceRecord> out;
  for (const auto& it : run.trace) {
    if (it.iteration == 0) continue;
    if (!keep_round(spec, std::int64_t(it.iteration)) && it.iteration != run.iterations) continue;
    TraceRecord r;
    r.run_id = spec.run_id;
    r.algo = algo;
    r.nodes = 1;
    r.round = static_cast<std::int64_t>(it.iteration);
    r.pass_opt = it.passes + prior;
    r.pass_total = it.passes + prior;
    r.node = "0";
    r.f = it.f;
    r.excess = it.f - ref.f;
    r.grad_norm = it.grad_norm;
    out.push_back(std::move(r));
  }
  return out;
}

int cmd_run(const RunSpec& spec, Output io) {
  if (spec.algo == "dsaga") {
    const bool with_report = !spec.report.empty();
    const DsagaRun run = run_dsaga_spec(spec, spec.k, spec.u, with_report);
    emit_csv(run.trace, spec.out, io.out);
    if (with_report) {
      emit_csv(report_records(*run.report, run.config, spec.run_id), spec.report, io.out);
      if (!run.report->decomposition_holds) {
        io.err << "error decomposition inequality violated\n";
        return 1;
      }
    }
    return 0;
  }

  if (spec.k != 1) throw Error("--algo " + spec.algo + " runs on a single node; drop --k");
  const Problem p = build_problem(spec, 1);
  const Reference ref = reference_optimum(p.obj, p.shards);
  const Start start = starting_point(spec, p);
  std::vector<TraceRecord> records;

  if (spec.algo == "saga") {
    const Dataset& data = p.shards[0].data;
    SagaState state = init_saga(p.obj, data, start.w, StepRule::automatic(), node_seed(spec.seed, 0));
    SagaTraceOptions options;
    options.trace_every = spec.trace_every;
    options.w_star = &ref.w;
    options.run_id = spec.run_id;
    records = run_saga(state, p.obj, data, spec.passes, options);
    for (auto& r : records) *r.pass_total += start.prior_passes;
  } else {
    const SmoothProblem problem = make_problem(p.obj, p.shards);
    SolverResult run;
    if (spec.algo == "gd") {
      run = gd_run(problem, start.w, spec.passes,
                   GdStepRule::inverse_lipschitz(smoothness_constants(p.obj, p.data).L));
    } else {
      LbfgsOptions options;
      options.max_iterations = spec.passes;
      run = lbfgs_run(problem, start.w, options);
    }
    records = solver_records(run, ref, spec, start.prior_passes, spec.algo);
  }
  emit_csv(records, spec.out, io.out);
  return 0;
}

int cmd_verify_lemma1(const RunSpec& spec, Output io) {
  const Problem p = build_problem(spec, spec.k);
  const auto hessians = shard_hessians(p.obj, p.shards);
  const TheoryParams theory = rho_bound(hessians);
  const Vector w_star = global_optimum(hessians);
  const Vector w0 = Vector::Zero(w_star.size());

  ClusterConfig config = cluster_config(spec, spec.k, 1, false);
  config.inner = InnerSolve::exact;
  DsagaTraceOptions options;
  options.w_star = &w_star;
  options.run_id = spec.run_id;
  const DsagaResult result = run_dsaga(p.obj, p.shards, config, w0, options);
  const auto steps = contraction_steps(result, w0, w_star, theory.contraction);

  io.out << "K " << spec.k << " rho " << format_number(theory.rho) << " bound "
         << format_number(theory.contraction) << '\n';
  io.out << "round ratio recursion_residual ok\n";
  std::vector<Vector> previous(spec.k, w0 - w_star);
  int status = 0;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto predicted = contraction_step(hessians, previous);
    double residual = 0.0;
    for (std::size_t i = 0; i < spec.k; ++i) {
      const Vector e = result.rounds[t].nodes[i].end_params - w_star;
      residual = std::max(residual, (e - predicted[i]).norm());
      previous[i] = e;
    }
    const bool ok = steps[t].holds && residual <= 1e-9;
    io.out << (t + 1) << ' ' << format_number(steps[t].ratio) << ' ' << format_number(residual) << ' '
           << (ok ? "yes" : "no") << '\n';
    if (!ok && status == 0) {
      io.err << "lemma1 bound violated at round " << (t + 1) << '\n';
      status = 1;
    }
  }
  if (!spec.out.empty()) write_csv(result.trace, spec.out);
  return status;
}

int cmd_verify_lemma2(const RunSpec& spec, Output io) {
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) throw Error("--gamma must be in (0, 1)");
  WishartOptions options;
  options.d = spec.dim;
  options.n_per_node = static_cast<std::size_t>(std::llround(double(spec.dim) / spec.gamma));
  options.replicates = spec.replicates;
  options.pairs = spec.pairs;
  options.seed = spec.seed;
  const WishartStats s = wishart_empirics(options);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  struct Row {
    const char* name;
    double stat, limit, tol;
  };
  std::vector<Row> rows = {{"norm", s.norm_stat, s.norm_limit, spec.tolerance},
                           {"trace_inv", s.trace_inv_stat, s.trace_inv_limit, spec.tolerance}};
  if (spec.pairs > 0) rows.push_back({"rho", s.rho_stat, s.rho_limit, spec.rho_tolerance});
  io.out << "d " << options.d << " n_per_node " << options.n_per_node << " gamma "
         << format_number(s.gamma_mp) << '\n';
  io.out << "statistic empirical predicted rel_error ok\n";
  int status = 0;
  for (const auto& r : rows) {
    const double e = rel(r.stat, r.limit);
    const bool ok = e <= r.tol;
    io.out << r.name << ' ' << format_number(r.stat) << ' ' << format_number(r.limit) << ' '
           << format_number(e) << ' ' << (ok ? "yes" : "no") << '\n';
    if (!ok) status = 1;
  }
  return status;
}

int cmd_sweep(const RunSpec& spec, Output io) {
  std::vector<TraceRecord> merged;
  for (const std::size_t v : spec.values) {
    const std::size_t k = spec.axis == "K" ? v : spec.k;
    const std::size_t u = spec.axis == "U" ? v : spec.u;
    DsagaRun run;
    try {
      run = run_dsaga_spec(spec, k, u, true);
    } catch (const std::exception& e) {
      if (!spec.out.empty()) write_csv(merged, spec.out);
      throw Error("sweep " + spec.axis + "=" + std::to_string(v) + " failed (" +
                  std::to_string(merged.size()) + " rows written so far): " + e.what());
    }
    merged.insert(merged.end(), run.trace.begin(), run.trace.end());
    const auto rows = report_records(*run.report, run.config, spec.run_id);
    merged.insert(merged.end(), rows.begin(), rows.end());
    TraceRecord summary;
    summary.run_id = spec.run_id;
    summary.algo = "dsaga";
    summary.nodes = static_cast<std::int64_t>(k);
    summary.passes_per_round = static_cast<std::int64_t>(u);
    summary.node = "summary";
    summary.rho_tilde = run.report->median_rho_tilde();
    summary.alpha_tilde = run.report->median_alpha_tilde();
    summary.omega_tilde = run.report->median_omega_tilde();
    summary.rho_hat = run.report->rho_hat;
    merged.push_back(std::move(summary));
  }
  emit_csv(merged, spec.out, io.out);
  return 0;
}

int cmd_optimum(const RunSpec& spec, Output io) {
  const Problem p = build_problem(spec, spec.k);
  const Reference ref = reference_optimum(p.obj, p.shards);
  std::ostringstream text;
  text << "f_star " << format_number(ref.f) << '\n';
  text << "grad_norm " << format_number(ref.grad_norm) << '\n';
  text << "w_star";
  for (Eigen::Index i = 0; i < ref.w.size(); ++i) text << ' ' << format_number(ref.w[i]);
  text << '\n';
  if (spec.out.empty() || spec.out == "-") {
    io.out << text.str();
  } else {
    std::ofstream f(spec.out, std::ios::binary);
    if (!(f << text.str())) throw Error("cannot write '" + spec.out + "'");
  }
  return 0;
}

std::size_t threads_from_env() {
  const char* env = std::getenv("DSAGA_THREADS");
  if (!env || !*env) return 0;
  return to_count(env, "DSAGA_THREADS");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunSpec spec;
  CLI::App app{"SAGA and distributed SAGA experiments", "dsaga"};
  app.set_config("--config", "", "key=value file with flag values (command-line flags win)");
  // Synthetic specs contain commas; keep the file reader from splitting them.
  auto config_format = std::make_shared<CLI::ConfigBase>();
  config_format->arrayDelimiter(';');
  app.config_formatter(config_format);
  app.add_option("command", spec.command, "run | verify | sweep | optimum")
      ->required()
      ->check(CLI::IsMember({"run", "verify", "sweep", "optimum"}));
  app.add_option("which", spec.which, "verify target: lemma1 | lemma2");
  app.add_option("--algo", spec.algo)->check(CLI::IsMember({"saga", "dsaga", "gd", "lbfgs"}));
  app.add_option("--data", spec.data_path, "LIBSVM file");
  app.add_option("--synthetic", spec.synthetic, "gaussian:n=..,d=.. or diagquad:h=..,c=..");
  app.add_flag("--identical-shards", spec.identical_shards, "give every node the whole data set");
  app.add_option("--objective", spec.objective)->check(CLI::IsMember({"logistic", "quadratic"}));
  app.add_option("--lambda", spec.lambda, "l2 weight (default 0.01 logistic, 0 quadratic)");
  app.add_option("--k", spec.k, "nodes");
  app.add_option("--u", spec.u, "local passes per round");
  app.add_option("--t", spec.t, "rounds");
  app.add_option("--passes", spec.passes, "passes (saga) or iterations (gd, lbfgs)");
  app.add_option("--seed", spec.seed);
  app.add_flag("--exact-inner", spec.exact_inner, "closed-form inner solves (quadratic only)");
  app.add_flag("--warmstart", spec.warmstart, "start from one pass of plain SGD");
  app.add_flag("--refresh-memory", spec.refresh_memory, "reset SAGA memory at each round start");
  app.add_option("--sync-gradient", spec.sync_gradient)
      ->check(CLI::IsMember({"exact", "memory"}));
  app.add_option("--trace-every", spec.trace_every);
  app.add_option("--out", spec.out, "CSV destination (default stdout)");
  app.add_option("--report", spec.report, "diagnostics CSV (dsaga)");
  app.add_option("--run-id", spec.run_id);
  app.add_option("--axis", spec.axis, "sweep axis: K | U");
  app.add_option("--values", spec.values, "sweep values")->delimiter(',');
  app.add_option("--d", spec.dim, "lemma2 dimension");
  app.add_option("--gamma", spec.gamma, "lemma2 aspect ratio d/n");
  app.add_option("--replicates", spec.replicates);
  app.add_option("--pairs", spec.pairs);
  app.add_option("--tolerance", spec.tolerance, "lemma2 norm/trace relative tolerance");
  app.add_option("--rho-tolerance", spec.rho_tolerance, "lemma2 pair-norm relative tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    spec.threads = threads_from_env();
    spec.validate();
    const Output io{out, err};
    if (spec.command == "run") return cmd_run(spec, io);
    if (spec.command == "sweep") return cmd_sweep(spec, io);
    if (spec.command == "optimum") return cmd_optimum(spec, io);
    return spec.which == "lemma1" ? cmd_verify_lemma1(spec, io) : cmd_verify_lemma2(spec, io);
  } catch (const std::exception& e) {
    err << "dsaga " << spec.command << ": " << e.what() << '\n';
    return 2;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv = {"dsaga"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data(), out, err);
}

}  // namespace dsaga
