#include "dsaga/diagnostics.hpp"

#include "dsaga/quadratic_theory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dsaga {

namespace {

Reference solve_reference(const SmoothProblem& problem, const Vector& w0,
                          const ReferenceOptions& options) {
  LbfgsOptions lbfgs;
  lbfgs.tolerance = options.tolerance;
  lbfgs.max_iterations = options.max_iterations;
  SolverResult run;
  try {
    run = lbfgs_run(problem, w0, lbfgs);
  } catch (const LineSearchError& e) {
    throw NonConvergenceError(std::string("reference optimum: ") + e.what(), w0);
  }
  const Vector g = problem.gradient(run.w);
  if (!run.converged)
    throw NonConvergenceError("reference optimum: |g| = " + std::to_string(g.norm()) +
                                  " after " + std::to_string(run.iterations) + " iterations",
                              run.w);
  return {run.w, problem.value(run.w), g.norm()};
}

Reference quadratic_reference(const Matrix& h, const Vector& rhs, const SmoothProblem& problem) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw Error("quadratic objective is not strongly convex");
  Reference ref;
  ref.w = llt.solve(rhs);
  ref.f = problem.value(ref.w);
  ref.grad_norm = problem.gradient(ref.w).norm();
  return ref;
}

}  // namespace

Reference reference_optimum(const Objective& obj, const Dataset& data,
                            const ReferenceOptions& options) {
  if (data.empty()) throw Error("reference optimum needs data");
  const auto problem = make_problem(obj, data);
  const Vector w0 = options.start.size() ? options.start
                                          : Vector::Zero(static_cast<Eigen::Index>(data.dimension()));
  if (obj.loss == Loss::quadratic) {
    Vector rhs = quadratic_rhs(data);
    if (obj.has_linear()) rhs -= obj.linear;
    return quadratic_reference(quadratic_hessian(data, obj.lambda), rhs, problem);
  }
  if (!(obj.lambda > 0.0)) throw Error("reference optimum needs lambda > 0 for logistic loss");
  return solve_reference(problem, w0, options);
}

Reference reference_optimum(const Objective& obj, const std::vector<Shard>& shards,
                            const ReferenceOptions& options) {
  if (shards.empty()) throw Error("reference optimum needs shards");
  const auto problem = make_problem(obj, shards);
  const auto d = static_cast<Eigen::Index>(shards[0].data.dimension());
  if (obj.loss == Loss::quadratic) {
    Matrix h = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (const auto& s : shards) {
      h += quadratic_hessian(s.data, obj.lambda);
      rhs += quadratic_rhs(s.data);
    }
    h /= double(shards.size());
    rhs /= double(shards.size());
    if (obj.has_linear()) rhs -= obj.linear;
    return quadratic_reference(h, rhs, problem);
  }
  if (!(obj.lambda > 0.0)) throw Error("reference optimum needs lambda > 0 for logistic loss");
  return solve_reference(problem, options.start.size() ? options.start : Vector::Zero(d), options);
}

Objective round_surrogate(const Objective& obj, const RoundSnapshot& round, std::size_t k) {
  return obj.with_linear(round.global_avg_grad - round.nodes.at(k).anchor_grad, round.start);
}

std::vector<Vector> inner_optima(const Objective& obj, const std::vector<Shard>& shards,
                                 const RoundSnapshot& round, double tolerance) {
  if (round.nodes.size() != shards.size())
    throw Error("round has " + std::to_string(round.nodes.size()) + " nodes but " +
                std::to_string(shards.size()) + " shards were given");
  std::vector<Vector> out;
  out.reserve(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const Objective surrogate = round_surrogate(obj, round, k);
    const Dataset& data = shards[k].data;
    if (obj.loss == Loss::quadratic) {
      Eigen::LLT<Matrix> llt(quadratic_hessian(data, obj.lambda));
      if (llt.info() != Eigen::Success)
        throw Error("node " + std::to_string(k) + " has a singular Hessian");
      out.push_back(llt.solve(quadratic_rhs(data) - surrogate.linear));
      continue;
    }
    LbfgsOptions options;
    options.tolerance = tolerance;
    const auto run = lbfgs_run(make_problem(surrogate, data), round.nodes[k].end_params, options);
    if (!run.converged)
      throw NonConvergenceError("inner optimum of node " + std::to_string(k) +
                                    " did not converge",
                                run.w);
    out.push_back(run.w);
  }
  return out;
}

std::vector<ErrorDecomposition> decompose_error(const RoundSnapshot& round,
                                                const std::vector<Vector>& optima,
                                                const Vector& w_star) {
  const std::size_t k = round.nodes.size();
  if (optima.size() != k || k == 0)
    throw Error("decompose_error needs one inner optimum per node");
  std::size_t points = 0;
  for (const auto& node : round.nodes) {
    const std::size_t p = node.iterates.empty() ? 1 : node.iterates.size();
    if (points != 0 && p != points) throw Error("nodes recorded different numbers of iterates");
    points = p;
  }

  double discrepancy = 0.0;
  for (const auto& w : optima) discrepancy += (w - w_star).norm();
  discrepancy /= double(k);

  std::vector<ErrorDecomposition> out;
  const bool recorded = !round.nodes[0].iterates.empty();
  for (std::size_t p = 0; p < points; ++p) {
    ErrorDecomposition e;
    e.pass = recorded ? p : 1;
    e.discrepancy = discrepancy;
    for (std::size_t i = 0; i < k; ++i) {
      const Vector& w = recorded ? round.nodes[i].iterates[p] : round.nodes[i].end_params;
      e.total += (w - w_star).norm();
      e.inner += (w - optima[i]).norm();
    }
    e.total /= double(k);
    e.inner /= double(k);
    e.holds = e.total <= e.inner + e.discrepancy + kDecompositionSlack;
    out.push_back(e);
  }
  auto& last = out.back();
  if (round.averaged.size() == w_star.size())
    last.holds = last.holds && (round.averaged - w_star).norm() <= last.total + kDecompositionSlack;
  return out;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::optional<double> median_of(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs)
    if (x) v.push_back(*x);
  return median(std::move(v));
}

}  // namespace

std::optional<double> MetricReport::median_rho_tilde() const {
  std::vector<std::optional<double>> xs;
  for (const auto& r : rounds) xs.push_back(r.rho_tilde);
  return median_of(xs);
}

std::optional<double> MetricReport::median_alpha_tilde() const {
  std::vector<std::optional<double>> xs;
  for (const auto& r : rounds) xs.insert(xs.end(), r.alpha_tilde.begin(), r.alpha_tilde.end());
  return median_of(xs);
}

std::optional<double> MetricReport::median_omega_tilde() const {
  std::vector<std::optional<double>> xs;
  for (const auto& r : rounds) xs.insert(xs.end(), r.omega_tilde.begin(), r.omega_tilde.end());
  return median_of(xs);
}

std::optional<double> predicted_rate(std::size_t d, std::size_t k, std::size_t n_total) {
  if (n_total == 0) return std::nullopt;
  if (k == 1) return 0.0;
  const double gamma = double(d) * double(k) / double(n_total);
  if (gamma >= 1.0) return std::nullopt;
  return (1.0 - 1.0 / double(k)) * wishart_limit(gamma);
}

namespace {

// Worst-node ratio of consecutive gaps |phi_k(w^{u}) - phi_k(w^inf)|.
template <typename Gap>
std::optional<double> worst_ratio(const RoundSnapshot& round, std::size_t u, Gap&& gap) {
  std::optional<double> worst;
  for (std::size_t k = 0; k < round.nodes.size(); ++k) {
    const double before = std::abs(gap(k, round.nodes[k].iterates[u - 1]));
    if (!(before > kRateFloor)) continue;
    const double after = std::abs(gap(k, round.nodes[k].iterates[u]));
    worst = std::max(worst.value_or(0.0), after / before);
  }
  return worst;
}

}  // namespace

MetricReport rate_report(const DsagaResult& result, const Objective& obj,
                         const std::vector<Shard>& shards, const ClusterConfig& config,
                         const Reference& reference) {
  if (!config.record_iterates) throw Error("rate_report needs a run with record_iterates");
  if (shards.size() != config.nodes) throw Error("rate_report: shard count differs from K");
  MetricReport report;
  std::size_t n_total = 0;
  for (const auto& s : shards) n_total += s.local_count();
  report.rho_hat = predicted_rate(shards.at(0).data.dimension(), config.nodes, n_total);

  for (const auto& round : result.rounds) {
    for (const auto& node : round.nodes)
      if (node.iterates.size() < 2) throw Error("rate_report: missing per-pass iterates");
    RoundMetrics m;
    m.round = round.round;
    m.excess_start = sharded_difference(obj, shards, round.start, reference.w);
    m.excess_end = sharded_difference(obj, shards, round.averaged, reference.w);
    if (m.excess_start > kRateFloor) m.rho_tilde = std::max(0.0, m.excess_end / m.excess_start);

    const auto optima = inner_optima(obj, shards, round);
    std::vector<Objective> surrogates;
    for (std::size_t k = 0; k < shards.size(); ++k)
      surrogates.push_back(round_surrogate(obj, round, k));
    const std::size_t passes = round.nodes[0].iterates.size() - 1;
    for (std::size_t u = 1; u <= passes; ++u) {
      m.alpha_tilde.push_back(worst_ratio(round, u, [&](std::size_t k, const Vector& w) {
        return sharded_difference(obj, shards, w, optima[k]);
      }));
      m.omega_tilde.push_back(worst_ratio(round, u, [&](std::size_t k, const Vector& w) {
        return objective_difference(surrogates[k], shards[k].data, w, optima[k]);
      }));
    }

    m.decomposition = decompose_error(round, optima, reference.w);
    m.inner_err = m.decomposition.back().inner;
    m.disc_err = m.decomposition.back().discrepancy;
    for (const auto& e : m.decomposition) report.decomposition_holds &= e.holds;
    report.rounds.push_back(std::move(m));
  }
  return report;
}

std::vector<TraceRecord> report_records(const MetricReport& report, const ClusterConfig& config,
                                        const std::string& run_id) {
  std::vector<TraceRecord> out;
  const bool exact = config.inner == InnerSolve::exact;
  for (const auto& m : report.rounds) {
    const std::size_t passes = m.alpha_tilde.size();
    for (std::size_t u = 1; u <= passes; ++u) {
      TraceRecord r;
      r.run_id = run_id;
      r.algo = "dsaga";
      r.nodes = static_cast<std::int64_t>(config.nodes);
      r.passes_per_round = static_cast<std::int64_t>(config.passes_per_round);
      r.round = static_cast<std::int64_t>(m.round);
      r.pass_opt = exact ? 0.0 : double((m.round - 1) * config.passes_per_round + u);
      r.node = "all";
      r.alpha_tilde = m.alpha_tilde[u - 1];
      r.omega_tilde = m.omega_tilde[u - 1];
      if (u == passes) {
        r.excess = m.excess_end;
        r.inner_err = m.inner_err;
        r.disc_err = m.disc_err;
        r.rho_tilde = m.rho_tilde;
        r.rho_hat = report.rho_hat;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ContractionStep> contraction_steps(const DsagaResult& result, const Vector& w0,
                                               const Vector& w_star, double bound) {
  std::vector<ContractionStep> out;
  double previous = (w0 - w_star).norm();
  const double floor = kContractionFloor * std::max(1.0, previous);
  for (const auto& round : result.rounds) {
    ContractionStep step;
    step.previous = previous;
    for (const auto& node : round.nodes)
      step.current = std::max(step.current, (node.end_params - w_star).norm());
    step.ratio = previous > 0.0 ? step.current / previous : 0.0;
    step.holds = step.current <= bound * previous + floor;
    out.push_back(step);
    previous = step.current;
  }
  return out;
}

const std::vector<std::string> kCsvColumns = {
    "run_id", "algo", "K", "U", "round", "pass_opt", "pass_total", "node", "f",
    "excess", "grad_norm", "inner_err", "disc_err", "rho_tilde", "alpha_tilde",
    "omega_tilde", "rho_hat"};

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

void put_text(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    throw Error("CSV text field may not contain ',', '\"' or newlines: '" + s + "'");
  out << s;
}

void put(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) out << format_number(*v);
}

void put(std::ostream& out, const std::optional<std::int64_t>& v) {
  out << ',';
  if (v) out << *v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> parse_cell(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  T v{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError(line, "bad number '" + cell + "'");
  return v;
}

}  // namespace

void write_csv(const std::vector<TraceRecord>& records, std::ostream& out) {
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << '\n';
  for (const auto& r : records) {
    put_text(out, r.run_id);
    out << ',';
    put_text(out, r.algo);
    put(out, r.nodes);
    put(out, r.passes_per_round);
    put(out, r.round);
    put(out, r.pass_opt);
    put(out, r.pass_total);
    out << ',';
    put_text(out, r.node);
    put(out, r.f);
    put(out, r.excess);
    put(out, r.grad_norm);
    put(out, r.inner_err);
    put(out, r.disc_err);
    put(out, r.rho_tilde);
    put(out, r.alpha_tilde);
    put(out, r.omega_tilde);
    put(out, r.rho_hat);
    out << '\n';
  }
  if (!out) throw Error("CSV write failed");
}

void write_csv(const std::vector<TraceRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_csv(records, out);
  out.close();
  if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<TraceRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing CSV header");
  if (split_commas(line) != kCsvColumns) throw ParseError(1, "unexpected CSV header");
  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split_commas(line);
    if (c.size() != kCsvColumns.size())
      throw ParseError(line_no, "expected " + std::to_string(kCsvColumns.size()) +
                                    " cells, got " + std::to_string(c.size()));
    TraceRecord r;
    r.run_id = c[0];
    r.algo = c[1];
    r.nodes = parse_cell<std::int64_t>(c[2], line_no);
    r.passes_per_round = parse_cell<std::int64_t>(c[3], line_no);
    r.round = parse_cell<std::int64_t>(c[4], line_no);
    r.pass_opt = parse_cell<double>(c[5], line_no);
    r.pass_total = parse_cell<double>(c[6], line_no);
    r.node = c[7];
    r.f = parse_cell<double>(c[8], line_no);
    r.excess = parse_cell<double>(c[9], line_no);
    r.grad_norm = parse_cell<double>(c[10], line_no);
    r.inner_err = parse_cell<double>(c[11], line_no);
    r.disc_err = parse_cell<double>(c[12], line_no);
    r.rho_tilde = parse_cell<double>(c[13], line_no);
    r.alpha_tilde = parse_cell<double>(c[14], line_no);
    r.omega_tilde = parse_cell<double>(c[15], line_no);
    r.rho_hat = parse_cell<double>(c[16], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dsaga
