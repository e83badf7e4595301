#pragma once

#include "dsaga/cluster.hpp"
#include "dsaga/dataset.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsaga {

/// `gaussian:n=1000,d=20[,label=logistic|linear|constant][,scale=S][,noise=E][,cov=diag:a;b;..]`
/// or `diagquad:h=1|2,c=0|3`: one explicit quadratic per node, '|' between
/// nodes and ';' between coordinates.
struct SyntheticSpec {
  enum class Kind { gaussian, diagquad };
  Kind kind = Kind::gaussian;
  std::size_t n = 0;
  std::size_t d = 0;
  std::optional<LabelRule> label;
  double scale = 2.0;
  double noise = 0.1;
  std::vector<double> diag_cov;
  std::vector<std::vector<double>> h;  // per node
  std::vector<std::vector<double>> c;  // per node
};

SyntheticSpec parse_synthetic(const std::string& text);

struct RunSpec {
  std::string command;  // run | verify | sweep | optimum
  std::string which;    // verify: lemma1 | lemma2
  std::string algo = "dsaga";
  std::string data_path;
  std::string synthetic;
  bool identical_shards = false;
  std::string objective = "logistic";
  std::optional<double> lambda;
  std::size_t k = 1;
  std::size_t u = 1;
  std::size_t t = 10;
  std::size_t passes = 10;
  std::uint64_t seed = 1;
  bool exact_inner = false;
  bool warmstart = false;
  bool refresh_memory = false;
  std::string sync_gradient = "exact";
  std::size_t trace_every = 1;
  std::string out;
  std::string report;
  std::string run_id = "run";
  std::size_t threads = 0;
  // sweep
  std::string axis;
  std::vector<std::size_t> values;
  // lemma2
  std::size_t dim = 200;
  double gamma = 0.1;
  std::size_t replicates = 5;
  std::size_t pairs = 5;
  double tolerance = 0.05;      // |H| and Tr(H^-1)/d relative error
  double rho_tolerance = 0.2;   // pair-norm relative error

  double effective_lambda() const;
  Loss loss() const;
  void validate() const;
};

/// The objective and shards a run operates on. `data` is the pooled data the
/// shards were cut from.
struct Problem {
  Objective obj;
  Dataset data;
  std::vector<Shard> shards;
};

Problem build_problem(const RunSpec& spec, std::size_t k);

/// Entry point; returns the process exit status (0 ok, 1 failed check,
/// 2 usage or runtime error).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsaga
