#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace dsaga {

/// One CSV row. Every column of the output contract is a field here; missing
/// values stay empty.
struct TraceRecord {
  std::string run_id;
  std::string algo;
  std::optional<std::int64_t> nodes;          // K
  std::optional<std::int64_t> passes_per_round;  // U
  std::optional<std::int64_t> round;
  std::optional<double> pass_opt;
  std::optional<double> pass_total;
  std::string node;  // node id, "avg", "all" or "summary"
  std::optional<double> f;
  std::optional<double> excess;
  std::optional<double> grad_norm;
  std::optional<double> inner_err;
  std::optional<double> disc_err;
  std::optional<double> rho_tilde;
  std::optional<double> alpha_tilde;
  std::optional<double> omega_tilde;
  std::optional<double> rho_hat;

  bool operator==(const TraceRecord&) const = default;
};

}  // namespace dsaga
