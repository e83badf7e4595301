#include "dsaga/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace dsaga {

double Example::dot(const Vector& w) const {
  double s = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * w[index[k]];
  return s;
}

double Example::squared_norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return s;
}

void Example::axpy(double scale, Vector& out) const {
  for (std::size_t k = 0; k < index.size(); ++k)
    out[index[k]] += scale * value[k];
}

Dataset::Dataset(std::vector<Example> examples, std::size_t dimension)
    : examples_(std::move(examples)), dimension_(dimension) {
  for (const auto& ex : examples_) {
    if (!ex.index.empty() && ex.index.back() >= dimension_)
      throw DimensionError("example index " + std::to_string(ex.index.back()) +
                           " outside dimension " + std::to_string(dimension_));
  }
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  // from_chars rejects a leading '+', which LIBSVM writers commonly emit.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_index(std::string_view tok, unsigned long long& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_libsvm(std::string_view text, std::size_t dimension) {
  std::vector<Example> examples;
  std::size_t max_dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;

    Example ex;
    if (!parse_double(tokens[0], ex.label) || !std::isfinite(ex.label))
      throw ParseError(line_no, "bad label '" + std::string(tokens[0]) + "'");
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      auto tok = tokens[t];
      auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "missing ':' in '" + std::string(tok) + "'");
      unsigned long long idx = 0;
      double val = 0.0;
      if (!parse_index(tok.substr(0, colon), idx) || idx == 0)
        throw ParseError(line_no, "bad index in '" + std::string(tok) + "'");
      if (!parse_double(tok.substr(colon + 1), val))
        throw ParseError(line_no, "bad value in '" + std::string(tok) + "'");
      if (!std::isfinite(val))
        throw ParseError(line_no, "non-finite value in '" + std::string(tok) + "'");
      const auto zero_based = static_cast<std::uint32_t>(idx - 1);
      if (!ex.index.empty() && zero_based <= ex.index.back())
        throw ParseError(line_no, "non-increasing index " + std::to_string(idx));
      ex.index.push_back(zero_based);
      ex.value.push_back(val);
    }
    if (!ex.index.empty())
      max_dim = std::max<std::size_t>(max_dim, ex.index.back() + 1);
    examples.push_back(std::move(ex));
    if (nl == text.size()) break;
  }
  if (dimension == 0) dimension = std::max<std::size_t>(max_dim, 1);
  if (max_dim > dimension)
    throw DimensionError("data needs dimension " + std::to_string(max_dim) +
                         " but " + std::to_string(dimension) + " was requested");
  return Dataset(std::move(examples), dimension);
}

Dataset read_libsvm(const std::string& path, std::size_t dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_libsvm(ss.str(), dimension);
}

void write_libsvm(const Dataset& data, std::ostream& out) {
  for (const auto& ex : data.examples()) {
    out << format_double(ex.label);
    for (std::size_t k = 0; k < ex.index.size(); ++k)
      out << ' ' << (ex.index[k] + 1) << ':' << format_double(ex.value[k]);
    out << '\n';
  }
}

std::string to_libsvm(const Dataset& data) {
  std::ostringstream out;
  write_libsvm(data, out);
  return out.str();
}

namespace {

Matrix covariance_factor(const CovarianceSpec& spec, std::size_t d) {
  return std::visit(
      [d](const auto& c) -> Matrix {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, IdentityCovariance>) {
          return Matrix::Identity(d, d);
        } else if constexpr (std::is_same_v<T, DiagonalCovariance>) {
          if (c.variances.size() != d)
            throw DimensionError("diagonal covariance has " +
                                 std::to_string(c.variances.size()) +
                                 " entries, expected " + std::to_string(d));
          Matrix s = Matrix::Zero(d, d);
          for (std::size_t i = 0; i < d; ++i) {
            if (!(c.variances[i] > 0.0))
              throw Error("covariance is not positive definite");
            s(i, i) = std::sqrt(c.variances[i]);
          }
          return s;
        } else {
          if (c.sigma.rows() != static_cast<Eigen::Index>(d) ||
              c.sigma.cols() != static_cast<Eigen::Index>(d))
            throw DimensionError("covariance matrix has wrong shape");
          Eigen::LLT<Matrix> llt(c.sigma);
          if (llt.info() != Eigen::Success)
            throw Error("covariance is not positive definite");
          return llt.matrixL();
        }
      },
      spec);
}

}  // namespace

Dataset generate_gaussian(std::size_t n, std::size_t d,
                          const CovarianceSpec& covariance, std::uint64_t seed,
                          const LabelSpec& labels) {
  if (n == 0 || d == 0) throw Error("generate_gaussian needs n, d >= 1");
  const Matrix factor = covariance_factor(covariance, d);
  const bool diagonal = !std::holds_alternative<DenseCovariance>(covariance);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // The teacher has its own stream so features do not depend on the label rule.
  std::mt19937_64 teacher_rng(seed ^ 0xA0761D6478BD642FULL);
  std::normal_distribution<double> teacher_normal(0.0, 1.0);
  Vector teacher(d);
  const double teacher_sd = labels.teacher_scale / std::sqrt(double(d));
  for (std::size_t i = 0; i < d; ++i) teacher[i] = teacher_sd * teacher_normal(teacher_rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Example> examples;
  examples.reserve(n);
  Vector u(d);
  Vector x(d);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t i = 0; i < d; ++i) u[i] = normal(rng);
    if (diagonal)
      x = factor.diagonal().cwiseProduct(u);
    else
      x = factor * u;
    Example ex;
    ex.index.reserve(d);
    ex.value.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] == 0.0) continue;
      ex.index.push_back(static_cast<std::uint32_t>(i));
      ex.value.push_back(x[i]);
    }
    const double margin = ex.dot(teacher);
    switch (labels.rule) {
      case LabelRule::constant:
        ex.label = 1.0;
        break;
      case LabelRule::linear:
        ex.label = margin + labels.noise * teacher_normal(teacher_rng);
        break;
      case LabelRule::logistic: {
        const double p = 1.0 / (1.0 + std::exp(-margin));
        ex.label = unif(teacher_rng) < p ? 1.0 : -1.0;
        break;
      }
    }
    examples.push_back(std::move(ex));
  }
  return Dataset(std::move(examples), d);
}

std::vector<Shard> partition(const Dataset& data, std::size_t k,
                             std::uint64_t seed) {
  if (k == 0) throw Error("partition needs K >= 1");
  if (k > data.size())
    throw Error("cannot split " + std::to_string(data.size()) +
                " examples over K=" + std::to_string(k) + " nodes");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Shard> shards;
  shards.reserve(k);
  const std::size_t base = data.size() / k;
  const std::size_t extra = data.size() % k;
  std::size_t cursor = 0;
  for (std::size_t node = 0; node < k; ++node) {
    const std::size_t count = base + (node < extra ? 1 : 0);
    std::vector<Example> local;
    local.reserve(count);
    for (std::size_t i = 0; i < count; ++i) local.push_back(data[order[cursor++]]);
    shards.push_back(Shard{static_cast<int>(node),
                           Dataset(std::move(local), data.dimension())});
  }
  return shards;
}

Dataset make_quadratic_dataset(const Matrix& hessian, const Vector& center) {
  const auto d = hessian.rows();
  if (hessian.cols() != d || center.size() != d || d == 0)
    throw DimensionError("quadratic needs a square H matching the center");
  Eigen::LLT<Matrix> llt(hessian);
  if (llt.info() != Eigen::Success) throw Error("H is not positive definite");
  const Matrix lower = llt.matrixL();
  const double scale = std::sqrt(double(d));

  std::vector<Example> examples;
  examples.reserve(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Example ex;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double v = scale * lower(i, j);
      if (v == 0.0) continue;
      ex.index.push_back(static_cast<std::uint32_t>(i));
      ex.value.push_back(v);
    }
    ex.label = ex.dot(center);
    examples.push_back(std::move(ex));
  }
  return Dataset(std::move(examples), static_cast<std::size_t>(d));
}

}  // namespace dsaga
