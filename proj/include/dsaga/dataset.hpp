#pragma once

#include "dsaga/types.hpp"

#include <iosfwd>
#include <string_view>
#include <variant>
#include <vector>

namespace dsaga {

/// One labeled example with a sparse feature vector. Indices are 0-based,
/// strictly increasing, and every value is finite.
struct Example {
  double label = 1.0;
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  double dot(const Vector& w) const;
  double squared_norm() const;
  /// out += scale * x
  void axpy(double scale, Vector& out) const;

  bool operator==(const Example&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Example> examples, std::size_t dimension);

  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  std::size_t dimension() const { return dimension_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Example> examples_;
  std::size_t dimension_ = 0;
};

/// The examples held by one node of the cluster.
struct Shard {
  int node_id = 0;
  Dataset data;

  std::size_t local_count() const { return data.size(); }
  const std::vector<Example>& examples() const { return data.examples(); }
};

/// Parses LIBSVM / SVMlight text. `dimension` of 0 means max index + 1.
Dataset parse_libsvm(std::string_view text, std::size_t dimension = 0);
Dataset read_libsvm(const std::string& path, std::size_t dimension = 0);
void write_libsvm(const Dataset& data, std::ostream& out);
std::string to_libsvm(const Dataset& data);

struct IdentityCovariance {};
struct DiagonalCovariance {
  std::vector<double> variances;
};
struct DenseCovariance {
  Matrix sigma;
};
using CovarianceSpec =
    std::variant<IdentityCovariance, DiagonalCovariance, DenseCovariance>;

enum class LabelRule {
  constant,  // every label +1
  linear,    // y = x.w_teacher + noise * eps
  logistic,  // y = +1 with probability sigmoid(x.w_teacher)
};

struct LabelSpec {
  LabelRule rule = LabelRule::constant;
  double noise = 0.0;
  /// Teacher weights are drawn N(0, teacher_scale^2 / d).
  double teacher_scale = 1.0;
};

/// Draws n examples x = S u with u standard normal and S S^T = covariance.
Dataset generate_gaussian(std::size_t n, std::size_t d,
                          const CovarianceSpec& covariance, std::uint64_t seed,
                          const LabelSpec& labels = {});

/// Shuffles with `seed` then splits into K contiguous blocks whose sizes
/// differ by at most one (larger blocks first).
std::vector<Shard> partition(const Dataset& data, std::size_t k,
                             std::uint64_t seed);

/// A least-squares dataset whose average loss is exactly
/// 0.5 (w - center)^T H (w - center). Requires H positive definite.
Dataset make_quadratic_dataset(const Matrix& hessian, const Vector& center);

}  // namespace dsaga
