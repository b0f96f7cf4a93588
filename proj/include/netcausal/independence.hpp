#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace netcausal {

enum class NullDistribution { Gamma, Permutation };

struct KernelConfig {
  /// Gaussian kernel bandwidth; median heuristic when empty.
  std::optional<double> fixed_bandwidth;
  /// Ridge term for kernel residualization on standardized data.
  double regularization = 1e-3;
  NullDistribution null = NullDistribution::Gamma;
  std::size_t permutations = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CiTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool independent = true;
  std::string test_name;
  std::size_t conditioning_size = 0;
};

using ColumnView = std::span<const double>;

/// Median of pairwise absolute differences (evenly spaced subsample of at
/// most 1000 points). Throws on constant input.
double median_heuristic(ColumnView x);

/// Biased HSIC estimate (1/n^2) trace(K H L H) with Gaussian kernels.
double hsic_statistic(ColumnView x, ColumnView y, const KernelConfig& cfg = {});

/// HSIC independence test; p-value from a moment-matched gamma null unless
/// cfg.null selects the permutation null.
CiTestResult hsic_test(ColumnView x, ColumnView y, double level, const KernelConfig& cfg = {});

/// Permutation p-value of the HSIC statistic, (1 + #{T_perm >= T}) / (1 + B).
double hsic_permutation_pvalue(ColumnView x, ColumnView y, const KernelConfig& cfg,
                               std::size_t permutations, std::uint64_t seed);

/// Residualizes x and y on z by Gaussian-kernel ridge regression, then runs
/// hsic_test on the residuals. Empty z is exactly hsic_test.
CiTestResult kernel_ci_test(ColumnView x, ColumnView y, std::span<const ColumnView> z,
                            double level, const KernelConfig& cfg = {});

/// Partial-correlation test with Fisher's z transform.
CiTestResult fisher_z_test(ColumnView x, ColumnView y, std::span<const ColumnView> z,
                           double level);

namespace detail {

/// Standardized copy (mean 0, sample variance 1); constant input is centred only.
Eigen::VectorXd standardized(ColumnView x);

/// x minus its kernel ridge fit on the rows of z (n x d, standardized).
class KernelResidualizer {
 public:
  KernelResidualizer(const Eigen::MatrixXd& z, double regularization);
  Eigen::VectorXd residual(const Eigen::VectorXd& v) const;

 private:
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

CiTestResult hsic_test_vectors(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                               double level, const KernelConfig& cfg,
                               std::size_t conditioning_size, const char* name);

}  // namespace detail

}  // namespace netcausal
