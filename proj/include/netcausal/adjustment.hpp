#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netcausal/dataset.hpp"
#include "netcausal/graph.hpp"

namespace netcausal {

/// Gaussian kernel density with its smoothed CDF.
class KernelMarginal {
 public:
  KernelMarginal(std::span<const double> values, double bandwidth);

  double bandwidth() const noexcept { return bandwidth_; }
  double min() const noexcept { return sorted_.front(); }
  double max() const noexcept { return sorted_.back(); }
  double cdf(double v) const;
  double pdf(double v) const;
  /// Values beyond this range are treated as outside the marginal's support.
  bool in_support(double v) const;

 private:
  std::vector<double> sorted_;
  double bandwidth_;
};

/// Rule-of-thumb bandwidth 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> values);

class CopulaModel {
 public:
  CopulaModel(std::vector<std::string> variables, std::vector<KernelMarginal> marginals,
              Eigen::MatrixXd correlation, double shrinkage);

  const std::vector<std::string>& variables() const noexcept { return variables_; }
  std::size_t index_of(std::string_view name) const;
  const KernelMarginal& marginal(std::string_view name) const { return marginals_[index_of(name)]; }
  const Eigen::MatrixXd& correlation() const noexcept { return correlation_; }
  double shrinkage() const noexcept { return shrinkage_; }
  double correlation(std::string_view a, std::string_view b) const;

  /// Latent normal score of a value under a variable's marginal. Throws
  /// InvalidInput when the value lies outside the marginal's support.
  double latent_score(std::string_view name, double value) const;

 private:
  std::vector<std::string> variables_;
  std::vector<KernelMarginal> marginals_;
  Eigen::MatrixXd correlation_;
  double shrinkage_;
};

/// Mid-ranks divided by (n + 1), one column per variable.
Eigen::MatrixXd pseudo_observations(const Dataset& data, std::span<const std::string> vars);

/// Gaussian copula with kernel marginals. The correlation matrix is shrunk
/// toward the identity by the smallest lambda in {0, 0.01, ..., 0.5} giving a
/// minimum eigenvalue >= 1e-6.
CopulaModel fit_copula(const Dataset& data, std::span<const std::string> vars);

using Assignment = std::vector<std::pair<std::string, double>>;

/// Density of `target` on `grid` given the assigned values of other variables.
std::vector<double> conditional_density(const CopulaModel& model, std::string_view target,
                                        const Assignment& given, std::span<const double> grid);

struct InterventionQuery {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> adjustment_set;
  std::vector<double> treatment_values;
  std::vector<double> outcome_grid;

  void validate() const;
};

enum class EstimateMethod { Adjusted, Naive };
std::string_view to_string(EstimateMethod method);

struct PosteriorDensity {
  double treatment_value = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
  EstimateMethod method = EstimateMethod::Adjusted;
  std::size_t support_count = 0;
  bool low_support = false;
};

/// Low-support flag: fewer than `min_count` samples within
/// radius_sd_fraction * sd(treatment) of the intervention value.
struct SupportRule {
  double radius_sd_fraction = 0.5;
  std::size_t min_count = 30;
};

struct AdjustOptions {
  /// When set, the adjustment set must pass satisfies_backdoor on it.
  const Dag* graph = nullptr;
  /// Skip certification altogether.
  bool unsafe = false;
  SupportRule support{};
};

/// Back-door adjusted outcome density for every treatment value: the
/// copula conditional of the outcome given (treatment, Z) averaged over the
/// observed Z rows, renormalized on the grid.
std::vector<PosteriorDensity> backdoor_adjust(const Dataset& data, const CopulaModel& model,
                                              const InterventionQuery& query,
                                              const AdjustOptions& options = {});

/// Observational outcome density given the treatment alone.
std::vector<PosteriorDensity> naive_conditional(const Dataset& data, const CopulaModel& model,
                                                const InterventionQuery& query,
                                                const SupportRule& support = {});

/// Samples with |treatment - theta| <= radius.
std::size_t support_count(const Dataset& data, std::string_view treatment, double theta,
                          double radius);
double support_radius(const Dataset& data, std::string_view treatment, const SupportRule& rule);

struct PosteriorSummary {
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

PosteriorSummary posterior_summary(const PosteriorDensity& p);

/// `points` values spanning the observed outcome range +/- 3 bandwidths.
std::vector<double> default_outcome_grid(const CopulaModel& model, std::string_view outcome,
                                         std::size_t points = 256);

double trapezoid(std::span<const double> grid, std::span<const double> values);
/// Half the L1 distance between two densities on the same grid.
double total_variation(std::span<const double> grid, std::span<const double> a,
                       std::span<const double> b);

/// Plot-ready rows: treatment_value,grid_point,density,method,support_count
void write_posterior_csv(std::ostream& out, std::span<const PosteriorDensity> posteriors);
/// Per-value summaries; low-support entries are listed separately and left
/// out of "summaries" unless include_low_support is set.
std::string posterior_summary_json(std::span<const PosteriorDensity> posteriors,
                                   bool include_low_support = false);

}  // namespace netcausal
