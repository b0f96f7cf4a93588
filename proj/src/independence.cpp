#include "netcausal/independence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "netcausal/error.hpp"

namespace netcausal {

void KernelConfig::validate() const {
  if (fixed_bandwidth && !(*fixed_bandwidth > 0.0))
    throw InvalidInput("fixed kernel bandwidth must be > 0");
  if (!(regularization > 0.0)) throw InvalidInput("kernel regularization must be > 0");
  if (null == NullDistribution::Permutation && permutations == 0)
    throw InvalidInput("permutation null needs at least one permutation");
}

namespace {

constexpr std::size_t kMedianSubsample = 1000;

std::vector<std::size_t> subsample_rows(std::size_t n) {
  std::vector<std::size_t> rows;
  if (n <= kMedianSubsample) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    for (std::size_t i = 0; i < kMedianSubsample; ++i) rows.push_back(i * n / kMedianSubsample);
  }
  return rows;
}

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

/// Median of pairwise Euclidean row distances; falls back to the median of
/// the non-zero distances when ties dominate.
double median_row_distance(const Eigen::MatrixXd& z) {
  const auto rows = subsample_rows(static_cast<std::size_t>(z.rows()));
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b)
      d.push_back((z.row(static_cast<Eigen::Index>(rows[a])) - z.row(static_cast<Eigen::Index>(rows[b]))).norm());
  double med = median_of(d);
  if (med > 0.0) return med;
  std::vector<double> positive;
  std::copy_if(d.begin(), d.end(), std::back_inserter(positive), [](double v) { return v > 0.0; });
  if (positive.empty()) throw InvalidInput("constant input: kernel bandwidth undefined");
  return median_of(positive);
}

Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& z, double bandwidth) {
  const Eigen::Index n = z.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::exp(scale * (z.row(i) - z.row(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd gaussian_gram(const Eigen::VectorXd& x, double bandwidth) {
  const Eigen::Index n = x.size();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = x[i] - x[j];
      const double v = std::exp(scale * d * d);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd double_centered(const Eigen::MatrixXd& k) {
  const Eigen::VectorXd col_means = k.colwise().mean().transpose();
  const double grand = col_means.mean();
  Eigen::MatrixXd out = k;
  // k is symmetric, so row means equal column means.
  out.colwise() -= col_means;
  out.rowwise() -= col_means.transpose();
  out.array() += grand;
  return out;
}

/// Ingredients shared by the statistic and both null distributions.
struct HsicParts {
  Eigen::MatrixXd k;   // raw Gram matrices
  Eigen::MatrixXd l;
  Eigen::MatrixXd kc;  // H K H
  Eigen::MatrixXd lc;  // H L H
  double statistic;    // (1/n^2) sum_ij kc_ij lc_ij
};

double bandwidth_for(const Eigen::VectorXd& v, const KernelConfig& cfg) {
  if (cfg.fixed_bandwidth) return *cfg.fixed_bandwidth;
  return median_heuristic(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

HsicParts hsic_parts(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelConfig& cfg) {
  if (x.size() != y.size()) throw InvalidInput("HSIC inputs differ in length");
  if (x.size() < 5) throw InvalidInput("HSIC needs at least 5 samples");
  cfg.validate();
  HsicParts p;
  p.k = gaussian_gram(x, bandwidth_for(x, cfg));
  p.l = gaussian_gram(y, bandwidth_for(y, cfg));
  p.kc = double_centered(p.k);
  p.lc = double_centered(p.l);
  const double n = static_cast<double>(x.size());
  p.statistic = p.kc.cwiseProduct(p.lc).sum() / (n * n);
  return p;
}

/// Gamma approximation to the null law of n * HSIC_b, with mean and variance
/// estimated from the Gram matrices.
double gamma_pvalue(const HsicParts& p) {
  const Eigen::Index m = p.k.rows();
  const double md = static_cast<double>(m);
  const double test_stat = md * p.statistic;

  Eigen::MatrixXd prod = p.kc.cwiseProduct(p.lc) / 6.0;
  prod = prod.cwiseProduct(prod);
  double var = (prod.sum() - prod.diagonal().sum()) / (md * (md - 1.0));
  var *= 72.0 * (md - 4.0) * (md - 5.0) / (md * (md - 1.0) * (md - 2.0) * (md - 3.0));

  const double mu_x = (p.k.sum() - p.k.diagonal().sum()) / (md * (md - 1.0));
  const double mu_y = (p.l.sum() - p.l.diagonal().sum()) / (md * (md - 1.0));
  const double mean = (1.0 - mu_x) * (1.0 - mu_y) / md;

  if (!(var > 0.0) || !(mean > 0.0)) return 1.0;
  const double shape = mean * mean / var;
  const double scale = var * md / mean;
  if (test_stat <= 0.0) return 1.0;
  return std::clamp(boost::math::gamma_q(shape, test_stat / scale), 0.0, 1.0);
}

double permutation_pvalue(const HsicParts& p, std::size_t permutations, std::uint64_t seed) {
  const Eigen::Index n = p.kc.rows();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::size_t exceed = 0;
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  for (std::size_t b = 0; b < permutations; ++b) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < n; ++i) acc += p.kc(i, j) * p.lc(perm[static_cast<std::size_t>(i)], pj);
    }
    if (acc / nn >= p.statistic) ++exceed;
  }
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
}

Eigen::VectorXd to_vector(ColumnView x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

double median_heuristic(ColumnView x) {
  if (x.size() < 2) throw InvalidInput("median heuristic needs at least 2 values");
  Eigen::MatrixXd z = to_vector(x);
  try {
    return median_row_distance(z);
  } catch (const InvalidInput&) {
    throw InvalidInput("median heuristic undefined for a constant vector");
  }
}

double hsic_statistic(ColumnView x, ColumnView y, const KernelConfig& cfg) {
  return hsic_parts(to_vector(x), to_vector(y), cfg).statistic;
}

CiTestResult hsic_test(ColumnView x, ColumnView y, double level, const KernelConfig& cfg) {
  return detail::hsic_test_vectors(to_vector(x), to_vector(y), level, cfg, 0, "hsic");
}

double hsic_permutation_pvalue(ColumnView x, ColumnView y, const KernelConfig& cfg,
                               std::size_t permutations, std::uint64_t seed) {
  if (permutations == 0) throw InvalidInput("need at least one permutation");
  return permutation_pvalue(hsic_parts(to_vector(x), to_vector(y), cfg), permutations, seed);
}

CiTestResult kernel_ci_test(ColumnView x, ColumnView y, std::span<const ColumnView> z,
                            double level, const KernelConfig& cfg) {
  if (z.empty()) return hsic_test(x, y, level, cfg);
  if (x.size() != y.size()) throw InvalidInput("test inputs differ in length");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd zm(n, static_cast<Eigen::Index>(z.size()));
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j].size() != x.size()) throw InvalidInput("conditioning column differs in length");
    zm.col(static_cast<Eigen::Index>(j)) = detail::standardized(z[j]);
  }
  cfg.validate();
  const detail::KernelResidualizer resid(zm, cfg.regularization);
  return detail::hsic_test_vectors(resid.residual(detail::standardized(x)),
                                   resid.residual(detail::standardized(y)), level, cfg, z.size(),
                                   "kernel_ci");
}

CiTestResult fisher_z_test(ColumnView x, ColumnView y, std::span<const ColumnView> z, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("test level must lie in (0, 1)");
  if (x.size() != y.size()) throw InvalidInput("test inputs differ in length");
  const std::size_t n = x.size();
  if (n <= z.size() + 3)
    throw InvalidInput("Fisher-z test needs n > |Z| + 3 (n=" + std::to_string(n) +
                       ", |Z|=" + std::to_string(z.size()) + ")");
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(z.size() + 1));
  design.col(0).setOnes();
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j].size() != n) throw InvalidInput("conditioning column differs in length");
    design.col(static_cast<Eigen::Index>(j + 1)) = to_vector(z[j]);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) throw ComputationError("conditioning set is perfectly collinear");

  const Eigen::VectorXd xv = to_vector(x);
  const Eigen::VectorXd yv = to_vector(y);
  const Eigen::VectorXd rx = xv - design * qr.solve(xv);
  const Eigen::VectorXd ry = yv - design * qr.solve(yv);
  const double sxx = rx.squaredNorm();
  const double syy = ry.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ComputationError("regression residual has zero variance");

  double r = rx.dot(ry) / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15);
  CiTestResult res;
  res.statistic = std::sqrt(static_cast<double>(n - z.size() - 3)) * std::atanh(r);
  res.p_value = std::clamp(normal_two_sided(res.statistic), 0.0, 1.0);
  res.independent = res.p_value > level;
  res.test_name = "fisher_z";
  res.conditioning_size = z.size();
  return res;
}

namespace detail {

Eigen::VectorXd standardized(ColumnView x) {
  Eigen::VectorXd v = to_vector(x);
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  v.array() -= mean;
  const double sd = n > 1 ? std::sqrt(v.squaredNorm() / (n - 1.0)) : 0.0;
  if (sd > 0.0) v /= sd;
  return v;
}

KernelResidualizer::KernelResidualizer(const Eigen::MatrixXd& z, double regularization) {
  if (z.rows() < 5) throw InvalidInput("kernel residualization needs at least 5 samples");
  gram_ = gaussian_gram(z, median_row_distance(z));
  Eigen::MatrixXd system = gram_;
  system.diagonal().array() += regularization;
  factor_.compute(system);
  if (factor_.info() != Eigen::Success) throw ComputationError("kernel ridge system is singular");
}

Eigen::VectorXd KernelResidualizer::residual(const Eigen::VectorXd& v) const {
  return v - gram_ * factor_.solve(v);
}

CiTestResult hsic_test_vectors(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double level,
                               const KernelConfig& cfg, std::size_t conditioning_size,
                               const char* name) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("test level must lie in (0, 1)");
  const HsicParts parts = hsic_parts(x, y, cfg);
  CiTestResult res;
  res.statistic = parts.statistic;
  res.p_value = cfg.null == NullDistribution::Gamma
                    ? gamma_pvalue(parts)
                    : permutation_pvalue(parts, cfg.permutations, cfg.seed);
  res.independent = res.p_value > level;
  res.test_name = name;
  res.conditioning_size = conditioning_size;
  return res;
}

}  // namespace detail

}  // namespace netcausal
