#include "netcausal/adjustment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "netcausal/error.hpp"

namespace netcausal {

namespace {

constexpr double kCdfClamp = 1e-6;
constexpr double kKernelCutoff = 9.0;   // standard deviations of the kernel
constexpr double kSupportMargin = 10.0;  // bandwidths beyond the data range
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double u) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, u);
}

double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double clamped_score(double u) { return normal_quantile(std::clamp(u, kCdfClamp, 1.0 - kCdfClamp)); }

double sample_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

/// Linear-interpolation quantile of sorted data.
double sorted_quantile(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Marginals

double silverman_bandwidth(std::span<const double> values) {
  if (values.size() < 2) throw InvalidInput("bandwidth needs at least 2 values");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double sd = sample_sd(values);
  const double iqr = sorted_quantile(s, 0.75) - sorted_quantile(s, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
  if (!(h > 0.0)) throw InvalidInput("constant column: kernel bandwidth undefined");
  return h;
}

KernelMarginal::KernelMarginal(std::span<const double> values, double bandwidth)
    : sorted_(values.begin(), values.end()), bandwidth_(bandwidth) {
  if (sorted_.empty()) throw InvalidInput("marginal needs data");
  if (!(bandwidth_ > 0.0)) throw InvalidInput("marginal bandwidth must be > 0");
  std::sort(sorted_.begin(), sorted_.end());
}

double KernelMarginal::cdf(double v) const {
  const double reach = kKernelCutoff * bandwidth_;
  const auto first = std::lower_bound(sorted_.begin(), sorted_.end(), v - reach);
  const auto last = std::upper_bound(first, sorted_.end(), v + reach);
  double acc = static_cast<double>(first - sorted_.begin());
  for (auto it = first; it != last; ++it) acc += normal_cdf((v - *it) / bandwidth_);
  return acc / static_cast<double>(sorted_.size());
}

double KernelMarginal::pdf(double v) const {
  const double reach = kKernelCutoff * bandwidth_;
  const auto first = std::lower_bound(sorted_.begin(), sorted_.end(), v - reach);
  const auto last = std::upper_bound(first, sorted_.end(), v + reach);
  double acc = 0.0;
  for (auto it = first; it != last; ++it) acc += std::exp(log_normal_pdf((v - *it) / bandwidth_));
  return acc / (static_cast<double>(sorted_.size()) * bandwidth_);
}

bool KernelMarginal::in_support(double v) const {
  return v >= min() - kSupportMargin * bandwidth_ && v <= max() + kSupportMargin * bandwidth_;
}

// ---------------------------------------------------------------------------
// Copula model

CopulaModel::CopulaModel(std::vector<std::string> variables, std::vector<KernelMarginal> marginals,
                         Eigen::MatrixXd correlation, double shrinkage)
    : variables_(std::move(variables)),
      marginals_(std::move(marginals)),
      correlation_(std::move(correlation)),
      shrinkage_(shrinkage) {
  const auto k = static_cast<Eigen::Index>(variables_.size());
  if (marginals_.size() != variables_.size() || correlation_.rows() != k || correlation_.cols() != k)
    throw InvalidInput("copula dimensions disagree");
}

std::size_t CopulaModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i] == name) return i;
  throw InvalidInput("variable '" + std::string(name) + "' is not in the copula model");
}

double CopulaModel::correlation(std::string_view a, std::string_view b) const {
  return correlation_(static_cast<Eigen::Index>(index_of(a)), static_cast<Eigen::Index>(index_of(b)));
}

double CopulaModel::latent_score(std::string_view name, double value) const {
  const auto& m = marginal(name);
  if (!m.in_support(value))
    throw InvalidInput("value " + format_real(value) + " lies outside the support of '" +
                       std::string(name) + "'");
  return clamped_score(m.cdf(value));
}

Eigen::MatrixXd pseudo_observations(const Dataset& data, std::span<const std::string> vars) {
  const std::size_t n = data.n();
  if (n < 20) throw InvalidInput("pseudo-observations need at least 20 samples");
  Eigen::MatrixXd u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(vars.size()));
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto col = data.column(vars[j]);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
    std::size_t i = 0;
    while (i < n) {
      std::size_t k = i;
      while (k + 1 < n && col[idx[k + 1]] == col[idx[i]]) ++k;
      const double mid_rank = 0.5 * static_cast<double>(i + k) + 1.0;
      for (std::size_t t = i; t <= k; ++t)
        u(static_cast<Eigen::Index>(idx[t]), static_cast<Eigen::Index>(j)) =
            mid_rank / static_cast<double>(n + 1);
      i = k + 1;
    }
  }
  return u;
}

CopulaModel fit_copula(const Dataset& data, std::span<const std::string> vars) {
  if (vars.size() < 2) throw InvalidInput("copula needs at least 2 variables");
  if (data.n() < 50) throw InvalidInput("copula fit needs at least 50 samples");
  std::set<std::string> unique(vars.begin(), vars.end());
  if (unique.size() != vars.size()) throw InvalidInput("copula variables must be distinct");

  std::vector<KernelMarginal> marginals;
  for (const auto& v : vars) {
    const auto col = data.column(v);
    if (sample_sd(col) == 0.0) throw InvalidInput("column '" + v + "' is constant");
    marginals.emplace_back(col, silverman_bandwidth(col));
  }

  Eigen::MatrixXd scores = pseudo_observations(data, vars).unaryExpr([](double u) { return normal_quantile(u); });
  scores.rowwise() -= scores.colwise().mean();
  const Eigen::VectorXd norms = scores.colwise().norm().transpose();
  Eigen::MatrixXd corr = (scores.transpose() * scores).array() / (norms * norms.transpose()).array();
  corr.diagonal().setOnes();
  corr = 0.5 * (corr + corr.transpose());

  const auto k = corr.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(k, k);
  for (int step = 0; step <= 50; ++step) {
    const double lambda = step / 100.0;
    Eigen::MatrixXd shrunk = (1.0 - lambda) * corr + lambda * identity;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shrunk, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() >= 1e-6)
      return CopulaModel({vars.begin(), vars.end()}, std::move(marginals), std::move(shrunk), lambda);
  }
  throw ComputationError("copula correlation cannot be repaired to positive definite");
}

// ---------------------------------------------------------------------------
// Conditional densities

namespace {

/// Latent-normal regression of one variable on a list of others.
struct LatentRegression {
  Eigen::VectorXd weights;
  double sd = 1.0;
};

LatentRegression latent_regression(const CopulaModel& m, std::size_t target,
                                   const std::vector<std::size_t>& given) {
  LatentRegression r;
  const auto g = static_cast<Eigen::Index>(given.size());
  if (g == 0) return r;
  Eigen::MatrixXd s_gg(g, g);
  Eigen::VectorXd s_gt(g);
  const auto& c = m.correlation();
  for (Eigen::Index i = 0; i < g; ++i) {
    s_gt[i] = c(static_cast<Eigen::Index>(given[static_cast<std::size_t>(i)]), static_cast<Eigen::Index>(target));
    for (Eigen::Index j = 0; j < g; ++j)
      s_gg(i, j) = c(static_cast<Eigen::Index>(given[static_cast<std::size_t>(i)]),
                     static_cast<Eigen::Index>(given[static_cast<std::size_t>(j)]));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_gg);
  if (llt.info() != Eigen::Success) throw ComputationError("conditioning block is not positive definite");
  r.weights = llt.solve(s_gt);
  r.sd = std::sqrt(std::max(1.0 - s_gt.dot(r.weights), 1e-12));
  return r;
}

/// Per grid point: latent score and log(f(y) / phi(score)).
struct GridTerms {
  std::vector<double> score;
  std::vector<double> log_ratio;
  std::vector<bool> zero;
};

GridTerms grid_terms(const KernelMarginal& m, std::span<const double> grid) {
  GridTerms t;
  for (double y : grid) {
    const double z = clamped_score(m.cdf(y));
    const double f = m.pdf(y);
    t.score.push_back(z);
    t.zero.push_back(!(f > 0.0));
    t.log_ratio.push_back(f > 0.0 ? std::log(f) - log_normal_pdf(z) : 0.0);
  }
  return t;
}

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw InvalidInput("outcome grid needs at least 2 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidInput("outcome grid must be strictly increasing");
}

/// Mixture over latent means `means` of the conditional density, on the grid.
std::vector<double> mixture_density(const GridTerms& t, std::span<const double> means, double sd) {
  std::vector<double> out(t.score.size(), 0.0);
  const double inv_sd = 1.0 / sd;
  const double log_sd = std::log(sd);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (t.zero[k]) continue;
    double acc = 0.0;
    for (double mu : means) {
      const double e = (t.score[k] - mu) * inv_sd;
      acc += std::exp(log_normal_pdf(e) - log_sd + t.log_ratio[k]);
    }
    out[k] = acc / static_cast<double>(means.size());
  }
  return out;
}

}  // namespace

std::vector<double> conditional_density(const CopulaModel& model, std::string_view target,
                                        const Assignment& given, std::span<const double> grid) {
  check_grid(grid);
  const std::size_t t = model.index_of(target);
  std::vector<std::size_t> idx;
  Eigen::VectorXd scores(static_cast<Eigen::Index>(given.size()));
  for (std::size_t i = 0; i < given.size(); ++i) {
    const std::size_t g = model.index_of(given[i].first);
    if (g == t) throw InvalidInput("target cannot also be conditioned on");
    if (std::find(idx.begin(), idx.end(), g) != idx.end())
      throw InvalidInput("variable '" + given[i].first + "' assigned twice");
    idx.push_back(g);
    scores[static_cast<Eigen::Index>(i)] = model.latent_score(given[i].first, given[i].second);
  }
  const auto& marginal = model.marginal(target);
  if (given.empty()) {
    std::vector<double> out;
    for (double y : grid) out.push_back(marginal.pdf(y));
    return out;
  }
  const auto reg = latent_regression(model, t, idx);
  const double mean = reg.weights.dot(scores);
  return mixture_density(grid_terms(marginal, grid), std::span<const double>(&mean, 1), reg.sd);
}

// ---------------------------------------------------------------------------
// Interventional and observational posteriors

void InterventionQuery::validate() const {
  if (treatment == outcome) throw InvalidInput("treatment and outcome must differ");
  std::set<std::string> z(adjustment_set.begin(), adjustment_set.end());
  if (z.size() != adjustment_set.size()) throw InvalidInput("adjustment set has duplicates");
  if (z.count(treatment)) throw InvalidInput("treatment cannot be in the adjustment set");
  if (z.count(outcome)) throw InvalidInput("outcome cannot be in the adjustment set");
  if (treatment_values.empty()) throw InvalidInput("no treatment values requested");
  for (std::size_t i = 1; i < treatment_values.size(); ++i)
    if (!(treatment_values[i] > treatment_values[i - 1]))
      throw InvalidInput("treatment values must be strictly increasing");
  if (outcome_grid.empty()) throw InvalidInput("empty outcome grid");
  check_grid(outcome_grid);
}

std::string_view to_string(EstimateMethod method) {
  return method == EstimateMethod::Adjusted ? "adjusted" : "naive";
}

std::size_t support_count(const Dataset& data, std::string_view treatment, double theta, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("support radius must be > 0");
  const auto col = data.column(treatment);
  return static_cast<std::size_t>(
      std::count_if(col.begin(), col.end(), [&](double v) { return std::abs(v - theta) <= radius; }));
}

double support_radius(const Dataset& data, std::string_view treatment, const SupportRule& rule) {
  if (data.n() < 2) throw InvalidInput("support radius needs at least 2 samples");
  const double r = rule.radius_sd_fraction * sample_sd(data.column(treatment));
  if (!(r > 0.0)) throw InvalidInput("treatment '" + std::string(treatment) + "' is constant");
  return r;
}

namespace {

std::vector<PosteriorDensity> estimate(const Dataset& data, const CopulaModel& model,
                                       const InterventionQuery& q,
                                       const std::vector<std::string>& adjustment,
                                       EstimateMethod method, const SupportRule& support) {
  const std::size_t x = model.index_of(q.treatment);
  const std::size_t y = model.index_of(q.outcome);
  std::vector<std::size_t> given{x};
  for (const auto& z : adjustment) given.push_back(model.index_of(z));

  const auto reg = latent_regression(model, y, given);
  const auto terms = grid_terms(model.marginal(q.outcome), q.outcome_grid);

  // Latent offset contributed by each observed adjustment row.
  std::vector<double> offsets(adjustment.empty() ? 1 : data.n(), 0.0);
  for (std::size_t j = 0; j < adjustment.size(); ++j) {
    const auto col = data.column(adjustment[j]);
    const double w = reg.weights[static_cast<Eigen::Index>(j + 1)];
    for (std::size_t i = 0; i < col.size(); ++i) offsets[i] += w * model.latent_score(adjustment[j], col[i]);
  }

  const double radius = support_radius(data, q.treatment, support);
  const auto& tm = model.marginal(q.treatment);
  std::vector<PosteriorDensity> out;
  std::vector<double> means(offsets.size());
  for (double theta : q.treatment_values) {
    // Values past the marginal's support are pinned to its edge and flagged.
    const double score = clamped_score(tm.cdf(theta));
    const double base = reg.weights[0] * score;
    std::transform(offsets.begin(), offsets.end(), means.begin(), [&](double o) { return base + o; });

    PosteriorDensity p;
    p.treatment_value = theta;
    p.grid = q.outcome_grid;
    p.density = mixture_density(terms, means, reg.sd);
    p.method = method;
    const double mass = trapezoid(p.grid, p.density);
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw ComputationError("posterior at " + format_real(theta) + " has no mass on the outcome grid");
    for (auto& d : p.density) d /= mass;
    p.support_count = support_count(data, q.treatment, theta, radius);
    p.low_support = p.support_count < support.min_count || !tm.in_support(theta);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<PosteriorDensity> backdoor_adjust(const Dataset& data, const CopulaModel& model,
                                              const InterventionQuery& query,
                                              const AdjustOptions& options) {
  query.validate();
  if (!options.unsafe) {
    if (!options.graph)
      throw InvalidInput("adjustment set is uncertified: supply a graph or pass the unsafe flag");
    const Dag& g = *options.graph;
    const auto cert = satisfies_backdoor(g, g.id(query.treatment), g.id(query.outcome),
                                         g.ids(query.adjustment_set));
    if (!cert.valid) {
      std::string why;
      if (cert.violation->kind == BackdoorViolation::Kind::Descendant)
        why = "'" + g.name(cert.violation->descendant) + "' descends from the treatment";
      else
        why = "open back-door path " + format_path(g, cert.violation->path);
      throw InvalidInput("adjustment set fails the back-door criterion: " + why);
    }
  }
  return estimate(data, model, query, query.adjustment_set, EstimateMethod::Adjusted, options.support);
}

std::vector<PosteriorDensity> naive_conditional(const Dataset& data, const CopulaModel& model,
                                                const InterventionQuery& query,
                                                const SupportRule& support) {
  InterventionQuery q = query;
  q.adjustment_set.clear();
  q.validate();
  return estimate(data, model, q, {}, EstimateMethod::Naive, support);
}

// ---------------------------------------------------------------------------
// Summaries

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size()) throw InvalidInput("grid and values differ in length");
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  return acc;
}

double total_variation(std::span<const double> grid, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("densities differ in length");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = std::abs(a[i] - b[i]);
  return 0.5 * trapezoid(grid, diff);
}

PosteriorSummary posterior_summary(const PosteriorDensity& p) {
  const auto& g = p.grid;
  const auto& f = p.density;
  if (g.size() != f.size() || g.size() < 2) throw InvalidInput("posterior grid is malformed");
  if (std::any_of(f.begin(), f.end(), [](double v) { return !(v >= 0.0); }))
    throw InvalidInput("posterior density must be non-negative");
  if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; }))
    throw InvalidInput("posterior density is identically zero");
  const double mass = trapezoid(g, f);
  if (mass < 0.9 || mass > 1.1)
    throw InvalidInput("posterior integrates to " + format_real(mass) + ", outside [0.9, 1.1]");

  std::vector<double> cum(g.size(), 0.0);
  double first_moment = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double dx = g[i] - g[i - 1];
    cum[i] = cum[i - 1] + 0.5 * (f[i] + f[i - 1]) * dx;
    first_moment += 0.5 * (g[i] * f[i] + g[i - 1] * f[i - 1]) * dx;
  }
  auto quantile = [&](double q) {
    const double target = q * mass;
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    if (it == cum.begin()) return g.front();
    if (it == cum.end()) return g.back();
    const auto i = static_cast<std::size_t>(it - cum.begin());
    const double span = cum[i] - cum[i - 1];
    const double t = span > 0.0 ? (target - cum[i - 1]) / span : 0.0;
    return g[i - 1] + t * (g[i] - g[i - 1]);
  };
  return PosteriorSummary{first_moment / mass, quantile(0.5), quantile(0.1), quantile(0.9)};
}

std::vector<double> default_outcome_grid(const CopulaModel& model, std::string_view outcome,
                                         std::size_t points) {
  if (points < 2) throw InvalidInput("outcome grid needs at least 2 points");
  const auto& m = model.marginal(outcome);
  const double lo = m.min() - 3.0 * m.bandwidth();
  const double hi = m.max() + 3.0 * m.bandwidth();
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

void write_posterior_csv(std::ostream& out, std::span<const PosteriorDensity> posteriors) {
  out << "treatment_value,grid_point,density,method,support_count\n";
  for (const auto& p : posteriors)
    for (std::size_t i = 0; i < p.grid.size(); ++i)
      out << format_real(p.treatment_value) << ',' << format_real(p.grid[i]) << ','
          << format_real(p.density[i]) << ',' << to_string(p.method) << ',' << p.support_count << '\n';
}

std::string posterior_summary_json(std::span<const PosteriorDensity> posteriors,
                                   bool include_low_support) {
  using nlohmann::json;
  json doc;
  doc["summaries"] = json::array();
  doc["low_support"] = json::array();
  for (const auto& p : posteriors) {
    json entry{{"treatment_value", p.treatment_value},
               {"method", std::string(to_string(p.method))},
               {"support_count", p.support_count},
               {"low_support", p.low_support}};
    if (p.low_support) doc["low_support"].push_back(entry);
    if (p.low_support && !include_low_support) continue;
    const auto s = posterior_summary(p);
    entry["mean"] = s.mean;
    entry["median"] = s.median;
    entry["q10"] = s.q10;
    entry["q90"] = s.q90;
    doc["summaries"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

}  // namespace netcausal
