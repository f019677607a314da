#pragma once

#include "minbo/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace minbo {

enum class Missingness { Full, MCAR, Informative };

const char* to_string(Missingness m);
Missingness missingness_from_string(const std::string& s);

struct SimulationConfig {
  Index n = 600;
  double rho = 0.8;
  Missingness missingness = Missingness::Full;
  Vector eta = (Vector(3) << 0.6, 0.7, 0.5).finished();
  Vector alpha = (Vector(4) << 0.5, 1.0, 1.0, 1.0).finished();
  bool misspecified = false;
  int reps = 1000;
  std::uint64_t seed = 20240607;
  std::vector<std::string> estimators = default_estimators();
  VarianceMode variance_mode = VarianceMode::PreliminaryResidual;
  double confidence = 0.95;

  static std::vector<std::string> default_estimators();
  /// Throws InvalidArgument/ConfigError on out-of-range settings.
  void validate() const;
};

/// True main-model coefficients used by the generator.
Vector true_beta();
/// Latent Gaussian correlation that induces binary correlation 0.3 at p = 0.5.
double copula_correlation();

/// One synthetic study: main data, the two longitudinal datasets and the
/// cross-sectional one, with their working models (misspecified on request).
AnalysisInput gen_scenario(const SimulationConfig& config, RngStream& rng);

/// Integration array behind an estimator name (single100 ... omn111, ave101,
/// agg101) over K = 3 datasets. "mle" has no array and is rejected here.
SchemeSpec estimator_scheme(const std::string& name);
bool is_known_estimator(const std::string& name);

struct EstimatorDraw {
  Vector beta, ase, ci_lower, ci_upper;
};

struct ReplicateResult {
  int index = 0;
  bool ok = false;
  std::string error;
  Vector mle_beta;
  std::vector<EstimatorDraw> draws;  // in config.estimators order
};

/// Generate and analyse replicate `index`; stream (seed, index) fixes it.
/// Module errors are captured in the result instead of thrown.
ReplicateResult run_replicate(const SimulationConfig& config, int index);

struct CoefficientSummary {
  double bias = 0, mcsd = 0, mean_ase = 0, cp = 0, ere = 0;
};

struct EstimatorSummary {
  std::string name;
  std::vector<CoefficientSummary> coef;
};

struct MonteCarloSummary {
  int reps = 0;
  int succeeded = 0;
  std::vector<std::pair<int, std::string>> failures;  // (replicate, message)
  bool has_spread = true;  // false with a single usable replicate
  std::vector<EstimatorSummary> estimators;
  double wall_seconds = 0.0;
};

/// Combines replicate results in index order. Failed replicates are dropped
/// for every estimator. Throws TooManyFailures above 5% failures and
/// NonPositiveVariance when some MCSD is zero.
MonteCarloSummary summarize_replicates(const SimulationConfig& config,
                                       const std::vector<ReplicateResult>& results);

/// Runs config.reps replicates on `threads` workers (0 = all cores).
/// Output does not depend on the worker count.
MonteCarloSummary monte_carlo(const SimulationConfig& config, unsigned threads = 0);

}  // namespace minbo
