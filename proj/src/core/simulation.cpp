#include "minbo/simulation.hpp"

#include "minbo/error.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace minbo {

const char* to_string(Missingness m) {
  switch (m) {
    case Missingness::Full: return "full";
    case Missingness::MCAR: return "mcar";
    case Missingness::Informative: return "informative";
  }
  return "full";
}

Missingness missingness_from_string(const std::string& s) {
  if (s == "full") return Missingness::Full;
  if (s == "mcar") return Missingness::MCAR;
  if (s == "informative") return Missingness::Informative;
  throw Error(ErrorCode::ConfigError, "unknown missingness '" + s + "' (full, mcar, informative)");
}

std::vector<std::string> SimulationConfig::default_estimators() {
  return {"single100", "single010", "single001", "ave110",
          "agg110",    "ave111",    "agg111",    "omn111"};
}

void SimulationConfig::validate() const {
  if (n < 20) throw Error(ErrorCode::ConfigError, "simulation n must be at least 20");
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::ConfigError, "rho must lie in [0, 1)");
  if (eta.size() != 3 || (eta.array() <= 0.0).any() || (eta.array() > 1.0).any()) {
    throw Error(ErrorCode::ConfigError, "eta needs three values in (0, 1]");
  }
  if (alpha.size() != 4 || !alpha.allFinite()) {
    throw Error(ErrorCode::ConfigError, "alpha needs four finite values");
  }
  if (reps < 1) throw Error(ErrorCode::ConfigError, "reps must be at least 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::ConfigError, "confidence must lie in (0, 1)");
  }
  if (estimators.empty()) throw Error(ErrorCode::ConfigError, "no estimators requested");
  for (const auto& e : estimators) {
    if (!is_known_estimator(e)) throw Error(ErrorCode::ConfigError, "unknown estimator '" + e + "'");
  }
}

Vector true_beta() { return (Vector(4) << 1.0, -0.5, -1.0, 0.5).finished(); }

double copula_correlation() { return std::sin(0.15 * std::numbers::pi); }

namespace {

const Vector kTheta1 = (Vector(4) << -1.0, 2.0, 1.0, 1.0).finished();
const Vector kTheta2 = (Vector(4) << 1.0, -2.0, -1.0, -1.0).finished();
const Vector kTheta3 = (Vector(2) << -1.0, 1.0).finished();
constexpr Index kM = 4;

Matrix residual_covariance(double rho) {
  Matrix v(2 * kM, 2 * kM);
  v.topLeftCorner(kM, kM) = exchangeable(kM, 0.8);
  v.bottomRightCorner(kM, kM) = exchangeable(kM, 0.5);
  v.topRightCorner(kM, kM).setConstant(rho);
  v.bottomLeftCorner(kM, kM).setConstant(rho);
  return v;
}

// V is indefinite for rho above about 0.73 (the all-ones directions of the
// two blocks cannot carry cross-correlation rho). There we sample from its
// PSD projection through the symmetric square root, the usual eigen-method
// fallback; below that threshold the plain Cholesky factor is used.
MvnSampler residual_sampler(double rho) {
  const Matrix v = residual_covariance(rho);
  try {
    return MvnSampler(Vector::Zero(2 * kM), v);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotPositiveDefinite) throw;
  }
  return MvnSampler::from_factor(Vector::Zero(2 * kM), psd_sqrt(v));
}

}  // namespace

AnalysisInput gen_scenario(const SimulationConfig& config, RngStream& rng) {
  const Index n = config.n;
  const Index r12 = config.misspecified ? 3 : 4;
  const Index q3 = config.misspecified ? 1 : 2;
  const double alpha = std::sqrt(2.0 + 2.0 * config.rho);
  const Vector beta0 = true_beta();

  const MvnSampler latent(Vector::Zero(kM), exchangeable(kM, copula_correlation()));
  const MvnSampler normal_cov(Vector::Zero(kM), exchangeable(kM, 0.3));
  const MvnSampler resid = residual_sampler(config.rho);

  Vector y0(n);
  Matrix x0(n, 4);
  Matrix y1(n, kM), y2(n, kM);
  Matrix x1(n * kM, r12);
  Vector y3(n);
  Matrix x3(n, 2), z3(n, q3);
  std::vector<std::vector<std::uint8_t>> obs(3, std::vector<std::uint8_t>(static_cast<std::size_t>(n)));

  for (Index i = 0; i < n; ++i) {
    const Vector lat = latent(rng);
    const Vector xn = normal_cov(rng);
    const double xc = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const Vector eps = resid(rng);
    double u[3];
    for (double& v : u) v = rng.uniform();

    Vector xb(kM);
    for (Index t = 0; t < kM; ++t) xb[t] = lat[t] > 0.0 ? 1.0 : 0.0;

    for (Index t = 0; t < kM; ++t) {
      const Vector row = (Vector(4) << 1.0, xb[t], xn[t], xc).finished();
      y1(i, t) = row.dot(kTheta1) + eps[t];
      y2(i, t) = row.dot(kTheta2) + eps[kM + t];
      x1.row(i * kM + t) = row.head(r12).transpose();
    }

    const double p_star = expit(kTheta3[0] + kTheta3[1] * xb[0]);
    y3[i] = eps[0] >= normal_quantile(1.0 - p_star) ? 1.0 : 0.0;
    if (config.misspecified) {
      x3.row(i) << 1.0, xb[1];
      z3(i, 0) = xc;
    } else {
      x3.row(i) << 1.0, xb[0];
      z3.row(i) << xn[0], xc;
    }

    x0.row(i) << 1.0, xb[0], xn[0], xc;
    const double p0 = expit(x0.row(i).dot(beta0));
    y0[i] = (eps[kM - 1] + eps[2 * kM - 1]) / alpha >= normal_quantile(1.0 - p0) ? 1.0 : 0.0;

    for (std::size_t k = 0; k < 3; ++k) {
      double p = 1.0;
      if (config.missingness == Missingness::MCAR) p = config.eta[static_cast<Index>(k)];
      if (config.missingness == Missingness::Informative) p = expit(x0.row(i).dot(config.alpha));
      obs[k][static_cast<std::size_t>(i)] = u[k] < p ? 1 : 0;
    }
  }

  // Unobserved blocks carry zero placeholders.
  Matrix x2 = x1;
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!obs[0][ui]) {
      y1.row(i).setZero();
      x1.middleRows(i * kM, kM).setZero();
    }
    if (!obs[1][ui]) {
      y2.row(i).setZero();
      x2.middleRows(i * kM, kM).setZero();
    }
    if (!obs[2][ui]) {
      y3[i] = 0.0;
      x3.row(i).setZero();
      z3.row(i).setZero();
    }
  }

  AnalysisInput in{MainDataset::create(std::move(y0), std::move(x0)), {}, {}, {"D1", "D2", "D3"}};
  in.secondary.push_back(SecondaryDataset::longitudinal(std::move(y1), std::move(x1), obs[0]));
  in.secondary.push_back(SecondaryDataset::longitudinal(std::move(y2), std::move(x2), obs[1]));
  in.secondary.push_back(
      SecondaryDataset::cross_sectional(std::move(y3), std::move(x3), std::move(z3), obs[2]));
  in.specs.push_back(longitudinal_spec(kM, r12, config.variance_mode));
  in.specs.push_back(longitudinal_spec(kM, r12, config.variance_mode));
  in.specs.push_back(cross_sectional_spec(2));
  return in;
}

bool is_known_estimator(const std::string& name) {
  static const char* known[] = {"mle",    "single100", "single010", "single001", "ave110", "agg110",
                                "ave111", "agg111",    "omn111",    "ave101",    "agg101"};
  for (const char* k : known) {
    if (name == k) return true;
  }
  return false;
}

SchemeSpec estimator_scheme(const std::string& name) {
  constexpr Index k = 3;
  SchemeSpec s;
  if (name == "single100") s = aggregating_over(k, {0});
  else if (name == "single010") s = aggregating_over(k, {1});
  else if (name == "single001") s = aggregating_over(k, {2});
  else if (name == "ave110") s = averaging_over(k, {0, 1}, WeightMode::IIB);
  else if (name == "agg110") s = aggregating_over(k, {0, 1});
  else if (name == "ave111") s = averaging_over(k, {0, 1, 2}, WeightMode::IIB);
  else if (name == "agg111") s = aggregating_over(k, {0, 1, 2});
  else if (name == "ave101") s = averaging_over(k, {0, 2}, WeightMode::IIB);
  else if (name == "agg101") s = aggregating_over(k, {0, 2});
  else if (name == "omn111") {
    Matrix w(2, 3);
    w << 0.5, 0.0, 0.5, 0.0, 1.0, 0.0;
    s = build_scheme(w, WeightMode::IIB);
  } else {
    throw Error(ErrorCode::InvalidArgument, "no integration array for estimator '" + name + "'");
  }
  s.label = name;
  return s;
}

ReplicateResult run_replicate(const SimulationConfig& config, int index) {
  ReplicateResult out;
  out.index = index;
  try {
    RngStream rng(config.seed, static_cast<std::uint64_t>(index));
    const AnalysisInput input = gen_scenario(config, rng);
    std::vector<SchemeSpec> schemes;
    for (const auto& e : config.estimators) {
      if (e != "mle") schemes.push_back(estimator_scheme(e));
    }
    AnalysisOptions opts;
    opts.confidence = config.confidence;
    const AnalysisResult res = run_analysis(input, schemes, opts);
    out.mle_beta = res.mle.beta;
    std::size_t next = 0;
    for (const auto& e : config.estimators) {
      const EstimateReport& rep = e == "mle" ? res.mle_report : res.schemes[next++].report;
      out.draws.push_back({rep.beta, rep.ase, rep.ci_lower, rep.ci_upper});
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = std::string(to_string(e.code())) + ": " + e.what();
    out.draws.clear();
  }
  return out;
}

MonteCarloSummary summarize_replicates(const SimulationConfig& config,
                                       const std::vector<ReplicateResult>& results) {
  MonteCarloSummary s;
  s.reps = static_cast<int>(results.size());
  std::vector<const ReplicateResult*> good;
  for (const auto& r : results) {
    if (r.ok) good.push_back(&r);
    else s.failures.emplace_back(r.index, r.error);
  }
  s.succeeded = static_cast<int>(good.size());
  if (static_cast<double>(s.failures.size()) > 0.05 * static_cast<double>(s.reps) || good.empty()) {
    throw Error(ErrorCode::TooManyFailures,
                std::to_string(s.failures.size()) + " of " + std::to_string(s.reps) +
                    " replicates failed" +
                    (s.failures.empty() ? std::string() : "; first: " + s.failures.front().second));
  }
  s.has_spread = good.size() >= 2;
  if (!s.has_spread) warn("only one usable replicate: MCSD and ERE are not available");

  const Vector beta0 = true_beta();
  const Index p = beta0.size();
  const double m = static_cast<double>(good.size());

  auto variance_of = [&](auto get) {
    Vector mean = Vector::Zero(p);
    for (const auto* r : good) mean += get(*r);
    mean /= m;
    Vector var = Vector::Zero(p);
    for (const auto* r : good) var += (get(*r) - mean).cwiseAbs2();
    return Vector(var / (m - 1.0));
  };
  const Vector mle_var = s.has_spread ? variance_of([](const ReplicateResult& r) { return r.mle_beta; })
                                      : Vector::Constant(p, std::nan(""));

  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    EstimatorSummary es;
    es.name = config.estimators[e];
    es.coef.resize(static_cast<std::size_t>(p));
    Vector mean = Vector::Zero(p), ase = Vector::Zero(p), cover = Vector::Zero(p);
    for (const auto* r : good) {
      const auto& d = r->draws[e];
      mean += d.beta;
      ase += d.ase;
      for (Index j = 0; j < p; ++j) cover[j] += (d.ci_lower[j] <= beta0[j] && beta0[j] <= d.ci_upper[j]);
    }
    mean /= m;
    ase /= m;
    Vector var = Vector::Constant(p, std::nan(""));
    if (s.has_spread) var = variance_of([e](const ReplicateResult& r) { return r.draws[e].beta; });
    for (Index j = 0; j < p; ++j) {
      auto& c = es.coef[static_cast<std::size_t>(j)];
      c.bias = mean[j] - beta0[j];
      c.mean_ase = ase[j];
      c.cp = 100.0 * cover[j] / m;
      c.mcsd = std::sqrt(var[j]);
      c.ere = mle_var[j] / var[j];
      if (s.has_spread && !(var[j] > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance,
                    "Monte Carlo SD of " + es.name + " coefficient " + std::to_string(j) + " is zero");
      }
    }
    s.estimators.push_back(std::move(es));
  }
  return s;
}

MonteCarloSummary monte_carlo(const SimulationConfig& config, unsigned threads) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(config.reps));

  std::vector<ReplicateResult> results(static_cast<std::size_t>(config.reps));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < config.reps; i = next++) {
      try {
        results[static_cast<std::size_t>(i)] = run_replicate(config, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.reps;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  MonteCarloSummary s = summarize_replicates(config, results);
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

}  // namespace minbo
