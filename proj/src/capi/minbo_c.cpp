#include "minbo/minbo.h"

#include "minbo/cli/commands.hpp"
#include "minbo/error.hpp"
#include "minbo/pipeline.hpp"

#include <iostream>
#include <mutex>
#include <new>
#include <string>

struct minbo_main {
  minbo::MainDataset data;
};

struct minbo_secondary {
  minbo::SecondaryDataset data;
  minbo::WorkingModelSpec spec;
};

struct minbo_analysis {
  minbo::AnalysisInput input;
  std::vector<minbo::SchemeSpec> schemes;
};

struct minbo_result {
  minbo::AnalysisResult result;
  std::vector<const minbo::EstimateReport*> reports;
};

namespace {

using minbo::Index;
using minbo::Matrix;
using minbo::Vector;

thread_local std::string last_error;

minbo_status fail(minbo_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Every exported call funnels through here so no exception crosses the C
// boundary.
template <class F>
minbo_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return MINBO_OK;
  } catch (const minbo::Error& e) {
    return fail(static_cast<minbo_status>(static_cast<int>(e.code()) + 1), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MINBO_OUT_OF_MEMORY, "out of memory");
  } catch (const std::exception& e) {
    return fail(MINBO_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(MINBO_INTERNAL_ERROR, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw minbo::Error(minbo::ErrorCode::InvalidArgument, what);
}

Matrix row_major(const double* p, size_t rows, size_t cols) {
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = p[i * cols + j];
  return m;
}

std::vector<std::uint8_t> flags(const uint8_t* observed, size_t n) {
  if (!observed) return std::vector<std::uint8_t>(n, 1);
  std::vector<std::uint8_t> out(observed, observed + n);
  for (auto& f : out) f = f ? 1 : 0;
  return out;
}

void copy_out(const Vector& v, double* out) {
  for (Index j = 0; j < v.size(); ++j) out[j] = v(j);
}

struct WarningHandler {
  std::mutex mutex;
  minbo_warning_fn fn = nullptr;
  void* user = nullptr;
};

WarningHandler& warning_handler() {
  static WarningHandler h;
  return h;
}

}  // namespace

extern "C" {

const char* minbo_status_string(minbo_status status) {
  switch (status) {
    case MINBO_OK: return "Ok";
    case MINBO_OUT_OF_MEMORY: return "OutOfMemory";
    case MINBO_INTERNAL_ERROR: return "InternalError";
    default: break;
  }
  const int code = static_cast<int>(status) - 1;
  if (code >= 0 && code <= static_cast<int>(minbo::ErrorCode::ConfigError))
    return minbo::to_string(static_cast<minbo::ErrorCode>(code));
  return "Unknown";
}

const char* minbo_last_error(void) { return last_error.c_str(); }

const char* minbo_version(void) { return "0.1.0"; }

void minbo_set_warning_handler(minbo_warning_fn fn, void* user) {
  auto& h = warning_handler();
  {
    std::lock_guard lock(h.mutex);
    h.fn = fn;
    h.user = user;
  }
  if (!fn) {
    minbo::set_warning_sink(
        [](std::string_view msg) { std::cerr << "minbo: warning: " << msg << '\n'; });
    return;
  }
  minbo::set_warning_sink([](std::string_view msg) {
    auto& wh = warning_handler();
    std::lock_guard lock(wh.mutex);
    if (wh.fn) wh.fn(std::string(msg).c_str(), wh.user);
  });
}

minbo_status minbo_main_create(const double* y, const double* x, size_t n, size_t p,
                               minbo_main** out) {
  return guarded([&] {
    require(y && x && out, "minbo_main_create: null pointer");
    *out = nullptr;
    Vector yv = Eigen::Map<const Vector>(y, static_cast<Index>(n));
    *out = new minbo_main{minbo::MainDataset::create(std::move(yv), row_major(x, n, p))};
  });
}

void minbo_main_free(minbo_main* main) { delete main; }

minbo_status minbo_secondary_longitudinal(const double* y, const double* x,
                                          const uint8_t* observed, size_t n, size_t m, size_t r,
                                          int unit_variance, minbo_secondary** out) {
  return guarded([&] {
    require(y && x && out, "minbo_secondary_longitudinal: null pointer");
    *out = nullptr;
    auto data = minbo::SecondaryDataset::longitudinal(row_major(y, n, m), row_major(x, n * m, r),
                                                      flags(observed, n));
    auto spec = minbo::longitudinal_spec(
        static_cast<Index>(m), static_cast<Index>(r),
        unit_variance ? minbo::VarianceMode::Unit : minbo::VarianceMode::PreliminaryResidual);
    minbo::validate_spec(data, spec);
    *out = new minbo_secondary{std::move(data), std::move(spec)};
  });
}

minbo_status minbo_secondary_cross_sectional(const double* y, const double* x, const double* z,
                                             const uint8_t* observed, size_t n, size_t r,
                                             size_t q, minbo_secondary** out) {
  return guarded([&] {
    require(y && x && out && (z || q == 0), "minbo_secondary_cross_sectional: null pointer");
    *out = nullptr;
    Vector yv = Eigen::Map<const Vector>(y, static_cast<Index>(n));
    Matrix zm = q ? row_major(z, n, q) : Matrix(static_cast<Index>(n), 0);
    auto data = minbo::SecondaryDataset::cross_sectional(std::move(yv), row_major(x, n, r),
                                                         std::move(zm), flags(observed, n));
    auto spec = minbo::cross_sectional_spec(static_cast<Index>(r));
    minbo::validate_spec(data, spec);
    *out = new minbo_secondary{std::move(data), std::move(spec)};
  });
}

void minbo_secondary_free(minbo_secondary* secondary) { delete secondary; }

minbo_status minbo_secondary_fit_el(const minbo_secondary* secondary, double* theta,
                                    double* weights) {
  return guarded([&] {
    require(secondary, "minbo_secondary_fit_el: null handle");
    const auto spec = minbo::prepare_spec(secondary->data, secondary->spec);
    const Vector theta0 = minbo::two_step_gmm_init(secondary->data, spec);
    const auto fit = minbo::fit_el(secondary->data, spec, theta0);
    if (theta) copy_out(fit.theta, theta);
    if (weights) copy_out(fit.weights, weights);
  });
}

minbo_status minbo_analysis_create(const minbo_main* main, minbo_analysis** out) {
  return guarded([&] {
    require(main && out, "minbo_analysis_create: null pointer");
    *out = nullptr;
    auto* a = new minbo_analysis;
    a->input.main = main->data;
    *out = a;
  });
}

minbo_status minbo_analysis_add_secondary(minbo_analysis* analysis,
                                          const minbo_secondary* secondary, const char* name) {
  return guarded([&] {
    require(analysis && secondary, "minbo_analysis_add_secondary: null handle");
    if (secondary->data.n() != analysis->input.main.n())
      throw minbo::Error(minbo::ErrorCode::LengthMismatch,
                         "secondary dataset has " + std::to_string(secondary->data.n()) +
                             " subjects, main has " + std::to_string(analysis->input.main.n()));
    if (!analysis->schemes.empty())
      throw minbo::Error(minbo::ErrorCode::InvalidArgument,
                         "secondary datasets must be added before schemes");
    analysis->input.secondary.push_back(secondary->data);
    analysis->input.specs.push_back(secondary->spec);
    analysis->input.names.push_back(
        name ? name : "D" + std::to_string(analysis->input.secondary.size()));
  });
}

minbo_status minbo_analysis_add_scheme(minbo_analysis* analysis, const char* label,
                                       const double* omega, size_t kprime, size_t k, int iib) {
  return guarded([&] {
    require(analysis && omega, "minbo_analysis_add_scheme: null pointer");
    if (k != analysis->input.secondary.size())
      throw minbo::Error(minbo::ErrorCode::LengthMismatch,
                         "scheme has " + std::to_string(k) + " columns for " +
                             std::to_string(analysis->input.secondary.size()) + " datasets");
    auto spec = minbo::build_scheme(row_major(omega, kprime, k),
                                    iib ? minbo::WeightMode::IIB : minbo::WeightMode::Fixed);
    spec.label = label ? label : "scheme" + std::to_string(analysis->schemes.size() + 1);
    analysis->schemes.push_back(std::move(spec));
  });
}

minbo_status minbo_analysis_run(const minbo_analysis* analysis, double confidence,
                                minbo_result** out) {
  return guarded([&] {
    require(analysis && out, "minbo_analysis_run: null pointer");
    *out = nullptr;
    minbo::AnalysisOptions opts;
    opts.confidence = confidence;
    auto* res = new minbo_result;
    try {
      res->result = minbo::run_analysis(analysis->input, analysis->schemes, opts);
    } catch (...) {
      delete res;
      throw;
    }
    res->reports.push_back(&res->result.mle_report);
    for (const auto& s : res->result.schemes) res->reports.push_back(&s.report);
    *out = res;
  });
}

void minbo_analysis_free(minbo_analysis* analysis) { delete analysis; }

size_t minbo_result_estimators(const minbo_result* result) {
  return result ? result->reports.size() : 0;
}

size_t minbo_result_coefficients(const minbo_result* result) {
  return result ? static_cast<size_t>(result->result.mle.beta.size()) : 0;
}

const char* minbo_result_label(const minbo_result* result, size_t estimator) {
  if (!result || estimator >= result->reports.size()) return nullptr;
  return result->reports[estimator]->label.c_str();
}

minbo_status minbo_result_get(const minbo_result* result, size_t estimator, minbo_field field,
                              double* out) {
  return guarded([&] {
    require(result && out, "minbo_result_get: null pointer");
    if (estimator >= result->reports.size())
      throw minbo::Error(minbo::ErrorCode::OutOfRange, "estimator index out of range");
    const auto& r = *result->reports[estimator];
    switch (field) {
      case MINBO_ESTIMATE: copy_out(r.beta, out); break;
      case MINBO_ASE: copy_out(r.ase, out); break;
      case MINBO_ERE: copy_out(r.ere, out); break;
      case MINBO_CI_LOWER: copy_out(r.ci_lower, out); break;
      case MINBO_CI_UPPER: copy_out(r.ci_upper, out); break;
      case MINBO_P_VALUE: copy_out(r.p_value, out); break;
      default: throw minbo::Error(minbo::ErrorCode::InvalidArgument, "unknown result field");
    }
  });
}

minbo_status minbo_result_covariance(const minbo_result* result, size_t estimator, double* out) {
  return guarded([&] {
    require(result && out, "minbo_result_covariance: null pointer");
    if (estimator >= result->reports.size())
      throw minbo::Error(minbo::ErrorCode::OutOfRange, "estimator index out of range");
    const Matrix& v = result->reports[estimator]->v;
    for (Index i = 0; i < v.rows(); ++i)
      for (Index j = 0; j < v.cols(); ++j) out[i * v.cols() + j] = v(i, j);
  });
}

minbo_status minbo_result_iib(const minbo_result* result, double* out) {
  return guarded([&] {
    require(result && out, "minbo_result_iib: null pointer");
    copy_out(result->result.iib, out);
  });
}

void minbo_result_free(minbo_result* result) { delete result; }

minbo_status minbo_cmd_estimate(const char* config_path, const char* out_path) {
  return guarded([&] {
    require(config_path, "minbo_cmd_estimate: null config path");
    minbo::cli::cmd_estimate(config_path, out_path ? out_path : "", std::cout);
    std::cout.flush();
  });
}

minbo_status minbo_cmd_simulate(const char* config_path, int threads, const char* out_dir) {
  return guarded([&] {
    require(config_path, "minbo_cmd_simulate: null config path");
    minbo::cli::cmd_simulate(config_path, threads, out_dir ? out_dir : "", std::cerr);
  });
}

minbo_status minbo_cmd_validate(const char* config_path) {
  return guarded([&] {
    require(config_path, "minbo_cmd_validate: null config path");
    minbo::cli::cmd_validate(config_path, std::cout);
    std::cout.flush();
  });
}

}  // extern "C"
