#include "minbo/pipeline.hpp"

#include "minbo/error.hpp"

namespace minbo {

AnalysisResult run_analysis(const AnalysisInput& input, const std::vector<SchemeSpec>& schemes,
                            const AnalysisOptions& opts) {
  const std::size_t k = input.secondary.size();
  if (input.specs.size() != k) {
    throw Error(ErrorCode::LengthMismatch, "one working model is needed per secondary dataset");
  }
  AnalysisResult res;
  for (std::size_t j = 0; j < k; ++j) {
    if (input.secondary[j].n() != input.main.n()) {
      throw Error(ErrorCode::LengthMismatch, "secondary dataset is not aligned to the main subjects");
    }
    res.specs.push_back(prepare_spec(input.secondary[j], input.specs[j]));
    const MomentModel model(input.secondary[j], res.specs.back());
    res.fits.push_back(fit_el(model, two_step_gmm_init(model), opts.el));
  }

  res.mle = fit_unweighted(input.main, opts.beta);
  res.components = variance_components(input.main, res.mle.beta, res.fits);
  const Matrix v_tilde = unweighted_variance(res.components);
  res.mle_report = summarize(res.mle.beta, v_tilde, input.main.n(), v_tilde, opts.confidence, "mle");

  bool need_iib = false;
  for (const auto& s : schemes) need_iib |= s.mode == WeightMode::IIB;
  if (need_iib && k > 0) {
    res.iib = iib_values(res.components.gamma, v_tilde, res.components.lambda, res.components.s);
  }

  std::vector<Vector> weights;
  for (const auto& f : res.fits) weights.push_back(f.weights);
  for (const auto& s : schemes) {
    validate_scheme(s);
    if (static_cast<std::size_t>(s.k) != k) {
      throw Error(ErrorCode::LengthMismatch, "scheme '" + s.label + "' does not cover K datasets");
    }
    SchemeResult sr;
    sr.requested = s;
    sr.resolved = resolve_iib(s, res.iib);
    sr.scores = integrate_scores(sr.resolved, weights);
    sr.solution = fit_weighted(input.main, sr.scores, res.mle.beta, opts.beta);
    const auto comp = rebase_components(res.components, input.main, sr.solution.beta, res.fits);
    sr.report = summarize(sr.solution.beta, scheme_variance(comp, sr.resolved), input.main.n(),
                          v_tilde, opts.confidence, s.label);
    res.schemes.push_back(std::move(sr));
  }
  return res;
}

}  // namespace minbo
