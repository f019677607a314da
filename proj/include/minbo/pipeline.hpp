#pragma once

#include "minbo/el.hpp"
#include "minbo/estimator.hpp"
#include "minbo/schemes.hpp"
#include "minbo/variance.hpp"

#include <string>
#include <vector>

namespace minbo {

struct AnalysisInput {
  MainDataset main;
  std::vector<SecondaryDataset> secondary;
  std::vector<WorkingModelSpec> specs;  // one per secondary dataset, unprepared
  std::vector<std::string> names;       // optional dataset labels
};

struct AnalysisOptions {
  ELOptions el;
  BetaOptions beta;
  double confidence = 0.95;
};

struct SchemeResult {
  SchemeSpec requested;
  SchemeSpec resolved;  // fixed weights actually used
  Vector scores;        // integrated p* on the n p scale
  BetaSolution solution;
  EstimateReport report;
};

struct AnalysisResult {
  BetaSolution mle;
  EstimateReport mle_report;  // V~ with ERE = 1
  std::vector<WorkingModelSpec> specs;  // prepared
  std::vector<ELFit> fits;
  VarianceComponents components;  // at the MLE
  Vector iib;
  std::vector<SchemeResult> schemes;
};

/// Full pass: working-model preparation, one EL fit per secondary dataset,
/// the logistic MLE, IIB at the MLE, then for every scheme the integrated
/// scores, the weighted fit and its variance at that scheme's own estimate.
/// ERE is relative to the unweighted sandwich V~ at the MLE.
AnalysisResult run_analysis(const AnalysisInput& input, const std::vector<SchemeSpec>& schemes,
                            const AnalysisOptions& opts = {});

}  // namespace minbo
