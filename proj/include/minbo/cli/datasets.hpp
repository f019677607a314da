#pragma once

#include "minbo/cli/config.hpp"
#include "minbo/pipeline.hpp"

#include <string>
#include <vector>

namespace minbo::cli {

struct LoadedData {
  AnalysisInput input;
  std::vector<std::string> ids;           // main-file order
  std::vector<std::string> coefficients;  // "(Intercept)" then main covariates
};

/// Reads the main file (wide) and every secondary file, aligning secondary
/// subjects to main ids. Longitudinal files are long format and must hold
/// the same number of visits for every subject they contain.
LoadedData load_datasets(const Config& config);

/// Working-model spec for one [secondary.NAME] section, unprepared.
WorkingModelSpec working_spec(const SecondarySection& section, Index r, Index m);

}  // namespace minbo::cli
