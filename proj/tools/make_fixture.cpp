// Writes one synthetic study as CSV files plus a config that reads them.
//
//   make_fixture OUT_DIR [n] [seed]
//
// The draw is gen_scenario with MCAR missingness on stream (seed, 0), so the
// files reproduce an in-memory AnalysisInput exactly.
#include "minbo/cli/csv.hpp"
#include "minbo/simulation.hpp"

#include <filesystem>
#include <iostream>
#include <string>

namespace {

using namespace minbo;
using cli::format_number;

std::string main_csv(const MainDataset& d) {
  std::string out = "id,y,xb,xn,xc\n";
  for (Index i = 0; i < d.n(); ++i) {
    out += std::to_string(i + 1) + "," + format_number(d.y[i]);
    for (Index j = 1; j < d.p(); ++j) out += "," + format_number(d.x(i, j));
    out += "\n";
  }
  return out;
}

// Long format; unobserved subjects are simply absent.
std::string longitudinal_csv(const SecondaryDataset& d) {
  std::string out = "id,time,y,xb,xn,xc\n";
  for (Index i = 0; i < d.n(); ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) continue;
    for (Index t = 0; t < d.m; ++t) {
      out += std::to_string(i + 1) + "," + std::to_string(t + 1) + "," + format_number(d.y(i, t));
      for (Index j = 1; j < d.r(); ++j) out += "," + format_number(d.x(i * d.m + t, j));
      out += "\n";
    }
  }
  return out;
}

std::string cross_sectional_csv(const SecondaryDataset& d) {
  std::string out = "id,y,xb,xn,xc\n";
  for (Index i = 0; i < d.n(); ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) continue;
    out += std::to_string(i + 1) + "," + format_number(d.y(i, 0)) + "," + format_number(d.x(i, 1)) +
           "," + format_number(d.z(i, 0)) + "," + format_number(d.z(i, 1)) + "\n";
  }
  return out;
}

std::string config_text(std::uint64_t seed) {
  return "# Synthetic study: three secondary sources, MCAR missingness.\n"
         "[main]\nfile = main.csv\nid = id\noutcome = y\ncovariates = xb, xn, xc\n\n"
         "[secondary.D1]\nfile = d1.csv\nkind = longitudinal\ncovariates = xb, xn, xc\n\n"
         "[secondary.D2]\nfile = d2.csv\nkind = longitudinal\ncovariates = xb, xn, xc\n\n"
         "[secondary.D3]\nfile = d3.csv\nkind = cross_sectional\ncovariates = xb\n"
         "redundant = xn, xc\n\n"
         "[scheme.ave111]\nkind = averaging\nweight_mode = iib\n\n"
         "[scheme.agg111]\nkind = aggregating\n\n"
         "[scheme.ave110]\nkind = averaging\ndatasets = D1, D2\nweight_mode = iib\n\n"
         "[output]\nformat = csv\n\n"
         "[options]\nseed = " +
         std::to_string(seed) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_fixture OUT_DIR [n] [seed]\n";
    return 2;
  }
  try {
    const std::filesystem::path dir = argv[1];
    SimulationConfig cfg;
    cfg.n = argc > 2 ? std::stol(argv[2]) : 300;
    cfg.seed = argc > 3 ? std::stoull(argv[3]) : 20240607;
    cfg.missingness = Missingness::MCAR;
    RngStream rng(cfg.seed, 0);
    const AnalysisInput in = gen_scenario(cfg, rng);

    cli::write_file((dir / "main.csv").string(), main_csv(in.main));
    cli::write_file((dir / "d1.csv").string(), longitudinal_csv(in.secondary[0]));
    cli::write_file((dir / "d2.csv").string(), longitudinal_csv(in.secondary[1]));
    cli::write_file((dir / "d3.csv").string(), cross_sectional_csv(in.secondary[2]));
    cli::write_file((dir / "fixture.cfg").string(), config_text(cfg.seed));
    std::cout << "wrote fixture for n = " << cfg.n << " to " << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
