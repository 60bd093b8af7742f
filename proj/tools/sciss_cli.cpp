// Command-line front end: fit, simulate, contrast.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sciss/io.hpp"
#include "sciss/pipeline.hpp"
#include "sciss/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitEstimation = 2;

std::vector<sciss::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<sciss::Method> out;
  for (const auto& n : names) out.push_back(sciss::parse_method(n));
  return out;
}

std::vector<sciss::SurrogateFamily> parse_families(const std::vector<std::string>& names, int q) {
  std::vector<sciss::SurrogateFamily> out;
  for (const auto& n : names) out.push_back(sciss::parse_family(n));
  if (out.size() == 1 && q > 1) out.assign(static_cast<std::size_t>(q), out.front());
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw sciss::InvalidArgument("cannot write '" + path + "'");
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw sciss::InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct FitArgs {
  std::string data;
  std::vector<std::string> methods{"sl"};
  std::vector<std::string> families;
  std::optional<double> lambda;
  bool log1p = false;
  std::string intr_base = "sciss-aug";
  int intr_iters = 4;
  std::string out;
};

int cmd_fit(const FitArgs& a) {
  sciss::Dataset data;
  sciss::FitOptions opts;
  try {
    data = sciss::parse_dataset_file(a.data);
    opts.methods = parse_methods(a.methods);
    opts.families = parse_families(a.families, data.q);
    opts.lambda = a.lambda;
    opts.log1p_x = a.log1p;
    opts.intr_base = sciss::parse_method(a.intr_base);
    opts.intr.max_iters = a.intr_iters;
    opts.validate();
  } catch (const sciss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  std::vector<sciss::EstimateReport> reports;
  try {
    reports = sciss::fit_methods(data, opts);
  } catch (const sciss::Error& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return kExitEstimation;
  }
  for (const auto& r : reports) std::cout << sciss::format_report(r) << "\n";
  try {
    if (!a.out.empty()) write_file(a.out, sciss::write_reports(reports));
  } catch (const sciss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

struct SimArgs {
  std::string preset = "gauss-c1";
  int reps = 500;
  std::uint64_t seed = 1;
  std::vector<std::string> methods;
  std::vector<std::string> families;
  std::optional<double> lambda;
  std::optional<int> n, big_n;
  std::string out;
  std::string table_out;
};

int cmd_simulate(const SimArgs& a) {
  sciss::SimConfig cfg;
  try {
    cfg = sciss::preset(a.preset);
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    if (!a.methods.empty()) cfg.fit.methods = parse_methods(a.methods);
    if (!a.families.empty()) cfg.fit.families = parse_families(a.families, cfg.theta.q);
    if (a.lambda) cfg.fit.lambda = a.lambda;
    if (a.n) cfg.n = *a.n;
    if (a.big_n) cfg.big_n = *a.big_n;
    cfg.validate();
  } catch (const sciss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  sciss::SimSummary s;
  try {
    s = sciss::run(cfg);
  } catch (const sciss::Error& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return kExitEstimation;
  }
  s.label = a.preset + ", " + std::to_string(cfg.reps) + " replications, seed " + std::to_string(cfg.seed);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  const std::string table = sciss::format_table(s);
  std::cout << table;
  try {
    if (!a.out.empty()) write_file(a.out, sciss::to_json(s).dump(2) + "\n");
    if (!a.table_out.empty()) write_file(a.table_out, table);
  } catch (const sciss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

struct ContrastArgs {
  std::string a, b;
  std::string method;
  std::vector<int> pair;
};

const sciss::EstimateReport& pick(const std::vector<sciss::EstimateReport>& reports, const std::string& method,
                                  const std::string& file) {
  if (reports.empty()) throw sciss::SchemaError(file + " holds no reports");
  if (method.empty()) return reports.front();
  const sciss::Method m = sciss::parse_method(method);
  for (const auto& r : reports)
    if (r.method == m) return r;
  throw sciss::InvalidArgument(file + " has no " + sciss::to_string(m) + " report");
}

int cmd_contrast(const ContrastArgs& a) {
  try {
    const auto ra = sciss::read_reports(read_file(a.a));
    const auto rb = sciss::read_reports(read_file(a.b));
    const auto& x = pick(ra, a.method, a.a);
    const auto& y = pick(rb, a.method, a.b);
    std::vector<std::pair<int, int>> pairs;
    if (!a.pair.empty()) {
      if (a.pair.size() != 2) throw sciss::InvalidArgument("--pair takes two indices");
      pairs.emplace_back(a.pair[0] - 1, a.pair[1] - 1);
    } else {
      for (int j = 0; j < x.theta.q; ++j)
        for (int k = j + 1; k < x.theta.q; ++k) pairs.emplace_back(j, k);
    }
    std::cout << std::left << std::setw(10) << "param" << std::right << std::setw(11) << "A" << std::setw(11) << "B"
              << std::setw(11) << "p_value" << "\n";
    for (auto [j, k] : pairs) {
      const double p = sciss::two_sample_contrast(x, y, j, k);
      const double ta = j == k ? x.theta.node_coefs[j][0] : x.theta.pair_coefs(j, k);
      const double tb = j == k ? y.theta.node_coefs[j][0] : y.theta.pair_coefs(j, k);
      std::cout << std::left << std::setw(10) << ("theta" + std::to_string(j + 1) + std::to_string(k + 1)) << std::right
                << std::fixed << std::setprecision(4) << std::setw(11) << ta << std::setw(11) << tb << std::setw(11) << p
                << "\n";
    }
  } catch (const sciss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised Ising model estimation"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit estimators on a CSV dataset");
  fit->add_option("data", fa.data, "Dataset CSV (header y1..yq,x1..xp,w1..wd)")->required()->check(CLI::ExistingFile);
  fit->add_option("--method", fa.methods, "sl, sciss-aug, sciss-pos, intr, es, dr")->delimiter(',');
  fit->add_option("--family", fa.families, "Surrogate families for PoS: gaussian, logistic, poisson")->delimiter(',');
  fit->add_option("--lambda", fa.lambda, "Ridge for the augmented model (default n^-3/4)");
  fit->add_flag("--log1p", fa.log1p, "Use log(x + 1) in the augmented model and DR");
  fit->add_option("--intr-base", fa.intr_base, "Model refined by INTR: sciss-aug or sciss-pos");
  fit->add_option("--intr-iters", fa.intr_iters, "INTR iteration bound")->check(CLI::PositiveNumber);
  fit->add_option("--out", fa.out, "Write reports as JSON");

  SimArgs sa;
  auto* sim = app.add_subcommand("simulate", "Replicated simulation study");
  sim->add_option("--preset", sa.preset, "gauss-c0..c3, pois-c1..c3, anchor");
  sim->add_option("--reps", sa.reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "Base seed");
  sim->add_option("--method", sa.methods, "Override the preset's methods")->delimiter(',');
  sim->add_option("--family", sa.families, "Override the preset's PoS families")->delimiter(',');
  sim->add_option("--lambda", sa.lambda, "Ridge for the augmented model");
  sim->add_option("--n", sa.n, "Labeled sample size");
  sim->add_option("--N", sa.big_n, "Unlabeled sample size");
  sim->add_option("--out", sa.out, "Write the summary as JSON");
  sim->add_option("--table-out", sa.table_out, "Also write the text table to a file");

  ContrastArgs ca;
  auto* con = app.add_subcommand("contrast", "Two-sample test per edge from two report files");
  con->add_option("report_a", ca.a)->required()->check(CLI::ExistingFile);
  con->add_option("report_b", ca.b)->required()->check(CLI::ExistingFile);
  con->add_option("--method", ca.method, "Report to compare when a file holds several");
  con->add_option("--pair", ca.pair, "1-based indices j,k (j == k compares intercepts)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);
  if (fit->parsed()) return cmd_fit(fa);
  if (sim->parsed()) return cmd_simulate(sa);
  return cmd_contrast(ca);
}
