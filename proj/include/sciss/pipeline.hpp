#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "sciss/dr.hpp"
#include "sciss/sciss.hpp"

namespace sciss {

// What to fit and how; shared by the CLI and the simulation harness.
struct FitOptions {
  std::vector<Method> methods{Method::SL};
  std::vector<SurrogateFamily> families;  // PoS; empty means gaussian for every node
  std::optional<double> lambda;           // Aug ridge override
  bool log1p_x = false;                   // Aug and DR work on log(x + 1)
  Method intr_base = Method::SCISS_Aug;   // conditional model refined by INTR
  std::vector<Method> ensemble_inputs{Method::SL, Method::SCISS_Aug, Method::SCISS_PoS};
  IntrinsicConfig intr{};
  SolverConfig solver{};

  void validate() const {
    if (methods.empty()) throw InvalidArgument("no methods requested");
    if (intr_base != Method::SCISS_Aug && intr_base != Method::SCISS_PoS)
      throw InvalidArgument("INTR refines SCISS-Aug or SCISS-PoS only");
    for (Method m : ensemble_inputs)
      if (m != Method::SL && m != Method::SCISS_Aug && m != Method::SCISS_PoS)
        throw InvalidArgument("ensemble inputs must be among SL, SCISS-Aug, SCISS-PoS");
    if (ensemble_inputs.size() < 2) throw InvalidArgument("ensemble needs at least two inputs");
    if (lambda && *lambda < 0.0) throw InvalidArgument("lambda must be >= 0");
    solver.validate();
  }
};

/// Fits every requested method on one dataset, reusing the SL fit and the
/// conditional models across methods. Reports come back in request order.
inline std::vector<EstimateReport> fit_methods(const Dataset& data, const FitOptions& opts) {
  opts.validate();
  data.validate();
  const std::span<const LabeledSample> lab(data.labeled);
  const std::span<const UnlabeledSample> unl(data.unlabeled);
  auto wants = [&](Method m) { return std::find(opts.methods.begin(), opts.methods.end(), m) != opts.methods.end(); };
  const bool es = wants(Method::ES);
  auto ensemble_uses = [&](Method m) {
    return es && std::find(opts.ensemble_inputs.begin(), opts.ensemble_inputs.end(), m) != opts.ensemble_inputs.end();
  };
  const bool need_aug = wants(Method::SCISS_Aug) || ensemble_uses(Method::SCISS_Aug) ||
                        (wants(Method::INTR) && opts.intr_base == Method::SCISS_Aug);
  const bool need_pos = wants(Method::SCISS_PoS) || ensemble_uses(Method::SCISS_PoS) ||
                        (wants(Method::INTR) && opts.intr_base == Method::SCISS_PoS);

  const SlFit sl = fit_sl(lab, opts.solver);
  const EstimateReport sl_rep = sl_report(lab, sl);
  const InfluenceTable sl_tab = build_sl_table(lab, sl.nodes);

  std::optional<ConditionalModel> aug_model, pos_model;
  std::optional<InfluenceTable> aug_tab, pos_tab;
  std::optional<EstimateReport> aug_rep, pos_rep;
  if (need_aug) {
    AugOptions ao;
    ao.lambda = opts.lambda;
    ao.log1p_x = opts.log1p_x;
    ao.solver = opts.solver;
    aug_model = fit_aug(lab, ao);
    aug_tab = build_influence_table(lab, unl, sl.nodes, *aug_model);
    aug_rep = fit_sciss(*aug_tab, Method::SCISS_Aug);
    const auto& am = std::get<AugParams>(*aug_model);
    for (const auto& w : am.warnings) aug_rep->diagnostics.notes.push_back("warning: " + w);
    aug_rep->diagnostics.values["lambda"] = {am.lambda};
  }
  if (need_pos) {
    std::vector<SurrogateFamily> fams = opts.families;
    if (fams.empty()) fams.assign(static_cast<std::size_t>(data.q), SurrogateFamily::gaussian);
    pos_model = fit_pos(lab, sl.theta, fams, opts.solver);
    pos_tab = build_influence_table(lab, unl, sl.nodes, *pos_model);
    pos_rep = fit_sciss(*pos_tab, Method::SCISS_PoS);
    for (const auto& c : std::get<PoSParams>(*pos_model).clamps) pos_rep->diagnostics.notes.push_back("clamp: " + c);
  }

  std::vector<EstimateReport> out;
  for (Method m : opts.methods) {
    switch (m) {
      case Method::SL: out.push_back(sl_rep); break;
      case Method::SCISS_Aug: out.push_back(*aug_rep); break;
      case Method::SCISS_PoS: out.push_back(*pos_rep); break;
      case Method::INTR: {
        const bool on_aug = opts.intr_base == Method::SCISS_Aug;
        out.push_back(fit_intr_report(lab, unl, sl.nodes, on_aug ? *aug_tab : *pos_tab, on_aug ? *aug_model : *pos_model,
                                      opts.intr));
        break;
      }
      case Method::ES: {
        std::vector<const EstimateReport*> reps;
        std::vector<const InfluenceTable*> tabs;
        for (Method in : opts.ensemble_inputs) {
          if (in == Method::SL) {
            reps.push_back(&sl_rep);
            tabs.push_back(&sl_tab);
          } else if (in == Method::SCISS_Aug) {
            reps.push_back(&*aug_rep);
            tabs.push_back(&*aug_tab);
          } else {
            reps.push_back(&*pos_rep);
            tabs.push_back(&*pos_tab);
          }
        }
        out.push_back(fit_ensemble(reps, tabs));
        break;
      }
      case Method::DR: {
        DrOptions dopt;
        dopt.log1p_x = opts.log1p_x;
        dopt.solver = opts.solver;
        out.push_back(fit_dr(lab, unl, dopt));
        break;
      }
    }
  }
  return out;
}

}  // namespace sciss
