#include "came/cli/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace came::cli {

namespace {

struct Variant {
  std::string name;
  ExperimentSetup setup;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<Variant> variants(std::string_view name, const ExperimentSetup& base) {
  std::vector<Variant> out;
  if (name == "tau") {
    for (double t : {0.2, 0.5, 1.0, 2.0}) {
      Variant v{"tau=" + num(t), base};
      v.setup.schedule.tau = t;
      out.push_back(v);
    }
  } else if (name == "ratio") {
    for (double r : {0.0, 0.1, 0.2, 0.5, 1.0}) {
      Variant v{"ratio=" + num(r), base};
      v.setup.schedule.standardized_ratio = r;
      out.push_back(v);
    }
  } else if (name == "shared-layers") {
    for (std::size_t n : {1, 2, 3}) {
      Variant v{"shared_layers=" + std::to_string(n), base};
      v.setup.model.n_shared_layers = n;
      out.push_back(v);
    }
  } else if (name == "ablation") {
    out.push_back({"full", base});
    Variant no_sp{"no-specialized", base};
    no_sp.setup.schedule.specialized = false;
    out.push_back(no_sp);
    Variant no_st{"no-standardized", base};
    no_st.setup.schedule.standardized_ratio = 0.0;
    out.push_back(no_st);
  } else {
    throw std::invalid_argument("unknown experiment '" + std::string(name) + "' (tau, ratio, shared-layers, ablation)");
  }
  return out;
}

void report(std::ostream* progress, const std::string& what, const ExperimentOutcome& o) {
  if (progress == nullptr) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: fused %.4f lex %.4f loc %.4f glob %.4f (%.1f s)\n", what.c_str(), o.fused_mrr,
                o.expert_mrr[0], o.expert_mrr[1], o.expert_mrr[2], o.seconds);
  *progress << buf << std::flush;
}

}  // namespace

ExperimentSetup setup_from(const RunConfig& config) {
  ExperimentSetup s;
  s.model = config.model;
  s.schedule = config.schedule;
  s.schedule.seed = config.seed;
  s.k = config.k;
  s.fusion = config.fusion;
  return s;
}

const std::vector<std::string>& sweep_names() {
  static const std::vector<std::string> names = {"tau", "ratio", "shared-layers", "ablation"};
  return names;
}

std::vector<SweepRow> run_sweep(std::string_view name, const RunConfig& config, const synthgen::Dataset& data,
                                std::size_t seeds, std::ostream* progress) {
  if (seeds == 0) throw std::invalid_argument("run_sweep: at least one seed is required");
  const auto vs = variants(name, setup_from(config));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < seeds; ++i) {
    for (const auto& v : vs) {
      ExperimentSetup s = v.setup;
      s.schedule.seed = config.seed + i;
      SweepRow row{v.name, s.schedule.seed, run_experiment(data, data.test, s)};
      report(progress, v.name + " seed " + std::to_string(row.seed), row.outcome);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "variant,seed,fused,lex,loc,glob";
  for (synthgen::Family f : synthgen::kAllFamilies) {
    const std::string fam(synthgen::to_string(f));
    out += "," + fam + "_w_lex," + fam + "_w_loc," + fam + "_w_glob," + fam + "_fused";
  }
  out += ",rbo_lex_loc,rbo_lex_glob,rbo_loc_glob,seconds\n";
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.6f", v);
    out += buf;
  };
  for (const auto& r : rows) {
    const auto& o = r.outcome;
    out += r.variant + "," + std::to_string(r.seed);
    put(o.fused_mrr);
    for (double m : o.expert_mrr) put(m);
    for (synthgen::Family f : synthgen::kAllFamilies) {
      const auto w = o.family_weights.count(f) ? o.family_weights.at(f) : std::array<double, kNumExperts>{};
      for (double x : w) put(x);
      put(o.family_mrr.count(f) ? o.family_mrr.at(f)[0] : 0.0);
    }
    for (double x : o.rbo) put(x);
    std::snprintf(buf, sizeof buf, ",%.1f\n", o.seconds);
    out += buf;
  }
  return out;
}

SpecializationStudy run_specialization_study(const RunConfig& config, const synthgen::Dataset& data,
                                             std::size_t seeds, std::ostream* progress) {
  if (seeds == 0) throw std::invalid_argument("run_specialization_study: at least one seed is required");
  if (data.dev.empty()) throw std::invalid_argument("run_specialization_study: tau tuning needs dev queries");
  const auto start = std::chrono::steady_clock::now();
  SpecializationStudy st;
  st.taus = {0.2, 0.5, 1.0, 2.0};
  const ExperimentSetup base = setup_from(config);

  trainer::TrainResult best_model;
  ExperimentOutcome best_dev;
  for (double tau : st.taus) {
    ExperimentSetup s = base;
    s.schedule.tau = tau;
    trainer::TrainResult trained;
    ExperimentOutcome dev = run_experiment(data, data.dev, s, &trained);
    report(progress, "tune tau=" + num(tau) + " (dev)", dev);
    st.dev_fused_mrr.push_back(dev.fused_mrr);
    // Strictly better only: ties keep the earlier (sharper) tau.
    if (st.dev_fused_mrr.size() == 1 || dev.fused_mrr > best_dev.fused_mrr) {
      st.chosen_tau = tau;
      best_dev = std::move(dev);
      best_model = std::move(trained);
    }
  }

  st.primary = evaluate_model(best_model.checkpoint.params, best_model.checkpoint.vocab, data, data.test, base.k,
                              base.fusion);
  st.primary.family_weights = best_dev.family_weights;
  st.primary.warnings = best_dev.warnings;
  report(progress, "chosen tau=" + num(st.chosen_tau) + " (test)", st.primary);

  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = config.seed + i;
    st.seeds.push_back(seed);
    ExperimentSetup full = base;
    full.schedule.tau = st.chosen_tau;
    full.schedule.seed = seed;
    if (i == 0) {
      st.full_fused_mrr.push_back(st.primary.fused_mrr);
    } else {
      const auto o = run_experiment(data, data.test, full);
      report(progress, "full seed " + std::to_string(seed), o);
      st.full_fused_mrr.push_back(o.fused_mrr);
    }
    ExperimentSetup ablation = full;
    ablation.schedule.specialized = false;
    const auto o = run_experiment(data, data.test, ablation);
    report(progress, "no-specialized seed " + std::to_string(seed), o);
    st.ablation_fused_mrr.push_back(o.fused_mrr);
  }
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return st;
}

}  // namespace came::cli
