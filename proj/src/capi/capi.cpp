#include "fusion/fusion.h"

#include <cstring>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <sstream>

#include "core/estimation.hpp"
#include "core/frameworks.hpp"
#include "core/influence.hpp"
#include "core/io.hpp"
#include "core/linalg.hpp"
#include "core/verify.hpp"

using namespace fusion;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
fusion_status guarded(Fn&& fn) {
  try {
    fn();
    return FUSION_OK;
  } catch (const ParseError& e) {
    g_last_error = e.what();
    return FUSION_ERR_USAGE;
  } catch (const InvalidSpec& e) {
    g_last_error = e.what();
    return FUSION_ERR_USAGE;
  } catch (const ValidationFailure& e) {
    g_last_error = e.what();
    return FUSION_ERR_VALIDATION;
  } catch (const NumericFailure& e) {
    g_last_error = e.what();
    return FUSION_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FUSION_ERR_NUMERIC;
  }
}

std::string obs_csv(const FusedLaw& law, const std::vector<const ObsFunction*>& funcs,
                    const std::vector<std::string>& names) {
  std::string out = "source,cell";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t j = 0; j < law.source_count(); ++j) {
    const AxisSet& z = law.source_laws[j].space();
    for (std::size_t c = 0; c < z.cell_count(); ++c) {
      out += std::to_string(j + 1) + ",\"" + z.cell_label(c) + "\"";
      for (const ObsFunction* f : funcs) out += "," + format_double(f->per_source[j][c]);
      out += "\n";
    }
  }
  return out;
}

}  // namespace

struct fusion_model {
  ModelFile file;
  std::optional<FusedModel> bound;  // strict binding, built on first operator use

  const FusedModel& model() {
    if (!bound.has_value())
      bound.emplace(FusedModel::bind(file.ideal, file.spec, file.law(), file.tangent_q));
    return *bound;
  }
};

namespace {

RealTable parse_psi(const fusion_model* m, const char* psi_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(psi_json ? psi_json : "");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("psi file: ") + e.what());
  }
  if (!j.contains("values")) throw ParseError("psi file needs a 'values' array");
  const auto& jv = j.at("values");
  if (jv.size() != m->file.ideal.cell_count())
    throw ParseError("psi values length does not match the ideal space");
  Vec v(static_cast<Eigen::Index>(jv.size()));
  for (std::size_t i = 0; i < jv.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = jv[i].get<double>();
  return RealTable(m->file.ideal.space(), std::move(v));
}

}  // namespace

extern "C" {

unsigned fusion_abi_version(void) { return 1; }

const char* fusion_last_error(void) { return g_last_error.c_str(); }

void fusion_string_free(char* s) { std::free(s); }

fusion_status fusion_model_parse(const char* json_text, fusion_model** out) {
  if (!out) return FUSION_ERR_USAGE;
  *out = nullptr;
  return guarded([&] {
    if (!json_text) throw ParseError("null model text");
    auto* m = new fusion_model{parse_model(json_text), std::nullopt};
    *out = m;
  });
}

void fusion_model_free(fusion_model* m) { delete m; }

fusion_status fusion_validate(const fusion_model* m, char** json_report) {
  if (!m || !json_report) return FUSION_ERR_USAGE;
  *json_report = nullptr;
  bool aligned = false;
  fusion_status st = guarded([&] {
    FusedLaw law = m->file.law();
    AlignmentReport rep = check_alignment(law, m->file.ideal, m->file.spec);
    if (rep.aligned)
      rep = check_strong_alignment(law, m->file.ideal, canonical_u(law), m->file.spec);
    aligned = rep.aligned;
    JsonWriter w;
    w.begin_object();
    w.key("aligned");
    w.boolean(rep.aligned);
    w.key("blocks");
    w.begin_array();
    for (const auto& b : rep.blocks) {
      w.begin_object();
      w.key("source");
      w.number_int(b.source);
      w.key("block");
      w.number_int(b.block);
      w.key("max_discrepancy");
      w.number(b.max_discrepancy);
      w.key("ok");
      w.boolean(b.ok);
      w.end_object();
    }
    w.end_array();
    w.key("support_violations");
    w.begin_array();
    for (const auto& v : rep.support_violations) w.string(v);
    w.end_array();
    if (rep.delta.has_value()) {
      w.key("delta");
      w.number(*rep.delta);
      w.key("epsilon");
      w.number(*rep.epsilon);
    }
    w.key("floored_cells");
    w.number_int(static_cast<long long>(diag::counters().floored_cells));
    w.key("pinv_truncations");
    w.number_int(static_cast<long long>(diag::counters().pinv_truncations));
    w.end_object();
    *json_report = dup_string(w.str());
  });
  if (st != FUSION_OK) return st;
  if (!aligned) {
    g_last_error = "model is not aligned";
    return FUSION_ERR_VALIDATION;
  }
  return FUSION_OK;
}

fusion_status fusion_operator_dump(const fusion_model* m, const char* which, char** csv) {
  if (!m || !which || !csv) return FUSION_ERR_USAGE;
  *csv = nullptr;
  return guarded([&] {
    auto* mm = const_cast<fusion_model*>(m);
    const FusedModel& model = mm->model();
    std::string what = which;
    std::vector<std::string> row_labels, col_labels;
    Mat mat;
    if (what == "A") {
      mat = a_matrix_cells(model);
      row_labels = obs_cell_labels(model);
      col_labels = h_cell_labels(model);
    } else if (what == "Astar") {
      mat = a_star_matrix_cells(model);
      row_labels = h_cell_labels(model);
      col_labels = obs_cell_labels(model);
    } else if (what == "info") {
      mat = information_matrix_cells(model);
      row_labels = col_labels = h_cell_labels(model);
    } else if (what == "tangent") {
      SubspaceBasis t = tangent_space(model);
      mat = t.columns;
      row_labels = obs_cell_labels(model);
      for (std::size_t i = 0; i < t.dim(); ++i) col_labels.push_back("t" + std::to_string(i));
    } else {
      throw ParseError("unknown operator '" + what + "' (use A|Astar|info|tangent)");
    }
    std::string out = "cell";
    for (const auto& c : col_labels) out += ",\"" + c + "\"";
    out += "\n";
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      out += "\"" + row_labels[static_cast<std::size_t>(r)] + "\"";
      for (Eigen::Index c = 0; c < mat.cols(); ++c) out += "," + format_double(mat(r, c));
      out += "\n";
    }
    *csv = dup_string(out);
  });
}

fusion_status fusion_decompose(const fusion_model* m, const char* psi_json,
                               char** json_report) {
  if (!m || !json_report) return FUSION_ERR_USAGE;
  *json_report = nullptr;
  return guarded([&] {
    diag::reset_counters();
    auto* mm = const_cast<fusion_model*>(m);
    const FusedModel& model = mm->model();
    RealTable psi = parse_psi(m, psi_json);
    DecomposeOutcome out = model.source_count() == 2 ? two_source_solve(model, psi)
                                                     : decompose_algorithm(model, psi);
    JsonWriter w;
    w.begin_object();
    w.key("decomposable");
    w.boolean(out.ok);
    w.key("residual");
    w.number(out.residual);
    w.key("method");
    w.string(model.source_count() == 2 ? "two-source" : "decompose");
    if (out.ok) {
      w.key("components");
      w.begin_array();
      for (std::size_t j = 0; j < model.source_count(); ++j) {
        w.begin_array();
        for (std::size_t k = 0; k < model.structure(j).block_count(); ++k) {
          w.begin_object();
          w.key("cells");
          w.begin_array();
          const AxisSet& sp = out.dec.m_parts[j][k].space;
          for (std::size_t c = 0; c < sp.cell_count(); ++c) w.string(sp.cell_label(c));
          w.end_array();
          w.key("values");
          w.begin_array();
          for (std::size_t c = 0; c < sp.cell_count(); ++c)
            w.number(out.dec.m_parts[j][k][c]);
          w.end_array();
          w.end_object();
        }
        w.end_array();
      }
      w.end_array();
    }
    w.key("floored_cells");
    w.number_int(static_cast<long long>(diag::counters().floored_cells));
    w.key("pinv_truncations");
    w.number_int(static_cast<long long>(diag::counters().pinv_truncations));
    w.end_object();
    *json_report = dup_string(w.str());
  });
}

fusion_status fusion_influence(const fusion_model* m, const char* psi_json, int want_eif,
                               int family_count, unsigned long long family_seed,
                               char** json_report) {
  if (!m || !json_report) return FUSION_ERR_USAGE;
  *json_report = nullptr;
  return guarded([&] {
    diag::reset_counters();
    auto* mm = const_cast<fusion_model*>(m);
    const FusedModel& model = mm->model();
    RealTable psi = parse_psi(m, psi_json);
    DecomposeOutcome out = model.source_count() == 2 ? two_source_solve(model, psi)
                                                     : decompose_algorithm(model, psi);
    if (!out.ok)
      throw NumericFailure("the supplied ideal gradient does not decompose (residual " +
                           format_double(out.residual) + ")");
    ObsFunction phi1 = lift_to_observed(model, out.dec);
    double grad = gradient_equation_residual(model, phi1, psi);

    std::vector<const ObsFunction*> table{&phi1};
    std::vector<std::string> names{"phi1"};
    std::optional<ObsFunction> eif_p;
    double eif_agreement = 0.0;
    if (want_eif) {
      eif_p = eif_project(model, phi1);
      EifSolveResult solved = eif_solve(model, project_tangent_q(model, psi));
      Vec diff = flatten_obs(*eif_p) - flatten_obs(solved.phi_eff);
      eif_agreement = diff.cwiseAbs().maxCoeff();
      table.push_back(&*eif_p);
      names.push_back("eif");
    }
    std::vector<ObsFunction> members;
    if (family_count > 0 && model.source_count() == 2) {
      SubspaceBasis inter = d_intersection(model);
      std::mt19937_64 rng(family_seed);
      std::normal_distribution<double> g;
      members.reserve(static_cast<std::size_t>(family_count));
      for (int i = 0; i < family_count; ++i) {
        RealTable f = RealTable::zeros(model.q().space());
        for (std::size_t b = 0; b < inter.dim(); ++b)
          f.values += g(rng) * inter.columns.col(static_cast<Eigen::Index>(b));
        members.push_back(family_member(model, phi1, f));
      }
      for (int i = 0; i < family_count; ++i) {
        table.push_back(&members[static_cast<std::size_t>(i)]);
        names.push_back("member_" + std::to_string(i + 1));
      }
    }

    JsonWriter w;
    w.begin_object();
    w.key("method");
    w.string(model.source_count() == 2 ? "two-source" : "decompose");
    w.key("residual");
    w.number(out.residual);
    w.key("variance");
    w.number(obs_variance(model.p(), phi1));
    w.key("gradient_residual");
    w.number(grad);
    if (want_eif) {
      w.key("eif_variance");
      w.number(obs_variance(model.p(), *eif_p));
      w.key("eif_method_agreement");
      w.number(eif_agreement);
    }
    w.key("floored_cells");
    w.number_int(static_cast<long long>(diag::counters().floored_cells));
    w.key("pinv_truncations");
    w.number_int(static_cast<long long>(diag::counters().pinv_truncations));
    w.key("table_csv");
    w.string(obs_csv(model.p(), table, names));
    w.end_object();
    *json_report = dup_string(w.str());
  });
}

fusion_status fusion_framework(const fusion_model* m, const char* kind, const char* compute,
                               char** json_report) {
  if (!m || !compute || !json_report) return FUSION_ERR_USAGE;
  *json_report = nullptr;
  return guarded([&] {
    diag::reset_counters();
    ModelFile file = m->file;
    if (kind && kind[0] != '\0') {
      FrameworkParams params = parse_framework_params(file.framework_json);
      file.framework_json =
          framework_params_to_json(framework_kind_from_string(kind), params);
    }
    Framework fw = bind_framework(file);
    std::string what = compute;
    JsonWriter w;
    w.begin_object();
    w.key("kind");
    w.string(to_string(fw.kind));
    if (what == "phi") {
      w.key("phi");
      w.number(framework_phi(fw));
    } else if (what == "if" || what == "eif") {
      ObsFunction f = what == "if" ? framework_if(fw) : framework_eif(fw);
      w.key("phi");
      w.number(framework_phi(fw));
      w.key("variance");
      w.number(obs_variance(fw.law, f));
      RealTable psi = framework_ideal_if(fw);
      FusedModel model = framework_model(fw);
      w.key("gradient_residual");
      w.number(gradient_equation_residual(model, f, psi));
      if (what == "eif") {
        ObsFunction anchor = framework_if(fw);
        w.key("anchor_variance");
        w.number(obs_variance(fw.law, anchor));
      }
      w.key("table_csv");
      w.string(obs_csv(fw.law, {&f}, {what}));
    } else if (what == "demo") {
      NaiveObedientReport rep = naive_vs_obedient_demo(fw);
      w.key("invertible_map");
      w.boolean(rep.invertible_map);
      w.key("phi");
      w.number(rep.phi_value);
      w.key("var_naive");
      w.number(rep.var_naive);
      w.key("var_eff");
      w.number(rep.var_eff);
      w.key("gap");
      w.number(rep.gap);
      w.key("incompatibility_residual");
      w.number(rep.incompatibility_residual);
      w.key("grad_residual_naive");
      w.number(rep.grad_residual_naive);
      w.key("grad_residual_eff");
      w.number(rep.grad_residual_eff);
    } else {
      throw ParseError("unknown compute '" + what + "' (use phi|if|eif|demo)");
    }
    w.key("floored_cells");
    w.number_int(static_cast<long long>(diag::counters().floored_cells));
    w.key("pinv_truncations");
    w.number_int(static_cast<long long>(diag::counters().pinv_truncations));
    w.end_object();
    *json_report = dup_string(w.str());
  });
}

fusion_status fusion_simulate(const fusion_model* m, const char* kind, const char* n_list,
                              int reps, unsigned long long seed, int threads, char** csv) {
  if (!m || !n_list || !csv) return FUSION_ERR_USAGE;
  *csv = nullptr;
  return guarded([&] {
    ModelFile file = m->file;
    if (kind && kind[0] != '\0') {
      FrameworkParams params = parse_framework_params(file.framework_json);
      file.framework_json =
          framework_params_to_json(framework_kind_from_string(kind), params);
    }
    Framework fw = bind_framework(file);
    std::vector<std::size_t> grid;
    std::stringstream ss(n_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      long v = std::stol(tok);
      if (v < 1) throw ParseError("sample sizes must be positive");
      grid.push_back(static_cast<std::size_t>(v));
    }
    if (grid.empty()) throw ParseError("empty sample-size list");
    if (reps < 1) throw ParseError("reps must be positive");
    MonteCarloReport rep = monte_carlo(fw, grid, static_cast<std::size_t>(reps), seed,
                                       threads < 1 ? 1 : threads);
    *csv = dup_string(monte_carlo_csv(rep));
  });
}

fusion_status fusion_figure(const char* dgp, char** csv) {
  if (!dgp || !csv) return FUSION_ERR_USAGE;
  *csv = nullptr;
  return guarded([&] {
    if (std::string(dgp) != "appendix-c")
      throw ParseError("unknown dgp '" + std::string(dgp) + "' (use appendix-c)");
    *csv = dup_string(are_csv(are_curves(default_s1_grid())));
  });
}

fusion_status fusion_appendix_c_model(const char* scenario, double p_s1, char** model_json) {
  if (!model_json) return FUSION_ERR_USAGE;
  *model_json = nullptr;
  return guarded([&] {
    FrameworkKind kind = FrameworkKind::TransportII;
    if (scenario && scenario[0] != '\0') kind = framework_kind_from_string(scenario);
    *model_json = dup_string(model_to_json(appendix_c_model(p_s1, kind)));
  });
}

}  // extern "C"
