// fusion: command-line front end over the C API (fusion/fusion.h).

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "fusion/fusion.h"

namespace {

int status_to_exit(fusion_status st) { return static_cast<int>(st); }

[[noreturn]] void die(fusion_status st) {
  std::cerr << "fusion: error: " << fusion_last_error() << "\n";
  std::exit(status_to_exit(st));
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::cerr << "fusion: cannot read '" << path << "'\n";
    std::exit(64);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// temp file + rename: readers never observe partial artifacts
void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path tmp = fs::path(path);
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) {
      std::cerr << "fusion: cannot write '" << tmp.string() << "'\n";
      std::exit(64);
    }
    f << content;
  }
  fs::rename(tmp, path);
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty())
    std::cout << content;
  else
    write_atomic(out_path, content);
}

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { fusion_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

struct OwnedModel {
  fusion_model* m = nullptr;
  ~OwnedModel() { fusion_model_free(m); }
};

OwnedModel load_model(const std::string& path) {
  OwnedModel m;
  fusion_status st = fusion_model_parse(slurp(path).c_str(), &m.m);
  if (st != FUSION_OK) die(st);
  return m;
}

unsigned long long effective_seed(unsigned long long cli_seed) {
  if (const char* env = std::getenv("FUSION_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return cli_seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fused-data semiparametric efficiency calculus"};
  app.require_subcommand(1);

  std::string model_path, psi_path, out_path, which = "A", kind, compute = "phi";
  std::string n_list = "500,2000,8000", dgp = "appendix-c", emit_model_path, scenario;
  int reps = 500, family = 0, threads = 1;
  unsigned long long seed = 42;
  double p_s1 = 0.5;

  auto* validate = app.add_subcommand("validate", "check alignment of a model file");
  validate->add_option("model", model_path)->required();

  auto* op = app.add_subcommand("operator", "dump score-operator matrices as CSV");
  op->add_option("model", model_path)->required();
  op->add_option("--dump", which, "A|Astar|info|tangent")->capture_default_str();
  op->add_option("--out", out_path);

  auto* infl = app.add_subcommand("influence", "observed influence function for an ideal gradient");
  infl->add_option("model", model_path)->required();
  infl->add_option("--psi", psi_path)->required();
  bool want_eif = false;
  infl->add_flag("--eif", want_eif, "add the efficient influence function");
  infl->add_option("--family", family, "emit N family members");
  infl->add_option("--seed", seed, "family sampling seed")->capture_default_str();
  infl->add_option("--out", out_path, "write the CSV table here");

  auto* eif = app.add_subcommand("eif", "efficient influence function by both routes");
  eif->add_option("model", model_path)->required();
  eif->add_option("--psi", psi_path)->required();
  eif->add_option("--out", out_path, "write the CSV table here");

  auto* fw = app.add_subcommand("framework", "worked framework computations");
  fw->add_option("kind", kind, "prevalence|tsiv|transport-*|generic-ub-*")->required();
  fw->add_option("model", model_path)->required();
  fw->add_option("--compute", compute, "phi|if|eif|demo")->capture_default_str();
  fw->add_option("--out", out_path, "write the CSV table here");

  auto* dec = app.add_subcommand("decompose", "run the ideal-gradient decomposition");
  dec->add_option("model", model_path)->required();
  dec->add_option("--psi", psi_path)->required();
  dec->add_option("--out", out_path);

  auto* sim = app.add_subcommand("simulate", "one-step Monte Carlo study");
  sim->add_option("model", model_path)->required();
  sim->add_option("--framework", kind, "framework kind (defaults to the model file's)");
  sim->add_option("--n", n_list)->capture_default_str();
  sim->add_option("--reps", reps)->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--threads", threads)->capture_default_str();
  sim->add_option("--out", out_path);

  auto* fig = app.add_subcommand("figure", "efficiency-comparison curves");
  fig->add_option("--dgp", dgp)->capture_default_str();
  fig->add_option("--out", out_path);
  fig->add_option("--emit-model", emit_model_path, "also write the DGP as a model file");
  fig->add_option("--p-s1", p_s1, "P(S=1) for --emit-model")->capture_default_str();
  fig->add_option("--scenario", scenario, "framework block for --emit-model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << "\n";
    return 64;
  }

  if (validate->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString rep;
    fusion_status st = fusion_validate(m.m, &rep.s);
    if (rep.s) std::cout << rep.str() << "\n";
    if (st != FUSION_OK && !rep.s) die(st);
    return status_to_exit(st);
  }
  if (op->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString csv;
    fusion_status st = fusion_operator_dump(m.m, which.c_str(), &csv.s);
    if (st != FUSION_OK) die(st);
    emit(csv.str(), out_path);
    return 0;
  }
  if (infl->parsed() || eif->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString rep;
    int eff = eif->parsed() ? 1 : (want_eif ? 1 : 0);
    fusion_status st = fusion_influence(m.m, slurp(psi_path).c_str(), eff,
                                        eif->parsed() ? 0 : family, effective_seed(seed),
                                        &rep.s);
    if (st != FUSION_OK) die(st);
    if (!out_path.empty()) {
      auto j = nlohmann::json::parse(rep.str());
      write_atomic(out_path, j.at("table_csv").get<std::string>());
    }
    std::cout << rep.str() << "\n";
    return 0;
  }
  if (fw->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString rep;
    fusion_status st = fusion_framework(m.m, kind.c_str(), compute.c_str(), &rep.s);
    if (st != FUSION_OK) die(st);
    if (!out_path.empty()) {
      auto j = nlohmann::json::parse(rep.str());
      if (j.contains("table_csv")) write_atomic(out_path, j.at("table_csv").get<std::string>());
    }
    std::cout << rep.str() << "\n";
    return 0;
  }
  if (dec->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString rep;
    fusion_status st = fusion_decompose(m.m, slurp(psi_path).c_str(), &rep.s);
    if (st != FUSION_OK) die(st);
    emit(rep.str() + "\n", out_path);
    return 0;
  }
  if (sim->parsed()) {
    OwnedModel m = load_model(model_path);
    OwnedString csv;
    fusion_status st = fusion_simulate(m.m, kind.c_str(), n_list.c_str(), reps,
                                       effective_seed(seed), threads, &csv.s);
    if (st != FUSION_OK) die(st);
    emit(csv.str(), out_path);
    return 0;
  }
  if (fig->parsed()) {
    if (!emit_model_path.empty()) {
      OwnedString model_json;
      fusion_status st =
          fusion_appendix_c_model(scenario.c_str(), p_s1, &model_json.s);
      if (st != FUSION_OK) die(st);
      write_atomic(emit_model_path, model_json.str());
    }
    OwnedString csv;
    fusion_status st = fusion_figure(dgp.c_str(), &csv.s);
    if (st != FUSION_OK) die(st);
    emit(csv.str(), out_path);
    return 0;
  }
  return 64;
}
