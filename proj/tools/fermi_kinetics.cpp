// fermi-kinetics: lattice Fermi gas diagrammatics and collision kernels.
//
// Subcommands: kernels, graphs, classify, nu, collision, series, amplitude,
// verify. Model flags are shared; FERMI_KINETICS_THREADS caps parallelism.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fermik/acceptance.hpp"
#include "fermik/classifier.hpp"
#include "fermik/kernels.hpp"
#include "fermik/kinetic.hpp"

using namespace fermik;

namespace {

struct ModelFlags {
  ModelConfig cfg;
  std::string config_path;
  std::string dump_model;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON model config file");
    app->add_option("--dim", cfg.dim, "torus dimension");
    app->add_option("--L", cfg.side, "grid side length");
    app->add_option("--T", cfg.temperature, "temperature");
    app->add_option("--lambda", cfg.lambda, "coupling");
    app->add_option("--c", cfg.c, "dispersion constant");
    app->add_option("--c-tilde", cfg.c_tilde, "interaction constant");
    app->add_option("--v-scale", cfg.v_scale, "interaction cosine amplitude");
    app->add_option("--alpha", cfg.alpha, "interaction phases per coordinate");
    app->add_option("--delta", cfg.delta, "dispersive exponent input");
    app->add_option("--gamma", cfg.gamma_cr, "crossing exponent input");
    app->add_option("--dump-model", dump_model, "write model tables as CSV into a directory");
  }

  ModelConfig resolve() {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw CLI::ValidationError("--config", "cannot open " + config_path);
      json j = json::parse(in);
      ModelConfig file_cfg = ModelConfig::from_json(j);
      ModelConfig def;
      if (cfg.dim == def.dim) cfg.dim = file_cfg.dim;
      if (cfg.side == def.side) cfg.side = file_cfg.side;
      if (cfg.temperature == def.temperature) cfg.temperature = file_cfg.temperature;
      if (cfg.lambda == def.lambda) cfg.lambda = file_cfg.lambda;
      if (cfg.c == def.c) cfg.c = file_cfg.c;
      if (cfg.c_tilde == def.c_tilde) cfg.c_tilde = file_cfg.c_tilde;
      if (cfg.v_scale == def.v_scale) cfg.v_scale = file_cfg.v_scale;
      if (cfg.alpha.empty()) cfg.alpha = file_cfg.alpha;
      if (cfg.delta == def.delta) cfg.delta = file_cfg.delta;
      if (cfg.gamma_cr == def.gamma_cr) cfg.gamma_cr = file_cfg.gamma_cr;
    }
    return cfg;
  }
};

void write_output(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    std::ofstream out(path, std::ios::binary);
    out << text;
  }
}

void dump_model_tables(const LatticeModel& m, const std::string& dir) {
  auto write_csv = [&](const std::string& name, const std::vector<double>& tab) {
    std::ofstream out(dir + "/" + name + ".csv", std::ios::binary);
    for (int j = 0; j < m.cfg.dim; ++j) out << "k" << j + 1 << ",";
    out << "value\n";
    int x[kMaxDim];
    for (std::size_t i = 0; i < tab.size(); ++i) {
      m.grid.decode(i, x);
      for (int j = 0; j < m.cfg.dim; ++j) out << x[j] << ",";
      out << format_double(tab[i]) << "\n";
    }
  };
  write_csv("omega", m.omega_tab);
  write_csv("omega_lambda", m.omega_lambda_tab);
  write_csv("w0", m.w0_tab);
  write_csv("vhat", m.vhat_tab);
  std::vector<double> rtab(m.grid.size());
  for (std::size_t i = 0; i < rtab.size(); ++i) rtab[i] = m.mod.r_table(i);
  write_csv("r_lambda", rtab);
}

std::size_t parse_k(const LatticeModel& m, const std::string& kstr) {
  std::stringstream ss(kstr);
  int x[kMaxDim] = {0, 0, 0, 0};
  std::string part;
  int j = 0;
  while (std::getline(ss, part, ',') && j < m.cfg.dim) x[j++] = std::stoi(part);
  return m.grid.encode(x);
}

json base_report(const ModelConfig& cfg, std::uint64_t seed) {
  json j;
  j["config"] = cfg.to_json();
  j["seed"] = seed;
  return j;
}

int run_kernels(const ModelConfig& cfg, const std::string& check, double tmax, double zeta,
                const std::string& out_path, std::uint64_t seed) {
  LatticeModel m = make_model(cfg);
  json rep = base_report(cfg, seed);
  json reports = json::array();
  if (check == "dr2") {
    BoundReport r;
    r.name = "l3-dispersivity";
    double fitted = 0.0;
    for (double t = 0.0; t <= tmax; t += 0.5) {
      const double l3 = propagator_l3(m, t);
      const double target = std::pow(1.0 + t * t, -1.5 * m.cfg.dim / 7.0);
      r.sweep.push_back(json{{"t", t}});
      r.measured.push_back(l3 * l3 * l3);
      r.target.push_back(target);
      fitted = std::max(fitted, l3 * l3 * l3 / target);
    }
    r.fitted_constant = fitted;
    r.pass = std::isfinite(fitted);
    reports.push_back(r.to_json());
  } else if (check == "dr3") {
    std::vector<double> ts;
    for (double t = 0.0; t <= tmax; t += 1.0) ts.push_back(t);
    for (int i = 1; i <= 3; ++i) {
      double k0[kMaxDim] = {0.05 + 0.09 * i, 0.11 + 0.06 * i, 0.17, 0.23};
      reports.push_back(interference_report(m, k0, +1, ts).to_json());
    }
  } else if (check == "dr4") {
    std::array<std::array<double, kMaxDim>, 3> u{};
    for (int n = 0; n < 3; ++n)
      for (int j = 0; j < m.cfg.dim; ++j)
        u[std::size_t(n)][std::size_t(j)] = 0.21 + 0.07 * n + 0.05 * j;
    reports.push_back(crossing_check(m, 1, {+1, -1, +1}, u, zeta).to_json());
    reports.push_back(crossing_check(m, 2, {+1, -1, +1}, u, zeta).to_json());
  } else if (check == "loops") {
    for (int deg : {1, 2}) {
      BoundReport r;
      r.name = deg == 1 ? "degree-one-loop" : "degree-two-loop";
      double k0[kMaxDim] = {0.27, 0.31, 0.15, 0.05};
      double fitted = 0.0;
      for (double beta : {1.0, 0.1, 0.01, 0.001}) {
        const double v = resolvent_loop(m, deg, k0, 0.3, beta, +1, +1);
        const double lb = std::sqrt(1.0 + std::log(beta) * std::log(beta));
        const double lam_b = m.cfg.lambda > 0 ? std::pow(m.cfg.lambda, -0.75) : 1.0;
        const double target = deg == 1 ? lam_b * lb * lb : lb;
        r.sweep.push_back(json{{"beta", beta}});
        r.measured.push_back(v);
        r.target.push_back(target);
        fitted = std::max(fitted, v / target);
      }
      r.fitted_constant = fitted;
      r.pass = std::isfinite(fitted);
      reports.push_back(r.to_json());
    }
  } else {
    std::fprintf(stderr, "unknown --check '%s' (dr2|dr3|dr4|loops)\n", check.c_str());
    return 2;
  }
  rep["reports"] = reports;
  write_output(rep, out_path);
  return 0;
}

int run_graphs(int n, int n_prime, const std::string& shape_str, bool pairings_only,
               bool parity_valid, const std::string& dump_dir, long limit) {
  const Shape shape = shape_str == "error" ? Shape::Error : Shape::Main;
  const EnumMode mode = !pairings_only ? EnumMode::FullEven
                        : parity_valid ? EnumMode::PairingsParityValid
                                       : EnumMode::PairingsAll;
  EnumCaps caps;
  long count = 0, dumped = 0, relevant_count = 0;
  MomentumGraph g;
  enumerate_specs(n, n_prime, shape, mode, caps, [&](const GraphSpec& spec) {
    ++count;
    if (dump_dir.empty() && count > limit) return;
    build_graph_into(spec, g);
    resolve_momenta(g);
    relevant_count += relevance(g) == RelevanceReason::Relevant;
    if (!dump_dir.empty() && dumped < limit) {
      json j = g.to_json();
      j["sign"] = cluster_sign(normalized(spec).clusters);
      const auto rel = relevance(g);
      j["relevant"] = rel == RelevanceReason::Relevant;
      j["reason"] = to_string(rel);
      std::ofstream out(dump_dir + "/graph_" + std::to_string(count - 1) + ".json",
                        std::ios::binary);
      out << j.dump(2) << "\n";
      ++dumped;
    }
  });
  json summary;
  summary["n"] = n;
  summary["n_prime"] = n_prime;
  summary["shape"] = shape_str;
  summary["mode"] =
      pairings_only ? (parity_valid ? "pairings_parity_valid" : "pairings") : "full";
  summary["count"] = count;
  summary["relevant_among_considered"] = relevant_count;
  summary["dumped"] = dumped;
  write_output(summary, "");
  return 0;
}

int run_classify(const std::string& input, const std::string& out_path) {
  std::ifstream in(input);
  if (!in) {
    std::fprintf(stderr, "cannot open %s\n", input.c_str());
    return 2;
  }
  json jin = json::parse(in);
  if (!jin.is_array()) jin = json::array({jin});
  json tags = json::array();
  for (std::size_t i = 0; i < jin.size(); ++i) {
    GraphSpec spec = GraphSpec::from_json(jin[i]);
    MomentumGraph g = build_graph(spec);
    resolve_momenta(g);
    json t = classify(g).to_json();
    t["graph_id"] = i;
    tags.push_back(t);
  }
  write_output(json{{"tags", tags}}, out_path);
  return 0;
}

int run_nu(const ModelConfig& cfg, const std::string& kstr, double eta, bool refine,
           const std::string& out_path, std::uint64_t seed) {
  LatticeModel m = make_model(cfg);
  const std::size_t k = parse_k(m, kstr);
  NuValue v = nu(m, k, eta);
  json rep = base_report(cfg, seed);
  rep.update(v.to_json());
  rep["re_onshell"] = re_nu_onshell(m, k, eta);
  rep["dispersion"] = "bare";  // the time phase uses the unmodified band
  if (refine) {
    ModelConfig c2 = cfg;
    c2.side *= 2;
    LatticeModel m2 = make_model(c2);
    int x[kMaxDim];
    m.grid.decode(k, x);
    for (int j = 0; j < cfg.dim; ++j) x[j] *= 2;
    NuValue v2 = nu(m2, m2.grid.encode(x), eta);
    rep["refinement"] = json{{"L", cfg.side},
                             {"L2x_delta", std::abs(v2.value - v.value) / std::abs(v2.value)}};
  }
  write_output(rep, out_path);
  return 0;
}

int run_collision(const ModelConfig& cfg, const std::string& wfield_path, double eta,
                  const std::string& kstr, const std::string& out_path, std::uint64_t seed) {
  LatticeModel m = make_model(cfg);
  WField w = WField::equilibrium(m);
  if (!wfield_path.empty()) {
    std::ifstream in(wfield_path);
    if (!in) {
      std::fprintf(stderr, "cannot open %s\n", wfield_path.c_str());
      return 2;
    }
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      int x[kMaxDim] = {0, 0, 0, 0};
      for (int j = 0; j < cfg.dim; ++j) {
        std::getline(ss, cell, ',');
        x[j] = std::stoi(cell);
      }
      std::getline(ss, cell, ',');
      w.w[m.grid.encode(x)] = std::stod(cell);
    }
    w.clamp();
  }
  json rep = base_report(cfg, seed);
  rep["eta"] = eta;
  if (!kstr.empty()) {
    const std::size_t k = parse_k(m, kstr);
    rep["k"] = kstr;
    rep["value"] = collision_operator(m, w, k, eta);
  } else {
    std::vector<double> vals(m.grid.size());
    parallel_for(m.grid.size(),
                 [&](std::size_t i, int) { vals[i] = collision_operator(m, w, i, eta); });
    double max_abs = 0.0, l2 = 0.0;
    for (double v : vals) {
      max_abs = std::max(max_abs, std::abs(v));
      l2 += v * v;
    }
    rep["max_abs"] = max_abs;
    rep["l2"] = std::sqrt(l2 / double(vals.size()));
  }
  write_output(rep, out_path);
  return 0;
}

int run_series(const ModelConfig& cfg, const std::string& kstr, double t, int M, double eta,
               const std::string& out_path, std::uint64_t seed) {
  LatticeModel m = make_model(cfg);
  const std::size_t k = parse_k(m, kstr);
  json rep = base_report(cfg, seed);
  rep.update(leading_series(m, k, t, eta, M).to_json());
  write_output(rep, out_path);
  return 0;
}

int run_amplitude(const ModelConfig& cfg, const std::string& graph_path, double t, double eta,
                  const std::string& out_path, std::uint64_t seed) {
  std::ifstream in(graph_path);
  if (!in) {
    std::fprintf(stderr, "cannot open %s\n", graph_path.c_str());
    return 2;
  }
  GraphSpec spec = GraphSpec::from_json(json::parse(in));
  MomentumGraph g = build_graph(spec);
  resolve_momenta(g);
  auto cls = classify(g);
  if (cls.tag != Tag::Leading) {
    std::fprintf(stderr, "amplitude: graph is %s, not leading\n", to_string(cls.tag));
    return 3;
  }
  const int mm = int(cls.recollisions.size());
  if (mm > 2) {
    std::fprintf(stderr, "amplitude: m = %d exceeds the supported cap m <= 2\n", mm);
    return 3;
  }
  const GraphSpec norm = normalized(spec);
  LeadingItem found;
  bool have = false;
  enumerate_leading(mm, spec.shape, [&](const LeadingItem& item) {
    if (!have && normalized(item.spec) == norm) {
      found = item;
      have = true;
    }
  });
  if (!have) {
    std::fprintf(stderr, "amplitude: leading graph not found in the attachment enumeration\n");
    return 3;
  }
  LatticeModel m = make_model(cfg);
  std::vector<double> weight(m.grid.size(), 1.0);  // g^ = f^ = 1
  AmplitudeOptions opt;
  opt.eta = eta;
  auto res = amplitude_main_pair(m, found, weight, t, opt);
  json rep = base_report(cfg, seed);
  rep.update(res.to_json());
  rep["t"] = t;
  rep["eta"] = eta;
  json ms = json::array();
  for (const auto& mref : found.motives) ms.push_back(to_string(mref.id));
  rep["motives"] = ms;
  write_output(rep, out_path);
  return 0;
}

int run_verify(const std::string& scope, std::vector<int> criteria, int max_n,
               std::uint64_t seed, const std::string& out_path) {
  if (max_n != 4)
    std::fprintf(stderr,
                 "note: enumeration caps are pinned by the acceptance suite "
                 "(full clusterings at n+n' <= 4, pairings at n+n' <= 6)\n");
  if (criteria.empty()) {
    if (scope == "graphs") criteria = {1, 2, 3};
    else if (scope == "kernels") criteria = {5};
    else if (scope == "motives") criteria = {4};
    else if (scope == "kinetic") criteria = {6, 7, 8};
    else if (scope == "schedule") criteria = {9};
    else if (scope == "all" || scope.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    else {
      std::fprintf(stderr, "unknown verify scope '%s'\n", scope.c_str());
      return 2;
    }
  }
  auto results = run_acceptance(criteria, seed, true);
  json rep;
  rep["seed"] = seed;
  json items = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    json j;
    j["id"] = r.id;
    j["name"] = r.name;
    j["pass"] = r.pass;
    j["details"] = r.details;
    items.push_back(j);
    all_pass &= r.pass;
  }
  rep["criteria"] = items;
  rep["all_pass"] = all_pass;
  write_output(rep, out_path);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice Fermi gas diagrammatics and collision kernels"};
  app.require_subcommand(1);

  ModelFlags flags;
  std::uint64_t seed = kDefaultSeed;
  app.add_option("--seed", seed, "seed for randomized checks");

  auto* sc_kernels = app.add_subcommand("kernels", "oscillatory-kernel bound checks");
  flags.attach(sc_kernels);
  std::string check = "dr2", out_path;
  double tmax = 50.0, zeta = 0.5;
  sc_kernels->add_option("--check", check, "dr2|dr3|dr4|loops");
  sc_kernels->add_option("--tmax", tmax, "time sweep extent");
  sc_kernels->add_option("--zeta", zeta, "damping parameter");
  sc_kernels->add_option("--out", out_path, "report path (default stdout)");

  auto* sc_graphs = app.add_subcommand("graphs", "enumerate momentum graphs");
  std::vector<int> enum_nn = {1, 0};
  std::string shape = "main", dump_dir;
  bool pairings_only = false, parity_valid = false;
  long limit = 1000;
  sc_graphs->add_option("--enumerate", enum_nn, "n n'")->expected(2);
  sc_graphs->add_option("--shape", shape, "main|error");
  sc_graphs->add_option("--dump-dir", dump_dir, "write graph JSON files here");
  sc_graphs->add_flag("--pairings-only", pairings_only, "pairings instead of full clusterings");
  sc_graphs->add_flag("--parity-valid", parity_valid, "restrict to parity-admissible pairings");
  sc_graphs->add_option("--limit", limit, "cap on dumped/considered graphs");

  auto* sc_classify = app.add_subcommand("classify", "classify graphs from JSON");
  std::string cls_in, cls_out;
  sc_classify->add_option("--input", cls_in, "graph spec JSON (object or array)")->required();
  sc_classify->add_option("--out", cls_out, "tags JSON path");

  auto* sc_nu = app.add_subcommand("nu", "collisional frequency");
  flags.attach(sc_nu);
  std::string kstr = "1,0";
  double eta = 0.05;
  bool no_refine = false;
  sc_nu->add_option("--k", kstr, "grid momentum, comma-separated integers");
  sc_nu->add_option("--eta", eta, "regularization");
  sc_nu->add_flag("--no-refine", no_refine, "skip the L -> 2L refinement delta");
  sc_nu->add_option("--out", out_path, "output path");

  auto* sc_coll = app.add_subcommand("collision", "collision operator");
  flags.attach(sc_coll);
  std::string wfield, coll_k;
  double coll_eta = 0.05;
  sc_coll->add_option("--wfield", wfield, "occupation CSV (k columns + value); default W0");
  sc_coll->add_option("--eta", coll_eta, "regularization");
  sc_coll->add_option("--k", coll_k, "evaluate at one grid momentum");
  sc_coll->add_option("--out", out_path, "output path");

  auto* sc_series = app.add_subcommand("series", "leading series and closed form");
  flags.attach(sc_series);
  std::string ser_k = "1,0";
  double ser_t = 1.0, ser_eta = 0.05;
  int ser_m = 8;
  sc_series->add_option("--k", ser_k, "grid momentum");
  sc_series->add_option("--t", ser_t, "kinetic time");
  sc_series->add_option("--M", ser_m, "partial sum order");
  sc_series->add_option("--eta", ser_eta, "regularization");
  sc_series->add_option("--out", out_path, "output path");

  auto* sc_amp = app.add_subcommand("amplitude", "leading-graph amplitude");
  flags.attach(sc_amp);
  std::string amp_graph;
  double amp_t = 1.0, amp_eta = 0.05;
  sc_amp->add_option("--graph", amp_graph, "graph spec JSON path")->required();
  sc_amp->add_option("--t", amp_t, "kinetic time");
  sc_amp->add_option("--eta", amp_eta, "time damping");
  sc_amp->add_option("--out", out_path, "output path");

  auto* sc_verify = app.add_subcommand("verify", "run acceptance criteria");
  std::string scope = "all";
  std::vector<int> criteria;
  int max_n = 4;
  sc_verify->add_option("scope", scope, "graphs|kernels|motives|kinetic|schedule|all");
  sc_verify->add_option("--criteria", criteria, "explicit criterion ids (1..9)");
  sc_verify->add_option("--max", max_n, "acknowledged; caps are pinned (see note)");
  sc_verify->add_option("--out", out_path, "report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!flags.dump_model.empty()) {
      LatticeModel m = make_model(flags.resolve());
      dump_model_tables(m, flags.dump_model);
    }
    if (sc_kernels->parsed())
      return run_kernels(flags.resolve(), check, tmax, zeta, out_path, seed);
    if (sc_graphs->parsed())
      return run_graphs(enum_nn[0], enum_nn[1], shape, pairings_only, parity_valid, dump_dir,
                        limit);
    if (sc_classify->parsed()) return run_classify(cls_in, cls_out);
    if (sc_nu->parsed()) return run_nu(flags.resolve(), kstr, eta, !no_refine, out_path, seed);
    if (sc_coll->parsed())
      return run_collision(flags.resolve(), wfield, coll_eta, coll_k, out_path, seed);
    if (sc_series->parsed())
      return run_series(flags.resolve(), ser_k, ser_t, ser_m, ser_eta, out_path, seed);
    if (sc_amp->parsed())
      return run_amplitude(flags.resolve(), amp_graph, amp_t, amp_eta, out_path, seed);
    if (sc_verify->parsed()) return run_verify(scope, criteria, max_n, seed, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
