// radau-ep: batch front-end for the convergence studies.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "radau_ep/convergence.hpp"
#include "radau_ep/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace radau_ep;

namespace {

constexpr int kExitRun = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split_list(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  for (const auto& s : in) {
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::vector<std::string>& in) {
  std::vector<double> out;
  for (const auto& s : split_list(in)) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size()) throw UsageError("not a number: '" + s + "'");
    out.push_back(v);
  }
  return out;
}

int worker_limit() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("RADAU_EP_JOBS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs tasks on up to `workers` threads; rethrows the first failure.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto loop = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const int k = static_cast<int>(std::min<std::size_t>(n, std::max(1, workers)));
  for (int i = 1; i < k; ++i) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ------------------------------------------------------------ configuration

struct RunConfig {
  std::vector<std::string> scenarios;
  std::vector<std::string> methods;
  int stages = 2;
  std::vector<double> dts;
  std::vector<double> eval_times;
  double ref_dt = 0.0;
  std::string quantity;
  fs::path out = "radau-ep-out";
  fs::path cache = "radau-ep-cache";
  int repeats = 1;
  std::vector<double> tolerances = {1e-3, 1e-4};
  int be_extra = 2;
  json custom = json::array();
};

MaterialParams material_from_json(const json& j, const MaterialParams& base) {
  auto get = [&](const char* k, double d) { return j.contains(k) ? j.at(k).get<double>() : d; };
  return MaterialParams(get("E", base.E), get("nu", base.nu), get("sigma_Y", base.sigma_Y),
                        get("sigma_inf_minus_Y", base.sigma_inf_minus_Y), get("H", base.H),
                        get("delta", base.delta));
}

/// Built-in scenario or a custom one from the config ("base" plus overrides).
Scenario resolve_scenario(const std::string& name, const RunConfig& c) {
  for (const auto& j : c.custom) {
    if (j.value("name", "") != name) continue;
    Scenario sc = find_scenario(j.at("base").get<std::string>());
    sc.name = name;
    if (j.contains("material")) sc.params = material_from_json(j.at("material"), sc.params);
    if (j.contains("eval_times")) sc.eval_times = j.at("eval_times").get<std::vector<double>>();
    if (j.contains("dts")) sc.dts = j.at("dts").get<std::vector<double>>();
    if (j.contains("ref_dt")) sc.ref_dt = j.at("ref_dt").get<double>();
    return sc;
  }
  return find_scenario(name);
}

Scenario configured_scenario(const std::string& name, const RunConfig& c) {
  Scenario sc = resolve_scenario(name, c);
  if (!c.dts.empty()) sc.dts = c.dts;
  if (!c.eval_times.empty()) sc.eval_times = c.eval_times;
  if (c.ref_dt > 0.0) sc.ref_dt = c.ref_dt;
  for (double dt : sc.dts) eval_steps(sc.eval_times, dt);
  eval_steps(sc.eval_times, sc.ref_dt);
  return sc;
}

void apply_config_file(const fs::path& file, RunConfig& c) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config " + file.string() + ": " + e.what());
  }
  try {
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      c.scenarios = s.is_array() ? s.get<std::vector<std::string>>()
                                 : std::vector<std::string>{s.get<std::string>()};
    }
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("stages")) c.stages = j.at("stages").get<int>();
    if (j.contains("dts")) c.dts = j.at("dts").get<std::vector<double>>();
    if (j.contains("eval_times")) c.eval_times = j.at("eval_times").get<std::vector<double>>();
    if (j.contains("ref_dt")) c.ref_dt = j.at("ref_dt").get<double>();
    if (j.contains("quantity")) c.quantity = j.at("quantity").get<std::string>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("cache")) c.cache = j.at("cache").get<std::string>();
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
    if (j.contains("be_extra")) c.be_extra = j.at("be_extra").get<int>();
    if (j.contains("tolerances")) c.tolerances = j.at("tolerances").get<std::vector<double>>();
    if (j.contains("scenarios")) c.custom = j.at("scenarios");
  } catch (const json::exception& e) {
    throw UsageError("config " + file.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------ outputs

std::string number(double v) { return std::isfinite(v) ? fmt17(v) : "nan"; }

std::string report_file(const ConvergenceReport& r) {
  return r.scenario + "__" + r.method + "-s" + std::to_string(r.stages) + "__" +
         to_string(r.quantity) + "__t" + fmt17(r.eval_time) + ".csv";
}

std::string report_csv(const ConvergenceReport& r) {
  std::string s = "dt,error\n";
  for (const auto& row : r.rows) s += number(row.dt) + "," + number(row.error) + "\n";
  return s;
}

std::string summary_csv(const std::vector<ConvergenceReport>& reps) {
  std::string s = "scenario,method,stages,quantity,eval_time,order,n_points,n_excluded\n";
  for (const auto& r : reps) {
    s += r.scenario + "," + r.method + "," + std::to_string(r.stages) + "," +
         to_string(r.quantity) + "," + number(r.eval_time) + "," +
         (r.fit ? number(r.fit->order) : "nan") + "," + std::to_string(r.n_points) + "," +
         std::to_string(r.fit ? r.fit->n_excluded : static_cast<int>(r.rows.size())) + "\n";
  }
  return s;
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json params_json(const MaterialParams& p) {
  return {{"E", p.E}, {"nu", p.nu}, {"sigma_Y", p.sigma_Y},
          {"sigma_inf_minus_Y", p.sigma_inf_minus_Y}, {"H", p.H}, {"delta", p.delta}};
}

// ---------------------------------------------------------------- commands

struct Study {
  Scenario sc;
  Trajectory ref;
  ReferenceInfo info;
};

std::vector<Study> prepare(const RunConfig& c) {
  if (c.scenarios.empty()) throw UsageError("no scenario given (--scenario)");
  std::vector<Study> out;
  for (const auto& name : c.scenarios) {
    Study st;
    st.sc = configured_scenario(name, c);
    out.push_back(std::move(st));
  }
  parallel_for(out.size(), worker_limit(), [&](std::size_t i) {
    out[i].ref = reference_solution(out[i].sc, c.cache, &out[i].info);
  });
  return out;
}

std::vector<Method> methods_of(const RunConfig& c) {
  if (c.methods.empty()) throw UsageError("empty method list (--methods)");
  std::vector<Method> ms;
  for (const auto& l : c.methods) ms.push_back(make_method(l, c.stages));
  return ms;
}

int cmd_run(const RunConfig& c) {
  const auto methods = methods_of(c);
  auto studies = prepare(c);
  struct Task {
    std::size_t study;
    Method m;
    std::vector<ConvergenceReport> reps;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < studies.size(); ++i)
    for (const auto& m : methods) tasks.push_back({i, m, {}});
  parallel_for(tasks.size(), worker_limit(), [&](std::size_t k) {
    Task& t = tasks[k];
    const Scenario& sc = studies[t.study].sc;
    RunOptions ro;
    ro.timing_repeats = c.repeats;
    const Quantity q = parse_quantity(c.quantity.empty() ? sc.quantity : c.quantity);
    t.reps = convergence_study(sc, t.m, studies[t.study].ref, q, sc.dts, ro);
  });

  std::vector<ConvergenceReport> all;
  json runs = json::array();
  for (const auto& t : tasks)
    for (const auto& r : t.reps) {
      write_atomic(c.out / report_file(r), report_csv(r));
      json wall = json::array();
      for (const auto& row : r.rows) wall.push_back({{"dt", row.dt}, {"wall_seconds", row.wall_seconds}});
      runs.push_back({{"file", report_file(r)}, {"timing", wall}});
      all.push_back(r);
    }
  write_atomic(c.out / "summary.csv", summary_csv(all));

  json refs = json::array();
  for (const auto& s : studies)
    refs.push_back({{"scenario", s.sc.name},
                    {"key", reference_key(s.sc)},
                    {"hash", s.info.hash},
                    {"file", s.info.path.string()},
                    {"from_cache", s.info.from_cache},
                    {"wall_seconds", s.info.wall_seconds},
                    {"params", params_json(s.sc.params)},
                    {"eval_times", s.sc.eval_times},
                    {"dts", s.sc.dts},
                    {"ref_dt", s.sc.ref_dt},
                    {"ref_method", s.sc.ref_method},
                    {"ref_stages", s.sc.ref_stages}});
  const json manifest = {{"tool", "radau-ep"},
                         {"version", kVersion},
                         {"created", timestamp()},
                         {"command", "run"},
                         {"methods", c.methods},
                         {"stages", c.stages},
                         {"repeats", c.repeats},
                         {"references", refs},
                         {"reports", runs}};
  write_atomic(c.out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << summary_csv(all);
  return 0;
}

int cmd_speedup(const RunConfig& c) {
  const auto methods = methods_of(c);
  auto studies = prepare(c);
  const Method be = make_method("BE", 1);
  std::string csv = "scenario,eval_time,method,stages,tolerance,time_be,time_method,speedup\n";
  json rows = json::array();
  for (const auto& st : studies) {
    RunOptions ro;
    ro.timing_repeats = c.repeats;
    const Quantity q = parse_quantity(c.quantity.empty() ? st.sc.quantity : c.quantity);
    // Sequential on purpose: concurrent runs would distort wall times.
    auto be_reps = convergence_study(st.sc, be, st.ref, q, st.sc.dts, ro);
    // BE is usually the one that cannot reach the tightest tolerance on the
    // shared ladder; give it up to be_extra more halvings.
    const double tightest = *std::min_element(c.tolerances.begin(), c.tolerances.end());
    for (int extra = 0; extra < c.be_extra; ++extra) {
      bool reached = true;
      for (const auto& r : be_reps) reached = reached && time_to_tolerance(r.rows, tightest);
      if (reached) break;
      const double dt = be_reps[0].rows.back().dt / 2;
      const auto more = convergence_study(st.sc, be, st.ref, q, {dt}, ro);
      for (std::size_t k = 0; k < be_reps.size(); ++k) {
        be_reps[k].rows.push_back(more[k].rows[0]);
        try {
          be_reps[k].fit = fit_order(be_reps[k].error_rows());
        } catch (const InsufficientData&) {
          be_reps[k].fit.reset();
        }
      }
    }
    for (const auto& m : methods) {
      const auto reps = convergence_study(st.sc, m, st.ref, q, st.sc.dts, ro);
      for (std::size_t k = 0; k < reps.size(); ++k)
        for (double tol : c.tolerances) {
          const auto tb = time_to_tolerance(be_reps[k].rows, tol);
          const auto tm = time_to_tolerance(reps[k].rows, tol);
          const auto su = speedup(be_reps[k], reps[k], tol);
          auto cell = [](const std::optional<double>& v) {
            return v ? number(*v) : std::string("unreachable");
          };
          csv += st.sc.name + "," + number(reps[k].eval_time) + "," + m.label + "," +
                 std::to_string(m.s) + "," + number(tol) + "," + cell(tb) + "," + cell(tm) +
                 "," + cell(su) + "\n";
        }
      for (const auto& r : reps) write_atomic(c.out / report_file(r), report_csv(r));
    }
    for (const auto& r : be_reps) write_atomic(c.out / report_file(r), report_csv(r));
  }
  write_atomic(c.out / "speedup.csv", csv);
  const json manifest = {{"tool", "radau-ep"},         {"version", kVersion},
                         {"created", timestamp()},     {"command", "speedup"},
                         {"methods", c.methods},       {"stages", c.stages},
                         {"repeats", c.repeats},       {"tolerances", c.tolerances}};
  write_atomic(c.out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

/// Per-step, per-point dump of strains, plastic strains, stresses and alpha.
int cmd_trace(const RunConfig& c, double dt, const std::string& file) {
  if (c.scenarios.size() != 1) throw UsageError("trace takes exactly one --scenario");
  if (c.methods.size() != 1) throw UsageError("trace takes exactly one method");
  if (!(dt > 0.0)) throw UsageError("trace needs --dt > 0");
  Scenario sc = configured_scenario(c.scenarios[0], c);
  const Method m = make_method(c.methods[0], c.stages);
  const long n = std::lround(sc.t_end() / dt);
  sc.eval_times.clear();
  for (long k = 1; k <= n; ++k) sc.eval_times.push_back(k * dt);
  const Trajectory tr = run_scenario(sc, m, dt);
  std::string csv = "time,point,E_xx,E_yy,E_zz,E_xy,E_yz,E_zx,Ep_xx,Ep_yy,Ep_zz,Ep_xy,Ep_yz,Ep_zx,"
                    "S_xx,S_yy,S_zz,S_xy,S_yz,S_zx,alpha\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    for (std::size_t i = 0; i < tr.samples[k].size(); ++i) {
      const Sample& s = tr.samples[k][i];
      csv += number(tr.times[k]) + "," + std::to_string(i);
      for (const SymTensor2* t : {&s.E, &s.Ep, &s.S})
        for (int j = 0; j < 6; ++j) csv += "," + number((*t)[j]);
      csv += "," + number(s.alpha) + "\n";
    }
  if (file.empty() || file == "-")
    std::cout << csv;
  else
    write_atomic(file, csv);
  return 0;
}

int cmd_mesh(const RunConfig& c, const std::string& file) {
  if (c.scenarios.size() != 1) throw UsageError("mesh takes exactly one --scenario");
  const Scenario sc = resolve_scenario(c.scenarios[0], c);
  if (sc.material_point) throw UsageError(sc.name + " is a material-point scenario");
  const FemSolver solver(sc.mesh(), sc.params, radau_iia(1));
  std::ostringstream os;
  solver.write_mesh(os);
  if (file.empty() || file == "-")
    std::cout << os.str();
  else
    write_atomic(file, os.str());
  return 0;
}

int cmd_list() {
  std::cout << "scenarios:\n";
  for (const auto& sc : builtin_scenarios()) {
    std::cout << "  " << sc.name << (sc.material_point ? " (material point)" : " (fem)")
              << "  eval t =";
    for (double t : sc.eval_times) std::cout << ' ' << t;
    std::cout << "  ref dt = " << sc.ref_dt << "  quantity = " << sc.quantity << '\n';
  }
  std::cout << "methods:\n";
  for (const auto& l : method_labels()) std::cout << "  " << l << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radau IIa elasto-plasticity convergence studies"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_file;
  std::vector<std::string> scen, meths, dts, evals, tols;
  double dt = 0.0;
  std::string file;

  auto add_common = [&](CLI::App* sub, bool ladder) {
    sub->add_option("--config", config_file, "JSON configuration file");
    sub->add_option("--scenario", scen, "Scenario name(s), comma separated");
    sub->add_option("--methods,--method", meths, "Method labels, comma separated");
    sub->add_option("--stages", cfg.stages, "Radau IIa stage count (1-3)");
    sub->add_option("--eval-times", evals, "Evaluation times, comma separated");
    if (ladder) {
      sub->add_option("--dts", dts, "Step size ladder, comma separated");
      sub->add_option("--ref-dt", cfg.ref_dt, "Reference step size");
      sub->add_option("--quantity", cfg.quantity, "Error quantity: E, Ep, S or Ep_zz");
      sub->add_option("--out", cfg.out, "Output directory");
      sub->add_option("--cache", cfg.cache, "Reference cache directory");
      sub->add_option("--repeats", cfg.repeats, "Timing repetitions per step size (median)");
    }
  };
  CLI::App* run = app.add_subcommand("run", "Convergence study over a step size ladder");
  add_common(run, true);
  CLI::App* sp = app.add_subcommand("speedup", "Wall-time speed-up against Backward Euler");
  add_common(sp, true);
  sp->add_option("--tol", tols, "Error tolerances, comma separated");
  sp->add_option("--be-extra", cfg.be_extra, "Extra BE halvings allowed to reach the tolerance");
  CLI::App* trace = app.add_subcommand("trace", "Per-step dump of every integration point");
  add_common(trace, false);
  trace->add_option("--dt", dt, "Step size")->required();
  trace->add_option("--out", file, "Output CSV (default stdout)");
  CLI::App* mesh = app.add_subcommand("mesh", "Write a scenario mesh");
  mesh->add_option("--config", config_file, "JSON configuration file");
  mesh->add_option("--scenario", scen, "Scenario name")->required();
  mesh->add_option("--out", file, "Output file (default stdout)");
  CLI::App* list = app.add_subcommand("list", "List scenarios and methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    // Flags override the configuration file.
    RunConfig flags = cfg;
    if (!config_file.empty()) {
      apply_config_file(config_file, cfg);
      if (run->count("--stages") || sp->count("--stages") || trace->count("--stages"))
        cfg.stages = flags.stages;
      for (CLI::App* sub : {run, sp}) {
        if (sub->count("--ref-dt")) cfg.ref_dt = flags.ref_dt;
        if (sub->count("--quantity")) cfg.quantity = flags.quantity;
        if (sub->count("--out")) cfg.out = flags.out;
        if (sub->count("--cache")) cfg.cache = flags.cache;
        if (sub->count("--repeats")) cfg.repeats = flags.repeats;
      }
      if (sp->count("--be-extra")) cfg.be_extra = flags.be_extra;
    }
    if (!scen.empty()) cfg.scenarios = split_list(scen);
    if (!meths.empty()) cfg.methods = split_list(meths);
    if (!dts.empty()) cfg.dts = parse_doubles(dts);
    if (!evals.empty()) cfg.eval_times = parse_doubles(evals);
    if (!tols.empty()) cfg.tolerances = parse_doubles(tols);
    if (cfg.repeats < 1) throw UsageError("--repeats must be at least 1");
    if (cfg.be_extra < 0) throw UsageError("--be-extra must not be negative");
    if (cfg.tolerances.empty()) throw UsageError("empty tolerance list (--tol)");

    if (*list) return cmd_list();
    if (*mesh) return cmd_mesh(cfg, file);
    if (*trace) return cmd_trace(cfg, dt, file);
    if (*sp) {
      if (sp->count("--repeats") == 0 && config_file.empty()) cfg.repeats = 3;
      return cmd_speedup(cfg);
    }
    return cmd_run(cfg);
  } catch (const UsageError& e) {
    std::cerr << "radau-ep: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "radau-ep: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "radau-ep: run failed: " << e.what() << '\n';
    return kExitRun;
  }
}
