#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "scenarios.hpp"
#include "tensor.hpp"

namespace radau_ep {

enum class Quantity { E, Ep, S, Ep_zz };

inline Quantity parse_quantity(const std::string& s) {
  if (s == "E") return Quantity::E;
  if (s == "Ep") return Quantity::Ep;
  if (s == "S") return Quantity::S;
  if (s == "Ep_zz") return Quantity::Ep_zz;
  throw InvalidArgument("unknown quantity '" + s + "' (E|Ep|S|Ep_zz)");
}

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::E: return "E";
    case Quantity::Ep: return "Ep";
    case Quantity::S: return "S";
    case Quantity::Ep_zz: return "Ep_zz";
  }
  return "?";
}

/// Absolute and reference magnitude of the deviation at one point.
inline std::pair<double, double> point_error(const Sample& a, const Sample& ref, Quantity q) {
  switch (q) {
    case Quantity::E: return {norm(a.E - ref.E), norm(ref.E)};
    case Quantity::Ep: return {norm(a.Ep - ref.Ep), norm(ref.Ep)};
    case Quantity::S: return {norm(a.S - ref.S), norm(ref.S)};
    case Quantity::Ep_zz: return {std::abs(a.Ep[ZZ] - ref.Ep[ZZ]), std::abs(ref.Ep[ZZ])};
  }
  return {0.0, 0.0};
}

struct ErrorValue {
  double value = 0.0;
  int n_points = 0;    // plastic points entering the mean
  int n_excluded = 0;  // plastic points with a zero reference tensor
};

/// Mean relative error over the points that are plastic (alpha > 0) in the
/// reference at this time.
inline ErrorValue relative_error_detail(const std::vector<Sample>& run,
                                        const std::vector<Sample>& ref, Quantity q) {
  if (run.size() != ref.size())
    throw InvalidArgument("relative_error: point count mismatch");
  ErrorValue ev;
  double sum = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!(ref[i].alpha > 0.0)) continue;
    const auto [d, r] = point_error(run[i], ref[i], q);
    if (r == 0.0) {
      ++ev.n_excluded;
      continue;
    }
    sum += d / r;
    ++ev.n_points;
  }
  ev.value = ev.n_points > 0 ? sum / ev.n_points : 0.0;
  return ev;
}

inline double relative_error(const std::vector<Sample>& run, const std::vector<Sample>& ref,
                             Quantity q) {
  return relative_error_detail(run, ref, q).value;
}

inline constexpr double kPlateau = 1e-12;

struct OrderFit {
  double order = 0.0;
  double intercept = 0.0;
  int n_used = 0;
  int n_excluded = 0;
};

/// Least-squares slope of log10 e over log10 dt, dropping plateau rows.
inline OrderFit fit_order(const std::vector<std::pair<double, double>>& rows) {
  std::vector<std::pair<double, double>> pts;
  OrderFit f;
  for (const auto& [dt, e] : rows) {
    if (std::isfinite(e) && e >= kPlateau && dt > 0.0)
      pts.emplace_back(std::log10(dt), std::log10(e));
    else
      ++f.n_excluded;
  }
  if (pts.size() < 3)
    throw InsufficientData("fit_order needs at least 3 rows above the plateau, got " +
                           std::to_string(pts.size()));
  double mx = 0, my = 0;
  for (const auto& [x, y] : pts) { mx += x; my += y; }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw InsufficientData("fit_order: all step sizes identical");
  f.order = sxy / sxx;
  f.intercept = my - f.order * mx;
  f.n_used = static_cast<int>(pts.size());
  return f;
}

struct ConvergenceRow {
  double dt = 0.0;
  double error = 0.0;
  double wall_seconds = 0.0;
};

struct ConvergenceReport {
  std::string scenario;
  std::string method;
  int stages = 0;
  Quantity quantity = Quantity::S;
  double eval_time = 0.0;
  std::vector<ConvergenceRow> rows;
  std::optional<OrderFit> fit;
  int n_points = 0;

  std::vector<std::pair<double, double>> error_rows() const {
    std::vector<std::pair<double, double>> r;
    for (const auto& row : rows) r.emplace_back(row.dt, row.error);
    return r;
  }
};

/// Wall time a method needs to reach err_tol, interpolated log-log along its
/// sweep. nullopt when the sweep never reaches the tolerance.
inline std::optional<double> time_to_tolerance(const std::vector<ConvergenceRow>& rows,
                                               double err_tol) {
  std::vector<ConvergenceRow> r = rows;
  std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.dt > b.dt; });
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i].error <= err_tol)) continue;
    if (i == 0) return r[0].wall_seconds;
    const auto& a = r[i - 1];
    const auto& b = r[i];
    const double la = std::log(a.error), lb = std::log(b.error);
    const double w = lb == la ? 1.0 : (std::log(err_tol) - la) / (lb - la);
    return std::exp(std::log(a.wall_seconds) + w * (std::log(b.wall_seconds) - std::log(a.wall_seconds)));
  }
  return std::nullopt;
}

/// time(BE) / time(method) at the tolerance, nullopt if either is unreachable.
inline std::optional<double> speedup(const ConvergenceReport& be, const ConvergenceReport& m,
                                     double err_tol) {
  const auto tb = time_to_tolerance(be.rows, err_tol);
  const auto tm = time_to_tolerance(m.rows, err_tol);
  if (!tb || !tm || *tm <= 0.0) return std::nullopt;
  return *tb / *tm;
}

// --------------------------------------------------------- reference cache

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Canonical description of everything the reference depends on.
inline std::string reference_key(const Scenario& sc) {
  std::ostringstream os;
  const MaterialParams& p = sc.params;
  os << "v1|" << sc.name << '|' << (sc.material_point ? "mp" : "fem") << '|'
     << fmt17(p.E) << ',' << fmt17(p.nu) << ',' << fmt17(p.sigma_Y) << ','
     << fmt17(p.sigma_inf_minus_Y) << ',' << fmt17(p.H) << ',' << fmt17(p.delta) << '|';
  for (double t : sc.eval_times) os << fmt17(t) << ',';
  os << '|' << fmt17(sc.ref_dt) << '|' << sc.ref_method << '|' << sc.ref_stages;
  if (!sc.material_point) {
    const Mesh m = sc.mesh();
    os << '|' << m.nodes.size() << '|' << m.elements.size() << '|' << m.constraints.size();
    double probe = 0.0;
    for (const auto& c : m.constraints) probe += c.dof * c.value(1.0);
    for (const auto& x : m.nodes) probe += x.sum();
    os << '|' << fmt17(probe);
  } else {
    os << '|' << fmt17(norm(sc.strain(1.0))) << '|' << fmt17(sc.coupling.sum());
  }
  return os.str();
}

inline std::string reference_hash(const Scenario& sc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(reference_key(sc))));
  return buf;
}

inline void write_trajectory(std::ostream& os, const std::string& key, const Trajectory& tr) {
  os << "radau-ep-reference " << key << '\n';
  os << std::setprecision(17);
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    os << "t " << tr.times[k] << ' ' << tr.samples[k].size() << '\n';
    for (const auto& s : tr.samples[k]) {
      for (int c = 0; c < 6; ++c) os << s.E[c] << ' ';
      for (int c = 0; c < 6; ++c) os << s.Ep[c] << ' ';
      for (int c = 0; c < 6; ++c) os << s.S[c] << ' ';
      os << s.alpha << '\n';
    }
  }
}

/// Parses a cached reference; nullopt on key mismatch or malformed data.
inline std::optional<Trajectory> read_trajectory(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line) || line != "radau-ep-reference " + key) return std::nullopt;
  Trajectory tr;
  std::string tag;
  while (is >> tag) {
    if (tag != "t") return std::nullopt;
    double t;
    std::size_t n;
    if (!(is >> t >> n)) return std::nullopt;
    tr.times.push_back(t);
    std::vector<Sample> pts(n);
    for (auto& s : pts) {
      for (int c = 0; c < 6; ++c) is >> s.E[c];
      for (int c = 0; c < 6; ++c) is >> s.Ep[c];
      for (int c = 0; c < 6; ++c) is >> s.S[c];
      is >> s.alpha;
    }
    if (!is) return std::nullopt;
    tr.samples.push_back(std::move(pts));
  }
  return tr;
}

struct ReferenceInfo {
  std::string hash;
  std::filesystem::path path;
  bool from_cache = false;
  double wall_seconds = 0.0;
};

/// Loads the reference run for a scenario from cache_dir or computes and
/// stores it (write to a temporary file, then rename).
inline Trajectory reference_solution(const Scenario& sc, const std::filesystem::path& cache_dir,
                                     ReferenceInfo* info = nullptr) {
  const std::string key = reference_key(sc);
  const std::string hash = reference_hash(sc);
  const auto path = cache_dir / (sc.name + "-" + hash + ".ref");
  if (info) {
    info->hash = hash;
    info->path = path;
  }
  if (!cache_dir.empty()) {
    std::ifstream in(path);
    if (in) {
      if (auto tr = read_trajectory(in, key); tr && tr->times == sc.eval_times) {
        if (info) info->from_cache = true;
        return *tr;
      }
    }
  }
  const Trajectory tr = run_scenario(sc, make_method(sc.ref_method, sc.ref_stages), sc.ref_dt);
  if (info) info->wall_seconds = tr.wall_seconds;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp);
      write_trajectory(out, key, tr);
    }
    std::filesystem::rename(tmp, path);
  }
  return tr;
}

/// Runs a method over the scenario's dt ladder and builds one report per
/// evaluation time.
inline std::vector<ConvergenceReport> convergence_study(const Scenario& sc, const Method& m,
                                                        const Trajectory& ref, Quantity q,
                                                        const std::vector<double>& dts,
                                                        const RunOptions& ro = {}) {
  std::vector<ConvergenceReport> reps(sc.eval_times.size());
  for (std::size_t k = 0; k < reps.size(); ++k) {
    reps[k].scenario = sc.name;
    reps[k].method = m.label;
    reps[k].stages = m.s;
    reps[k].quantity = q;
    reps[k].eval_time = sc.eval_times[k];
  }
  for (double dt : dts) {
    const Trajectory tr = run_scenario(sc, m, dt, ro);
    std::vector<double> walls{tr.wall_seconds};
    for (int r = 1; r < ro.timing_repeats; ++r) walls.push_back(run_scenario(sc, m, dt, ro).wall_seconds);
    std::nth_element(walls.begin(), walls.begin() + walls.size() / 2, walls.end());
    const double wall = walls[walls.size() / 2];
    for (std::size_t k = 0; k < reps.size(); ++k) {
      const ErrorValue ev = relative_error_detail(tr.samples[k], ref.samples[k], q);
      reps[k].rows.push_back({dt, ev.value, wall});
      reps[k].n_points = ev.n_points;
    }
  }
  for (auto& r : reps) {
    try {
      r.fit = fit_order(r.error_rows());
    } catch (const InsufficientData&) {
      r.fit.reset();
    }
  }
  return reps;
}

}  // namespace radau_ep
