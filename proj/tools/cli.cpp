#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <variant>

#include "etcpn/dsl.hpp"
#include "etcpn/lmi.hpp"
#include "etcpn/metrics.hpp"
#include "etcpn/pipeline.hpp"
#include "svg.hpp"

namespace etcpn::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string Table::csv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

long Table::find(std::string_view name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<long>(i);
  return -1;
}

std::vector<double> Table::column(std::string_view name) const {
  const long c = find(name);
  if (c < 0) throw InputError("missing column " + std::string(name));
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const std::string& cell = r[static_cast<size_t>(c)];
    double v = std::numeric_limits<double>::quiet_NaN();
    if (!cell.empty()) {
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw InputError("column " + std::string(name) + ": bad number '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

Table parse_csv(std::string_view text) {
  Table t;
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw InputError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " cells");
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InputError("empty csv");
  return t;
}

namespace {

std::vector<std::string> numbered(const std::string& stem, Index count, const std::string& suffix = "") {
  std::vector<std::string> out;
  if (count == 1) {
    out.push_back(stem + suffix);
    return out;
  }
  for (Index i = 0; i < count; ++i) out.push_back(stem + std::to_string(i + 1) + suffix);
  return out;
}

void append(std::vector<std::string>& row, const Eigen::VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i) row.push_back(format_double(v(i)));
}

void append_blank(std::vector<std::string>& row, Index count) {
  for (Index i = 0; i < count; ++i) row.emplace_back();
}

}  // namespace

Table trajectory_table(const HybridModel& model, const std::vector<long>& mode_ids,
                       const Trajectory& traj, const ResidualTrace* residuals,
                       const std::vector<std::vector<bool>>* alarms) {
  const Index n = model.n, p = model.p, r = model.r;
  Table t;
  auto add = [&t](const std::vector<std::string>& names) {
    t.header.insert(t.header.end(), names.begin(), names.end());
  };
  add({"k", "mode_true", "mode_est"});
  add(numbered("u", p));
  for (Index i = 0; i < n; ++i) t.header.push_back("x" + std::to_string(i + 1));
  for (Index i = 0; i < n; ++i) t.header.push_back("x" + std::to_string(i + 1) + "_hat");
  add(numbered("y", r));
  add(numbered("y", r, "_hat"));
  for (Index i = 0; i < n; ++i) t.header.push_back("r_x" + std::to_string(i + 1));
  add(numbered("r_y", r));
  add({"r_psi", "fault_active", "alarm_ocsvm", "alarm_svdd", "alarm_ee"});

  if (residuals && residuals->size() != traj.size())
    throw DimensionError("residual trace length differs from the trajectory");
  if (alarms)
    for (const auto& a : *alarms)
      if (static_cast<long>(a.size()) != traj.size())
        throw DimensionError("alarm sequence length differs from the trajectory");

  auto mode_id = [&mode_ids](Index q) {
    return q >= 0 && q < static_cast<Index>(mode_ids.size()) ? mode_ids[static_cast<size_t>(q)]
                                                             : static_cast<long>(q + 1);
  };
  for (long k = 0; k < traj.size(); ++k) {
    const StepRecord& s = traj.steps[static_cast<size_t>(k)];
    const ResidualStep* rs = residuals ? &residuals->steps[static_cast<size_t>(k)] : nullptr;
    std::vector<std::string> row;
    row.reserve(t.header.size());
    row.push_back(std::to_string(s.k));
    row.push_back(std::to_string(mode_id(s.mode)));
    row.push_back(rs ? std::to_string(mode_id(rs->mode_est)) : std::string());
    append(row, s.u);
    append(row, s.x);
    if (rs) append(row, rs->xhat); else append_blank(row, n);
    append(row, s.y);
    if (rs) {
      append(row, rs->yhat);
      append(row, rs->rx);
      append(row, rs->ry);
      row.push_back(format_double(rs->rpsi_norm));
    } else {
      append_blank(row, r + n + r + 1);
    }
    row.push_back(s.fault_active ? "1" : "0");
    for (size_t m = 0; m < 3; ++m) {
      if (alarms && m < alarms->size())
        row.push_back((*alarms)[m][static_cast<size_t>(k)] ? "1" : "0");
      else
        row.emplace_back();
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<GainEntry> parse_gains(std::string_view text) {
  std::vector<GainEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::istringstream ls(line.substr(first));
    std::string kw, id, name, eq;
    ls >> kw >> id >> name >> eq;
    auto fail = [line_no](const std::string& what) {
      return InputError("gains line " + std::to_string(line_no) + ": " + what);
    };
    if (kw != "gains" || name != "L" || eq != "=") throw fail("expected 'gains <mode> L = [..]'");
    GainEntry g;
    const auto res = std::from_chars(id.data(), id.data() + id.size(), g.mode);
    if (res.ec != std::errc() || res.ptr != id.data() + id.size()) throw fail("bad mode id '" + id + "'");
    std::string rest;
    std::getline(ls, rest);
    auto m = dsl::parse_matrix(rest);
    if (!m) throw fail("bad matrix literal");
    g.L = std::move(*m);
    out.push_back(std::move(g));
  }
  return out;
}

std::string format_gains(const std::vector<GainEntry>& gains) {
  std::string out;
  for (const auto& g : gains) out += "gains " + std::to_string(g.mode) + " L = " + dsl::format_matrix(g.L) + "\n";
  return out;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("ETCPN_SEED");
  if (!raw || !*raw) return std::nullopt;
  const std::string_view s(raw);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("ETCPN_SEED must be an unsigned integer, got '" + std::string(s) + "'");
  return v;
}

namespace {

struct LoadedModel {
  dsl::ModelDocument doc;
  HybridModel model;
  std::vector<long> ids;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out) throw InputError("cannot write " + path.string());
}

LoadedModel load_model(const std::string& path) {
  dsl::ParseResult pr = dsl::parse_file(path);
  if (!pr.ok()) {
    std::string msg = pr.message();
    while (!msg.empty() && msg.back() == '\n') msg.pop_back();
    throw InputError(path + ": " + msg);
  }
  LoadedModel lm{std::move(*pr.document), {}, {}};
  lm.model = dsl::to_hybrid_model(lm.doc);
  for (const auto& m : lm.doc.modes) lm.ids.push_back(m.id);
  return lm;
}

ObserverGains to_observer_gains(const LoadedModel& lm, const std::vector<GainEntry>& entries) {
  const Index q = lm.model.num_modes();
  ObserverGains gains;
  gains.L.assign(static_cast<size_t>(q), Eigen::MatrixXd());
  for (const auto& g : entries) {
    const Index idx = lm.doc.mode_index(g.mode);
    if (idx < 0) throw ModelError("gains for unknown mode " + std::to_string(g.mode));
    if (gains.L[static_cast<size_t>(idx)].size() != 0)
      throw ModelError("duplicate gains for mode " + std::to_string(g.mode));
    if (g.L.rows() != lm.model.n || g.L.cols() != lm.model.r)
      throw DimensionError("gain of mode " + std::to_string(g.mode) + " must be n x r");
    gains.L[static_cast<size_t>(idx)] = g.L;
  }
  for (Index i = 0; i < q; ++i)
    if (gains.L[static_cast<size_t>(i)].size() == 0 && (lm.model.n > 0 && lm.model.r > 0))
      throw ModelError("missing gains for mode " + std::to_string(lm.ids[static_cast<size_t>(i)]));
  return gains;
}

std::vector<GainEntry> model_gain_entries(const LoadedModel& lm) {
  std::vector<GainEntry> out;
  for (const auto& g : lm.doc.gains) out.push_back({g.mode, g.L});
  return out;
}

InputSignal model_input(const LoadedModel& lm) { return lm.doc.input.value_or(InputSignal{}); }

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (auto env = seed_from_env()) return *env;
  return 42;
}

void print_verification(std::ostream& out, const VerificationReport& rep, const std::vector<long>& ids) {
  out << "verification: " << (rep.passed ? "pass" : "fail") << "\n";
  out << "  lyapunov matrices found: " << (rep.p_found ? "yes" : "no") << "\n";
  out << "  margin: " << format_double(rep.margin) << "\n";
  for (size_t q = 0; q < rep.spectral_radius.size(); ++q)
    out << "  spectral radius mode " << ids[q] << ": " << format_double(rep.spectral_radius[q]) << "\n";
  for (const auto& e : rep.edges)
    out << "  edge " << ids[static_cast<size_t>(e.from)] << " -> " << ids[static_cast<size_t>(e.to)]
        << ": max eigenvalue " << format_double(e.max_eigenvalue) << "\n";
}

// Solves the LMIs for the model; nullopt (with diagnostics on `out`) when infeasible.
std::optional<std::vector<GainEntry>> synthesize_gains(const LoadedModel& lm, const LmiOptions& opts,
                                                       std::ostream& out) {
  const TransitionGraph graph = TransitionGraph::complete(lm.model.num_modes());
  const LmiProblem problem = assemble(lm.model.modes, graph, opts);
  const auto result = solve_feasibility(problem, opts);
  if (const auto* inf = std::get_if<InfeasibilityReport>(&result)) {
    out << "infeasible: " << inf->reason << "\n";
    out << "  best margin: " << format_double(inf->best_margin) << " after " << inf->iterations
        << " iterations (eps " << format_double(opts.eps) << ")\n";
    for (size_t i = 0; i < inf->constraint_margins.size() && i < problem.constraints.size(); ++i)
      out << "  " << problem.constraints[i].label << ": " << format_double(inf->constraint_margins[i]) << "\n";
    return std::nullopt;
  }
  const auto& sol = std::get<LmiSolution>(result);
  out << "feasible: margin " << format_double(sol.margin) << " after " << sol.iterations << " iterations\n";
  std::vector<Eigen::MatrixXd> L;
  try {
    L = recover_gains(problem, sol);
  } catch (const RecoveryError& e) {
    out << "infeasible: gain recovery failed (" << e.what() << ", residual "
        << format_double(e.residual()) << ")\n";
    return std::nullopt;
  }
  std::vector<GainEntry> gains;
  for (size_t q = 0; q < L.size(); ++q) gains.push_back({lm.ids[q], L[q]});
  return gains;
}

struct SimulateArgs {
  std::string model;
  long horizon = 50;
  std::optional<std::uint64_t> seed;
  double noise = 0.01;
  std::optional<int> case_id;
  std::optional<double> magnitude;
  std::string out;
};

struct SynthesizeArgs {
  std::string model;
  double decay = 1.0;
  double eps = 1e-6;
  long max_iter = 50000;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verify_only = false;
  std::string gains;
  double eps_verify = 1e-8;
};

struct CaseArgs {
  int id = 1;
  std::string model;
  std::string out_dir = ".";
  bool no_detectors = false;
  std::optional<std::uint64_t> seed;
  double noise = 0.01;
  std::optional<double> magnitude;
  long horizon = 0;
  long train_horizon = 500;
  std::optional<double> nu;
  std::optional<double> gamma_ocsvm;
  std::optional<double> gamma_svdd;
  std::optional<double> contamination;
  std::string mode_source = "observer";
};

struct MetricsArgs {
  std::string alarms;
  std::optional<long> tp, fp, tn, fn;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.horizon < 0) throw InputError("--horizon must be nonnegative");
  if (!(a.noise >= 0.0)) throw InputError("--noise must be nonnegative");
  const LoadedModel lm = load_model(a.model);
  std::vector<FaultSpec> faults = a.case_id ? case_schedule(*a.case_id) : dsl::to_fault_specs(lm.doc);
  if (a.magnitude)
    for (auto& f : faults)
      if (f.kind != FaultKind::ModeBlocking) f.magnitude = Eigen::VectorXd::Constant(lm.model.mf, *a.magnitude);

  SimulationOptions sim;
  sim.horizon = a.horizon;
  sim.noise_std = a.noise;
  sim.seed = resolve_seed(a.seed);
  const Trajectory traj = simulate(lm.model, model_input(lm), faults, sim);

  std::optional<ResidualTrace> residuals;
  if (!lm.doc.gains.empty()) {
    const ObserverGains gains = to_observer_gains(lm, model_gain_entries(lm));
    residuals = generate_residuals(traj, gains, make_discrete_observer(lm.model), lm.model);
  }
  const std::string csv = trajectory_table(lm.model, lm.ids, traj, residuals ? &*residuals : nullptr).csv();
  if (a.out.empty()) out << csv;
  else write_file(a.out, csv);
  return kOk;
}

int cmd_verify(const LoadedModel& lm, const std::vector<GainEntry>& entries, const SynthesizeArgs& a,
               std::ostream& out) {
  const ObserverGains gains = to_observer_gains(lm, entries);
  VerifyOptions vo;
  vo.eps_verify = a.eps_verify;
  vo.max_iter = a.max_iter;
  vo.seed = resolve_seed(a.seed);
  const VerificationReport rep =
      verify_gains(lm.model.modes, gains.L, TransitionGraph::complete(lm.model.num_modes()), vo);
  print_verification(out, rep, lm.ids);
  return rep.passed ? kOk : kInfeasible;
}

std::vector<GainEntry> gains_for_verify(const LoadedModel& lm, const std::string& path) {
  if (!path.empty()) return parse_gains(read_file(path));
  if (lm.doc.gains.empty()) throw InputError("no gains: pass --gains or declare them in the model");
  return model_gain_entries(lm);
}

int cmd_synthesize(const SynthesizeArgs& a, std::ostream& out) {
  const LoadedModel lm = load_model(a.model);
  if (a.verify_only) {
    if (a.gains.empty()) throw InputError("--verify-only needs --gains");
    return cmd_verify(lm, gains_for_verify(lm, a.gains), a, out);
  }
  LmiOptions opts;
  opts.decay = a.decay;
  opts.eps = a.eps;
  opts.max_iter = a.max_iter;
  opts.seed = resolve_seed(a.seed);
  if (!(opts.decay > 0.0)) throw InputError("--decay must be positive");
  if (!(opts.eps > 0.0)) throw InputError("--eps must be positive");
  const auto gains = synthesize_gains(lm, opts, out);
  if (!gains) return kInfeasible;
  const std::string text = format_gains(*gains);
  out << text;
  const int code = cmd_verify(lm, *gains, a, out);
  if (!a.out.empty()) write_file(a.out, text);
  return code;
}

DetectorConfig detector_config(const LoadedModel& lm, const CaseArgs& a) {
  DetectorConfig cfg;
  for (const auto& d : lm.doc.detectors) {
    switch (d.kind) {
      case DetectorKind::OcSvm:
        if (d.nu) cfg.nu_ocsvm = *d.nu;
        cfg.gamma_ocsvm = d.gamma;
        break;
      case DetectorKind::Svdd:
        if (d.nu) cfg.nu_svdd = *d.nu;
        cfg.gamma_svdd = d.gamma;
        break;
      case DetectorKind::EllipticEnvelope:
        if (d.contamination) cfg.contamination = *d.contamination;
        break;
    }
  }
  if (a.nu) cfg.nu_ocsvm = cfg.nu_svdd = *a.nu;
  if (a.gamma_ocsvm) cfg.gamma_ocsvm = a.gamma_ocsvm;
  if (a.gamma_svdd) cfg.gamma_svdd = a.gamma_svdd;
  if (a.contamination) cfg.contamination = *a.contamination;
  return cfg;
}

int cmd_case(const CaseArgs& a, std::ostream& out) {
  if (a.id < 1 || a.id > 3) throw InputError("case id must be 1, 2 or 3");
  if (!(a.noise >= 0.0)) throw InputError("--noise must be nonnegative");
  const LoadedModel lm = load_model(a.model);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec || !fs::is_directory(a.out_dir)) throw InputError("cannot create output directory " + a.out_dir);

  ObserverGains gains;
  if (!lm.doc.gains.empty()) {
    gains = to_observer_gains(lm, model_gain_entries(lm));
  } else {
    LmiOptions opts;
    opts.seed = resolve_seed(a.seed);
    std::ostringstream diag;
    const auto synthesized = synthesize_gains(lm, opts, diag);
    if (!synthesized) {
      out << diag.str();
      return kInfeasible;
    }
    gains = to_observer_gains(lm, *synthesized);
  }

  CaseConfig cfg;
  cfg.case_id = a.id;
  cfg.horizon = a.horizon;
  cfg.train_horizon = a.train_horizon;
  cfg.seed = resolve_seed(a.seed);
  cfg.noise_std = a.noise;
  cfg.fault_magnitude = a.magnitude;
  cfg.run_detectors = !a.no_detectors;
  cfg.detectors = detector_config(lm, a);
  if (a.mode_source == "observer") cfg.mode_source = ModeSource::DiscreteObserver;
  else if (a.mode_source == "guards") cfg.mode_source = ModeSource::Guards;
  else throw InputError("--mode-source must be 'observer' or 'guards'");

  const CaseResult res = run_case(lm.model, gains, model_input(lm), cfg);
  const fs::path dir(a.out_dir);
  const std::string stem = "case" + std::to_string(a.id);
  const Table table = trajectory_table(lm.model, lm.ids, res.trajectory, &res.residuals,
                                       cfg.run_detectors ? &res.alarms : nullptr);
  write_file(dir / (stem + "_residuals.csv"), table.csv());
  if (!cfg.run_detectors) return kOk;

  Table alarms;
  alarms.header = {"k", "fault_active", "alarm_ocsvm", "alarm_svdd", "alarm_ee"};
  for (const auto& row : table.rows) {
    std::vector<std::string> r;
    for (const auto& name : alarms.header) r.push_back(row[static_cast<size_t>(table.find(name))]);
    alarms.rows.push_back(std::move(r));
  }
  write_file(dir / (stem + "_alarms.csv"), alarms.csv());
  write_file(dir / (stem + "_metrics.csv"), metrics_csv(res.rows));
  const std::string text = metrics_table(res.rows);
  write_file(dir / (stem + "_metrics.txt"), text);
  out << text;

  // Plots are drawn from the CSV table itself.
  const std::vector<double> k = table.column("k");
  std::vector<Series> states, resid, modes;
  for (Index i = 0; i < lm.model.n; ++i) {
    const std::string x = "x" + std::to_string(i + 1);
    states.push_back({x, table.column(x)});
    states.push_back({x + "_hat", table.column(x + "_hat")});
    resid.push_back({"r_" + x, table.column("r_" + x)});
  }
  for (const auto& name : numbered("r_y", lm.model.r)) resid.push_back({name, table.column(name)});
  resid.push_back({"r_psi", table.column("r_psi")});
  modes.push_back({"mode_true", table.column("mode_true")});
  modes.push_back({"mode_est", table.column("mode_est")});
  modes.push_back({"fault_active", table.column("fault_active")});
  write_file(dir / (stem + "_states.svg"), render_svg(stem + ": states and estimates", k, states));
  write_file(dir / (stem + "_residuals.svg"), render_svg(stem + ": residuals", k, resid));
  write_file(dir / (stem + "_modes.svg"), render_svg(stem + ": modes", k, modes, true));
  return kOk;
}

std::string method_name(const std::string& column) {
  if (column == "alarm_ocsvm") return "OC-SVM";
  if (column == "alarm_svdd") return "SVDD";
  if (column == "alarm_ee") return "EE";
  return column.substr(6);
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  std::vector<MetricRow> rows;
  const bool counts = a.tp || a.fp || a.tn || a.fn;
  if (counts == !a.alarms.empty()) throw InputError("pass either --alarms or --tp/--fp/--tn/--fn");
  if (counts) {
    if (!(a.tp && a.fp && a.tn && a.fn)) throw InputError("--tp, --fp, --tn and --fn go together");
    if (*a.tp < 0 || *a.fp < 0 || *a.tn < 0 || *a.fn < 0) throw InputError("counts must be nonnegative");
    rows.push_back({"counts", Confusion{*a.tp, *a.fp, *a.tn, *a.fn}});
  } else {
    const Table t = parse_csv(read_file(a.alarms));
    auto flags = [&t](const std::string& name) {
      std::vector<bool> out;
      for (double v : t.column(name)) {
        if (std::isnan(v)) throw InputError("column " + name + " has empty cells");
        if (v != 0.0 && v != 1.0) throw InputError("column " + name + " must hold 0/1");
        out.push_back(v == 1.0);
      }
      return out;
    };
    const std::vector<bool> truth = flags("fault_active");
    for (const auto& name : t.header)
      if (name.rfind("alarm_", 0) == 0) rows.push_back({method_name(name), evaluate(truth, flags(name))});
    if (rows.empty()) throw InputError(a.alarms + ": no alarm_* columns");
  }
  out << metrics_table(rows);
  if (!a.out.empty()) write_file(a.out, metrics_csv(rows));
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Switched ETCPN modelling, observer synthesis and fault detection", "etcpn"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a model and write the trajectory CSV");
  simulate_cmd->add_option("--model", sim.model, "Model file")->required();
  simulate_cmd->add_option("--horizon", sim.horizon, "Number of steps")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Noise seed (default 42 or ETCPN_SEED)");
  simulate_cmd->add_option("--noise", sim.noise, "Noise standard deviation")->capture_default_str();
  simulate_cmd->add_option("--case", sim.case_id, "Use a benchmark fault schedule instead of the model's");
  simulate_cmd->add_option("--magnitude", sim.magnitude, "Additive fault magnitude");
  simulate_cmd->add_option("--out", sim.out, "Output CSV (default stdout)");

  SynthesizeArgs syn;
  auto* synth_cmd = app.add_subcommand("synthesize", "Solve the observer LMIs and verify the gains");
  synth_cmd->add_option("--model", syn.model, "Model file")->required();
  synth_cmd->add_option("--decay", syn.decay, "Certified decay rate")->capture_default_str();
  synth_cmd->add_option("--eps", syn.eps, "LMI margin")->capture_default_str();
  synth_cmd->add_option("--max-iter", syn.max_iter, "Solver iteration limit")->capture_default_str();
  synth_cmd->add_option("--eps-verify", syn.eps_verify, "Verifier margin")->capture_default_str();
  synth_cmd->add_option("--seed", syn.seed, "Solver seed (default 42 or ETCPN_SEED)");
  synth_cmd->add_option("--out", syn.out, "Write the gains to this file");
  synth_cmd->add_flag("--verify-only", syn.verify_only, "Only verify the gains given by --gains");
  synth_cmd->add_option("--gains", syn.gains, "Gains file");

  SynthesizeArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Verify observer gains");
  verify_cmd->add_option("--model", ver.model, "Model file")->required();
  verify_cmd->add_option("--gains", ver.gains, "Gains file (default: the model's gains)");
  verify_cmd->add_option("--eps-verify", ver.eps_verify, "Verifier margin")->capture_default_str();
  verify_cmd->add_option("--max-iter", ver.max_iter, "Lyapunov search iteration limit")->capture_default_str();
  verify_cmd->add_option("--seed", ver.seed, "Search seed (default 42 or ETCPN_SEED)");

  CaseArgs cs;
  auto* case_cmd = app.add_subcommand("case", "Run a benchmark fault case");
  case_cmd->add_option("id", cs.id, "Case id (1, 2 or 3)")->required();
  case_cmd->add_option("--model", cs.model, "Model file")->required();
  case_cmd->add_option("--out-dir", cs.out_dir, "Output directory")->capture_default_str();
  case_cmd->add_flag("--no-detectors", cs.no_detectors, "Only write the residual CSV");
  case_cmd->add_option("--seed", cs.seed, "Seed (default 42 or ETCPN_SEED)");
  case_cmd->add_option("--noise", cs.noise, "Noise standard deviation")->capture_default_str();
  case_cmd->add_option("--magnitude", cs.magnitude, "Sensor fault magnitude");
  case_cmd->add_option("--horizon", cs.horizon, "Evaluation horizon (0: case default)");
  case_cmd->add_option("--train-horizon", cs.train_horizon, "Fault-free training steps")->capture_default_str();
  case_cmd->add_option("--nu", cs.nu, "nu of OC-SVM and SVDD");
  case_cmd->add_option("--gamma-ocsvm", cs.gamma_ocsvm, "OC-SVM RBF gamma");
  case_cmd->add_option("--gamma-svdd", cs.gamma_svdd, "SVDD RBF gamma");
  case_cmd->add_option("--contamination", cs.contamination, "Elliptic envelope contamination");
  case_cmd->add_option("--mode-source", cs.mode_source, "observer or guards")->capture_default_str();

  MetricsArgs ms;
  auto* metrics_cmd = app.add_subcommand("metrics", "Detection metrics from an alarms CSV or raw counts");
  metrics_cmd->add_option("--alarms", ms.alarms, "CSV with fault_active and alarm_* columns");
  metrics_cmd->add_option("--tp", ms.tp);
  metrics_cmd->add_option("--fp", ms.fp);
  metrics_cmd->add_option("--tn", ms.tn);
  metrics_cmd->add_option("--fn", ms.fn);
  metrics_cmd->add_option("--out", ms.out, "Write the metrics CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim, out);
    if (*synth_cmd) return cmd_synthesize(syn, out);
    if (*verify_cmd) {
      const LoadedModel lm = load_model(ver.model);
      return cmd_verify(lm, gains_for_verify(lm, ver.gains), ver, out);
    }
    if (*case_cmd) return cmd_case(cs, out);
    if (*metrics_cmd) return cmd_metrics(ms, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const TrainingError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const RecoveryError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace etcpn::cli
