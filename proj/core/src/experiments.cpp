#include "starsee/experiments.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace starsee::exp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Splits "40 dBm" into 40 and "dBm".
std::pair<double, std::string> number_and_unit(const std::string& s, const std::string& field) {
  const std::string t = trim(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(field + ": expected a number with a unit, got \"" + s + "\"");
  }
  if (!std::isfinite(v)) throw std::invalid_argument(field + ": value is not finite");
  return {v, trim(t.substr(used))};
}

// Tracks which keys of a JSON object were read so leftovers can be rejected.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) {
      obj_ = json::object();
      return;
    }
    obj_ = root.at(name);
    if (!obj_.is_object()) throw std::invalid_argument(name + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& at(const std::string& key) {
    if (!has(key)) throw std::invalid_argument(field(key) + ": required field missing");
    return obj_.at(key);
  }
  std::string field(const std::string& key) const { return name_ + "." + key; }

  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) throw std::invalid_argument(field(key) + ": expected an integer");
    return v.get<int>();
  }
  void integer(const std::string& key, int& out) {
    if (has(key)) out = integer(key);
  }
  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw std::invalid_argument(field(key) + ": expected a number");
    out = v.get<double>();
  }
  void power(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw std::invalid_argument(field(key) + ": powers need a unit, e.g. \"40 dBm\"");
    out = parse_power(v.get<std::string>(), field(key));
  }
  // Linear when given as a number, otherwise a string in dB.
  void ratio(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_number()) out = v.get<double>();
    else if (v.is_string()) out = parse_ratio(v.get<std::string>(), field(key));
    else throw std::invalid_argument(field(key) + ": expected a number or a dB string");
  }
  void point(const std::string& key, Vec3& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }))
      throw std::invalid_argument(field(key) + ": expected [x, y, z] in metres");
    out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw std::invalid_argument(field(it.key()) + ": unknown field");
  }

 private:
  std::string name_;
  json obj_;
  std::set<std::string> seen_;
};

double to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt(v[i]);
  }
  return s;
}

std::vector<double> split_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!trim(item).empty()) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Notes may not break the CSV.
std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::PMax: return "p_max";
    case SweepAxis::M: return "M";
    case SweepAxis::N: return "N";
    case SweepAxis::KappaG: return "kappa_g_sq";
    case SweepAxis::RisX: return "ris_x";
  }
  return "?";
}

SweepAxis axis_from_string(const std::string& s) {
  for (SweepAxis a : {SweepAxis::None, SweepAxis::PMax, SweepAxis::M, SweepAxis::N, SweepAxis::KappaG, SweepAxis::RisX})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("sweep.axis: unknown axis \"" + s + "\"");
}

std::string RunKind::label() const { return (oma ? std::string("OMA-") : std::string()) + to_string(protocol); }

RunKind RunKind::parse(const std::string& s) {
  RunKind k;
  std::string p = s;
  if (p.rfind("OMA-", 0) == 0) {
    k.oma = true;
    p = p.substr(4);
  }
  k.protocol = protocol_from_string(p);
  return k;
}

double parse_power(const std::string& s, const std::string& field) {
  const auto [v, unit] = number_and_unit(s, field);
  if (unit == "dBm") return std::pow(10.0, (v - 30.0) / 10.0);
  if (unit == "dBW") return std::pow(10.0, v / 10.0);
  if (unit == "W") return v;
  if (unit == "mW") return v * 1e-3;
  throw std::invalid_argument(field + ": unknown power unit \"" + unit + "\" (use dBm, dBW, W or mW)");
}

double parse_ratio(const std::string& s, const std::string& field) {
  const auto [v, unit] = number_and_unit(s, field);
  if (unit == "dB") return std::pow(10.0, v / 10.0);
  if (unit.empty()) return v;
  throw std::invalid_argument(field + ": unknown ratio unit \"" + unit + "\" (use dB)");
}

void ExperimentConfig::validate() const {
  params.validate();
  geometry.validate();
  uncertainty.validate();
  if (runs.empty()) throw std::invalid_argument("run.protocols: at least one protocol required");
  if (seeds.empty()) throw std::invalid_argument("run.seeds: at least one seed required");
  if (values.empty()) throw std::invalid_argument("sweep.values: at least one value required");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("sweep.values: values must be finite");
  if (!std::is_sorted(values.begin(), values.end()) ||
      std::adjacent_find(values.begin(), values.end()) != values.end())
    throw std::invalid_argument("sweep.values: values must be strictly increasing");
  if (workers < 1) throw std::invalid_argument("run.workers: must be positive");
  // each sweep point must itself be valid
  for (double v : values) {
    SystemParams p = params;
    Geometry g = geometry;
    UncertaintyConfig u = uncertainty;
    apply_sweep_value(axis, v, p, g, u);
    p.validate();
    g.validate();
    u.validate();
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config: expected an object at top level");
  for (auto it = root.begin(); it != root.end(); ++it)
    if (it.key() != "system" && it.key() != "geometry" && it.key() != "uncertainty" && it.key() != "sweep" &&
        it.key() != "run")
      throw std::invalid_argument(it.key() + ": unknown section");

  ExperimentConfig cfg;
  {
    Section s(root, "system");
    SystemParams& p = cfg.params;
    p.N = s.integer("N");
    p.M = s.integer("M");
    p.J_r = s.integer("J_r");
    p.J_t = s.integer("J_t");
    s.power("p_max", p.p_max);
    s.power("noise_power", p.noise_power);
    s.number("amp_efficiency", p.amp_efficiency);
    s.power("p_bs", p.p_bs);
    s.power("p_user", p.p_user);
    s.power("p_element", p.p_element);
    s.number("rate_min", p.rate_min);
    s.number("leak_max", p.leak_max);
    s.ratio("eps0", p.eps0);
    s.number("ple_bs_ris", p.ple_bs_ris);
    s.number("ple_direct", p.ple_direct);
    s.number("ple_ris_user", p.ple_ris_user);
    s.ratio("rician_bs_ris", p.rician_bs_ris);
    s.ratio("rician_direct", p.rician_direct);
    s.ratio("rician_ris_user", p.rician_ris_user);
    s.reject_unknown();
  }
  {
    Section s(root, "geometry");
    Geometry& g = cfg.geometry;
    s.point("bs", g.bs);
    s.point("ris", g.ris);
    s.point("bob_center_r", g.bob_center[0]);
    s.point("bob_center_t", g.bob_center[1]);
    s.point("eve_center_r", g.eve_center[0]);
    s.point("eve_center_t", g.eve_center[1]);
    s.number("radius", g.radius);
    s.reject_unknown();
  }
  {
    Section s(root, "uncertainty");
    double all = 0.1;
    s.number("kappa_sq", all);
    cfg.uncertainty = UncertaintyConfig::uniform_sq(all);
    auto one = [&](const char* key, double& k) {
      double sq = k * k;
      s.number(key, sq);
      if (sq < 0) throw std::invalid_argument(s.field(key) + ": must be nonnegative");
      k = std::sqrt(sq);
    };
    one("kappa_h_bob_sq", cfg.uncertainty.kappa_h_bob);
    one("kappa_g_bob_sq", cfg.uncertainty.kappa_g_bob);
    one("kappa_h_eve_sq", cfg.uncertainty.kappa_h_eve);
    one("kappa_g_eve_sq", cfg.uncertainty.kappa_g_eve);
    s.reject_unknown();
  }
  {
    Section s(root, "sweep");
    if (s.has("axis")) {
      const json& a = s.at("axis");
      if (!a.is_string()) throw std::invalid_argument("sweep.axis: expected a string");
      cfg.axis = axis_from_string(a.get<std::string>());
    }
    if (s.has("values")) {
      const json& v = s.at("values");
      if (!v.is_array()) throw std::invalid_argument("sweep.values: expected an array");
      cfg.values.clear();
      for (const json& x : v) {
        if (cfg.axis == SweepAxis::PMax) {
          if (!x.is_string()) throw std::invalid_argument("sweep.values: powers need a unit, e.g. \"40 dBm\"");
          cfg.values.push_back(to_dbm(parse_power(x.get<std::string>(), "sweep.values")));
        } else {
          if (!x.is_number()) throw std::invalid_argument("sweep.values: expected numbers");
          cfg.values.push_back(x.get<double>());
        }
      }
    } else if (cfg.axis != SweepAxis::None) {
      throw std::invalid_argument("sweep.values: required field missing");
    }
    if (cfg.axis == SweepAxis::None) cfg.values = {0.0};
    s.reject_unknown();
  }
  {
    Section s(root, "run");
    if (s.has("protocols")) {
      const json& v = s.at("protocols");
      if (!v.is_array()) throw std::invalid_argument("run.protocols: expected an array");
      for (const json& x : v) {
        if (!x.is_string()) throw std::invalid_argument("run.protocols: expected strings");
        try {
          cfg.runs.push_back(RunKind::parse(x.get<std::string>()));
        } catch (const std::invalid_argument&) {
          throw std::invalid_argument("run.protocols: unknown protocol \"" + x.get<std::string>() + "\"");
        }
      }
    } else {
      cfg.runs = {RunKind{Protocol::ES, false}};
    }
    if (s.has("seeds")) {
      const json& v = s.at("seeds");
      if (v.is_number_integer()) {
        for (int i = 1; i <= v.get<int>(); ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
      } else if (v.is_array()) {
        for (const json& x : v) {
          if (!x.is_number_unsigned()) throw std::invalid_argument("run.seeds: expected nonnegative integers");
          cfg.seeds.push_back(x.get<std::uint64_t>());
        }
      } else {
        throw std::invalid_argument("run.seeds: expected a count or a list");
      }
    } else {
      cfg.seeds = {1, 2, 3, 4, 5};
    }
    if (s.has("out")) {
      const json& v = s.at("out");
      if (!v.is_string()) throw std::invalid_argument("run.out: expected a string");
      cfg.out_dir = v.get<std::string>();
    }
    s.integer("workers", cfg.workers);
    if (s.has("traces")) {
      const json& v = s.at("traces");
      if (!v.is_boolean()) throw std::invalid_argument("run.traces: expected true or false");
      cfg.traces = v.get<bool>();
    }
    s.number("tolerance", cfg.ao.tolerance);
    s.integer("max_iterations", cfg.ao.max_iterations);
    s.reject_unknown();
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.params.N = 3;
    cfg.params.M = 8;
    cfg.seeds = {1, 2, 3, 4, 5};
  } else if (profile == "full") {
    cfg.params.N = 5;
    cfg.params.M = 20;
  } else {
    throw std::invalid_argument("unknown profile \"" + profile + "\" (desk or full)");
  }
  cfg.validate();
}

void apply_sweep_value(SweepAxis axis, double value, SystemParams& p, Geometry& g, UncertaintyConfig& u) {
  switch (axis) {
    case SweepAxis::None: break;
    case SweepAxis::PMax: p.p_max = std::pow(10.0, (value - 30.0) / 10.0); break;
    case SweepAxis::M: p.M = static_cast<int>(std::lround(value)); break;
    case SweepAxis::N: p.N = static_cast<int>(std::lround(value)); break;
    case SweepAxis::KappaG:
      if (value < 0) throw std::invalid_argument("sweep.values: squared kappa must be nonnegative");
      u.kappa_g_bob = u.kappa_g_eve = std::sqrt(value);
      break;
    case SweepAxis::RisX: g.ris.x = value; break;
  }
}

// ---------------------------------------------------------------------------

std::string ResultRow::key() const { return protocol + "|" + fmt(value) + "|" + std::to_string(seed); }

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {"protocol", "axis",      "value",     "seed",       "see",
                                                "ssr",      "power",     "iterations", "converged", "feasible",
                                                "beta_r_mean", "beta_t_mean", "beta_r", "beta_t", "note"};
  return cols;
}

std::string csv_header() {
  std::string s;
  for (std::size_t i = 0; i < csv_columns().size(); ++i) s += (i ? "," : "") + csv_columns()[i];
  return s;
}

std::string to_csv(const ResultRow& r) {
  std::ostringstream os;
  os << r.protocol << ',' << r.axis << ',' << fmt(r.value) << ',' << r.seed << ',' << fmt(r.see) << ',' << fmt(r.ssr)
     << ',' << fmt(r.power) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << (r.feasible ? 1 : 0)
     << ',' << fmt(mean(r.beta_r)) << ',' << fmt(mean(r.beta_t)) << ',' << join(r.beta_r) << ',' << join(r.beta_t)
     << ',' << sanitize(r.note);
  return os.str();
}

ResultRow from_csv(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != csv_columns().size()) throw std::invalid_argument("results row has the wrong number of columns");
  ResultRow r;
  r.protocol = f[0];
  r.axis = f[1];
  r.value = std::stod(f[2]);
  r.seed = std::stoull(f[3]);
  r.see = std::stod(f[4]);
  r.ssr = std::stod(f[5]);
  r.power = std::stod(f[6]);
  r.iterations = std::stoi(f[7]);
  r.converged = f[8] == "1";
  r.feasible = f[9] == "1";
  r.beta_r = split_numbers(f[12]);
  r.beta_t = split_numbers(f[13]);
  r.note = f[14];
  return r;
}

std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != csv_header())
    throw std::invalid_argument(path + ": unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line))
    if (!trim(line).empty()) rows.push_back(from_csv(line));
  return rows;
}

// ---------------------------------------------------------------------------

ResultRow run_cell(const ExperimentConfig& cfg, const RunKind& kind, double value, std::uint64_t seed,
                   std::vector<TraceRecord>* trace) {
  const auto t0 = std::chrono::steady_clock::now();
  SystemParams p = cfg.params;
  Geometry g = cfg.geometry;
  UncertaintyConfig u = cfg.uncertainty;
  apply_sweep_value(cfg.axis, value, p, g, u);

  ResultRow row;
  row.protocol = kind.label();
  row.axis = to_string(cfg.axis);
  row.value = value;
  row.seed = seed;

  const ChannelRealization ch = generate_realization(p, g, u, seed);
  const Problem pr = Problem::normalized(ch, p, kind.protocol);
  AOConfig ao = cfg.ao;
  ao.seed = seed;

  auto take_state = [&](const AOResult& r) {
    row.iterations = r.iterations;
    row.converged = r.converged;
    row.feasible = r.feasible;
    row.note = r.note;
    row.beta_r = std::vector<double>(r.state.u[0].size());
    row.beta_t = std::vector<double>(r.state.u[1].size());
    Eigen::Map<Eigen::VectorXd>(row.beta_r.data(), row.beta_r.size()) = r.state.beta(0);
    Eigen::Map<Eigen::VectorXd>(row.beta_t.data(), row.beta_t.size()) = r.state.beta(1);
    if (trace) *trace = r.trace;
  };

  if (kind.oma) {
    const OmaResult o = oma_baseline(pr, ao);
    row.feasible = o.feasible;
    row.converged = o.feasible;
    row.beta_r.assign(p.M, 0.0);
    row.beta_t.assign(p.M, 0.0);
    for (const AOResult& s : o.slots) {
      row.iterations += s.iterations;
      row.converged = row.converged && s.converged;
      for (int m = 0; m < p.M; ++m) {
        row.beta_r[m] += s.state.beta(0)(m) / static_cast<double>(o.slots.size());
        row.beta_t[m] += s.state.beta(1)(m) / static_cast<double>(o.slots.size());
      }
      if (trace) trace->insert(trace->end(), s.trace.begin(), s.trace.end());
    }
    if (!o.feasible) row.note = "infeasible slot";
    row.ssr = o.feasible ? o.ssr : 0.0;
    row.power = o.power;
  } else if (kind.protocol == Protocol::TS) {
    const TsResult t = ts_two_layer(pr, ao);
    take_state(t.best);
    row.ssr = t.best.feasible ? t.best.report.ssr : 0.0;
    row.power = t.best.report.power;
    row.note = "tau_r=" + fmt(t.tau_r) + (t.used_grid_fallback ? " grid" : "") +
               (t.best.note.empty() ? "" : " " + t.best.note);
  } else {
    const AOResult r = ao_run(pr, ao);
    take_state(r);
    row.ssr = r.feasible ? r.report.ssr : 0.0;
    row.power = r.report.power;
  }
  if (!(row.power > 0)) row.power = p.static_power();
  row.see = row.ssr / row.power;
  row.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<ResultRow> run_campaign(const ExperimentConfig& cfg, const std::function<void(const ResultRow&)>& on_row) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const fs::path results = fs::path(cfg.out_dir) / "results.csv";
  const fs::path timing = fs::path(cfg.out_dir) / "timing.csv";
  if (cfg.traces) fs::create_directories(fs::path(cfg.out_dir) / "traces");

  std::vector<ResultRow> done;
  std::set<std::string> have;
  if (fs::exists(results)) {
    done = read_csv(results.string());
    for (const auto& r : done) have.insert(r.key());
  }

  struct Task {
    RunKind kind;
    double value;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double v : cfg.values)
    for (std::uint64_t s : cfg.seeds)
      for (const RunKind& k : cfg.runs) {
        ResultRow probe;
        probe.protocol = k.label();
        probe.value = v;
        probe.seed = s;
        if (!have.count(probe.key())) tasks.push_back({k, v, s});
      }

  const bool fresh = !fs::exists(results);
  std::ofstream out(results, std::ios::app);
  std::ofstream tout(timing, std::ios::app);
  if (!out || !tout) throw std::runtime_error("cannot write to " + cfg.out_dir);
  if (fresh) out << csv_header() << '\n' << std::flush;
  if (fs::file_size(timing) == 0) tout << "protocol,value,seed,millis\n";

  // Rows are written in task order; finished rows wait until their turn.
  std::vector<std::optional<ResultRow>> slots(tasks.size());
  std::size_t next_write = 0;
  std::mutex mu;
  std::atomic<std::size_t> next_task{0};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_task.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      ResultRow row;
      std::vector<TraceRecord> trace;
      try {
        row = run_cell(cfg, t.kind, t.value, t.seed, cfg.traces ? &trace : nullptr);
      } catch (const std::exception& e) {
        row = ResultRow{};
        row.protocol = t.kind.label();
        row.axis = to_string(cfg.axis);
        row.value = t.value;
        row.seed = t.seed;
        row.power = cfg.params.static_power();
        row.note = std::string("error: ") + e.what();
      }
      if (cfg.traces) {
        const std::string name = row.protocol + "_" + fmt(row.value) + "_" + std::to_string(row.seed) + ".txt";
        write_trace(trace, (fs::path(cfg.out_dir) / "traces" / name).string());
      }
      std::lock_guard<std::mutex> lock(mu);
      slots[i] = std::move(row);
      try {
        while (next_write < slots.size() && slots[next_write]) {
          const ResultRow& r = *slots[next_write];
          out << to_csv(r) << '\n' << std::flush;
          tout << r.protocol << ',' << fmt(r.value) << ',' << r.seed << ',' << fmt(r.millis) << '\n' << std::flush;
          if (on_row) on_row(r);
          done.push_back(r);
          ++next_write;
        }
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return done;
}

// ---------------------------------------------------------------------------

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::vector<SummaryEntry> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, double>, std::pair<int, std::vector<double>>> groups;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.protocol) == order.end()) order.push_back(r.protocol);
    auto& g = groups[{r.protocol, r.value}];
    ++g.first;
    if (r.feasible) g.second.push_back(r.see);
  }
  std::vector<SummaryEntry> out;
  for (const auto& p : order)
    for (const auto& [key, g] : groups) {
      if (key.first != p) continue;
      SummaryEntry e;
      e.protocol = p;
      e.value = key.second;
      e.runs = g.first;
      e.feasible = static_cast<int>(g.second.size());
      e.mean = mean(g.second);
      e.se = standard_error(g.second);
      out.push_back(e);
    }
  return out;
}

AmplitudeReport amplitude_report(const std::vector<ResultRow>& rows) {
  AmplitudeReport rep;
  for (const auto& r : rows) {
    if (r.protocol != "ES" || !r.converged || r.beta_r.empty()) continue;
    if (rep.beta_r.empty()) {
      rep.beta_r.assign(r.beta_r.size(), 0.0);
      rep.beta_t.assign(r.beta_t.size(), 0.0);
    }
    if (r.beta_r.size() != rep.beta_r.size()) continue;  // M sweeps: keep the first size only
    for (std::size_t m = 0; m < r.beta_r.size(); ++m) {
      rep.beta_r[m] += r.beta_r[m];
      rep.beta_t[m] += r.beta_t[m];
    }
    ++rep.rows;
  }
  for (std::size_t m = 0; m < rep.beta_r.size(); ++m) {
    rep.beta_r[m] /= rep.rows;
    rep.beta_t[m] /= rep.rows;
  }
  rep.mean_r = mean(rep.beta_r);
  rep.mean_t = mean(rep.beta_t);
  return rep;
}

namespace {

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Frame {
  double x0, x1, y0, y1;
  double left = 70, right = 170, top = 20, bottom = 50, width = 640, height = 400;
  double px(double x) const { return left + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (width - left - right); }
  double py(double y) const { return height - bottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (height - top - bottom); }
};

void axes(std::ostream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  os << "<line x1='" << f.left << "' y1='" << f.height - f.bottom << "' x2='" << f.width - f.right << "' y2='"
     << f.height - f.bottom << "' stroke='black'/>\n";
  os << "<line x1='" << f.left << "' y1='" << f.top << "' x2='" << f.left << "' y2='" << f.height - f.bottom
     << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", y);
    os << "<text x='" << f.left - 6 << "' y='" << f.py(y) + 4 << "' font-size='11' text-anchor='end'>" << buf
       << "</text>\n";
  }
  os << "<text x='" << (f.left + f.width - f.right) / 2 << "' y='" << f.height - 12
     << "' font-size='13' text-anchor='middle'>" << xlabel << "</text>\n";
  os << "<text x='16' y='" << (f.top + f.height - f.bottom) / 2 << "' font-size='13' text-anchor='middle' "
     << "transform='rotate(-90 16 " << (f.top + f.height - f.bottom) / 2 << ")'>" << ylabel << "</text>\n";
}

}  // namespace

void write_summary(const std::vector<ResultRow>& rows, const std::string& dir) {
  fs::create_directories(dir);
  const auto entries = summarize(rows);
  {
    std::ofstream os(fs::path(dir) / "summary.csv");
    os << "protocol,value,runs,feasible,mean_see,se_see\n";
    for (const auto& e : entries)
      os << e.protocol << ',' << fmt(e.value) << ',' << e.runs << ',' << e.feasible << ',' << fmt(e.mean) << ','
         << fmt(e.se) << '\n';
  }
  const std::string axis = rows.empty() ? "none" : rows.front().axis;

  // SEE versus the sweep value, one curve per protocol, error bars of one SE.
  if (!entries.empty()) {
    Frame f{entries.front().value, entries.front().value, 0.0, 0.0};
    for (const auto& e : entries) {
      f.x0 = std::min(f.x0, e.value);
      f.x1 = std::max(f.x1, e.value);
      f.y1 = std::max(f.y1, e.mean + e.se);
    }
    if (f.y1 <= 0) f.y1 = 1.0;
    std::ofstream os(fs::path(dir) / "see.svg");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    axes(os, f, axis, "SEE (bits/s/Hz/W)");
    std::vector<std::string> protos;
    for (const auto& e : entries)
      if (std::find(protos.begin(), protos.end(), e.protocol) == protos.end()) protos.push_back(e.protocol);
    for (std::size_t p = 0; p < protos.size(); ++p) {
      const char* c = kColors[p % 10];
      std::string pts;
      for (const auto& e : entries) {
        if (e.protocol != protos[p]) continue;
        pts += fmt(f.px(e.value)) + "," + fmt(f.py(e.mean)) + " ";
        os << "<line x1='" << f.px(e.value) << "' y1='" << f.py(e.mean - e.se) << "' x2='" << f.px(e.value)
           << "' y2='" << f.py(e.mean + e.se) << "' stroke='" << c << "'/>\n";
        os << "<circle cx='" << f.px(e.value) << "' cy='" << f.py(e.mean) << "' r='3' fill='" << c << "'/>\n";
      }
      os << "<polyline fill='none' stroke='" << c << "' stroke-width='1.5' points='" << pts << "'/>\n";
      const double ly = f.top + 16.0 * (p + 1);
      os << "<line x1='" << f.width - f.right + 12 << "' y1='" << ly - 4 << "' x2='" << f.width - f.right + 32
         << "' y2='" << ly - 4 << "' stroke='" << c << "' stroke-width='2'/>\n";
      os << "<text x='" << f.width - f.right + 38 << "' y='" << ly << "' font-size='12'>" << protos[p] << "</text>\n";
    }
    os << "</svg>\n";
  }

  // Mean amplitude per element on both sides.
  const AmplitudeReport amp = amplitude_report(rows);
  {
    std::ofstream os(fs::path(dir) / "amplitudes.csv");
    os << "element,beta_r,beta_t\n";
    for (std::size_t m = 0; m < amp.beta_r.size(); ++m)
      os << m + 1 << ',' << fmt(amp.beta_r[m]) << ',' << fmt(amp.beta_t[m]) << '\n';
    os << "mean," << fmt(amp.mean_r) << ',' << fmt(amp.mean_t) << '\n';
  }
  if (!amp.beta_r.empty()) {
    const int M = static_cast<int>(amp.beta_r.size());
    Frame f{0.0, static_cast<double>(M), 0.0, 1.0};
    std::ofstream os(fs::path(dir) / "amplitudes.svg");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.width << "' height='" << f.height << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    axes(os, f, "element", "amplitude");
    const double slot = (f.px(1.0) - f.px(0.0));
    for (int m = 0; m < M; ++m) {
      const double x = f.px(m);
      os << "<rect x='" << x + 0.1 * slot << "' y='" << f.py(amp.beta_r[m]) << "' width='" << 0.4 * slot
         << "' height='" << f.py(0) - f.py(amp.beta_r[m]) << "' fill='" << kColors[0] << "'/>\n";
      os << "<rect x='" << x + 0.5 * slot << "' y='" << f.py(amp.beta_t[m]) << "' width='" << 0.4 * slot
         << "' height='" << f.py(0) - f.py(amp.beta_t[m]) << "' fill='" << kColors[1] << "'/>\n";
    }
    const char* names[] = {"reflection", "transmission"};
    for (int i = 0; i < 2; ++i) {
      const double ly = f.top + 16.0 * (i + 1);
      os << "<rect x='" << f.width - f.right + 12 << "' y='" << ly - 10 << "' width='12' height='10' fill='"
         << kColors[i] << "'/>\n";
      os << "<text x='" << f.width - f.right + 30 << "' y='" << ly << "' font-size='12'>" << names[i] << "</text>\n";
    }
    os << "</svg>\n";
  }
}

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream os(path);
  os << "iteration psi see penalty ms_penalty power_block active_block passive_block millis\n";
  for (const auto& t : trace) {
    os << t.iteration << ' ' << fmt(t.psi) << ' ' << fmt(t.see) << ' ' << fmt(t.penalty) << ' ' << fmt(t.ms_penalty)
       << ' ' << to_string(t.status[0]) << ' ' << to_string(t.status[1]) << ' ' << to_string(t.status[2]) << ' '
       << fmt(t.millis) << '\n';
  }
}

}  // namespace starsee::exp
