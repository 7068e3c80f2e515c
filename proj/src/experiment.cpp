#include "dperc/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "dperc/errors.hpp"
#include "dperc/exact_gibbs.hpp"
#include "dperc/fixed_point.hpp"
#include "dperc/free_energy.hpp"
#include "dperc/model.hpp"
#include "dperc/random.hpp"
#include "dperc/stats.hpp"

namespace dperc {

namespace {

using Schema = std::vector<ParamSpec>;

Schema with_common(Schema keys) {
  keys.push_back({"seed", "1", "master 64-bit seed"});
  keys.push_back({"workers", "1", "worker threads (>= 1)"});
  keys.push_back({"out_dir", "out", "output directory"});
  return keys;
}

const ParamSpec kPotential{"potential", "tanh:0.2:1",
                           "bounded potential: zero|const:c|tanh:a:b|bump:a:w|step:a:k"};
const ParamSpec kAlpha{"alpha", "0.1", "constraint density M/N, in (0,1)"};
const ParamSpec kGamma{"gamma", "1", "mean connectivity per constraint"};
const ParamSpec kTol{"tol", "0.001", "fixed-point stopping tolerance on successive W1"};
const ParamSpec kMaxIter{"max_iter", "100", "fixed-point iteration cap"};

const std::map<std::string, Schema, std::less<>>& schemas() {
  static const std::map<std::string, Schema, std::less<>> table = {
      {"check-conditions",
       with_common({kAlpha, {"gamma0", "1", "connectivity bound gamma0"}, kPotential})},
      {"exact",
       with_common({{"N", "8", "number of spins (<= 24)"},
                    {"M", "auto", "number of constraints; when set, alpha is ignored and "
                                  "recorded as M/N"},
                    kAlpha,
                    kGamma,
                    kPotential})},
      {"decorrelation",
       with_common({{"N_list", "8,12,16,20", "comma-separated system sizes"},
                    kAlpha,
                    kGamma,
                    kPotential,
                    {"n_disorder", "2000", "disorder samples per N"}})},
      {"fixed-point",
       with_common({kAlpha,
                    kGamma,
                    kPotential,
                    {"pop_size", "100000", "population size S"},
                    kTol,
                    kMaxIter,
                    {"init", "0", "constant initial population value in [-1,1]"}})},
      {"magnetization-law",
       with_common({{"N_list", "8,16", "comma-separated system sizes"},
                    kAlpha,
                    kGamma,
                    kPotential,
                    {"m", "1", "number of leading spins"},
                    {"n_disorder", "512", "disorder samples per N"},
                    {"pop_size", "100000", "population size S"},
                    kTol,
                    kMaxIter})},
      {"free-energy",
       with_common({kAlpha,
                    {"gamma_max", "2", "upper end of the gamma grid"},
                    {"gamma", "1", "gamma at which p_N is compared with F"},
                    kPotential,
                    {"grid", "17", "odd number of grid nodes"},
                    {"pop_size", "20000", "population size per grid node"},
                    {"n_mc", "100000", "Monte Carlo draws for G per node"},
                    {"n_disorder", "2000", "disorder samples per N"},
                    {"N_list", "8,12,16,20", "comma-separated system sizes"},
                    kTol,
                    kMaxIter,
                    {"richardson_tol", "0.0001", "coarse-grid agreement threshold"}})},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_exact(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("parameter '" + key + "': cannot parse '" + value + "'");
  return out;
}

std::string csv_number(double x) { return format_double(x); }

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json report_json(const ConvergenceReport& r) {
  return {{"iterations", r.iterations},   {"final_step_w1", r.final_step_w1},
          {"converged", r.converged},     {"plateau", r.plateau},
          {"conditions_ok", r.conditions_ok}, {"trajectory", r.trajectory}};
}

std::string convergence_csv(const ConvergenceReport& r) {
  std::ostringstream os;
  os << "iteration,w1_step\n";
  for (std::size_t i = 0; i < r.trajectory.size(); ++i)
    os << i + 1 << ',' << csv_number(r.trajectory[i]) << '\n';
  return os.str();
}

SolveOptions solve_options(const ExperimentConfig& c) {
  SolveOptions o;
  const long long S = c.integer("pop_size");
  if (S < 1) throw ParameterError("pop_size must be >= 1");
  o.pop_size = static_cast<std::size_t>(S);
  o.tol = c.real("tol");
  o.max_iter = static_cast<int>(c.integer("max_iter"));
  if (!(o.tol > 0.0)) throw ParameterError("tol must be > 0");
  if (o.max_iter < 1) throw ParameterError("max_iter must be >= 1");
  o.workers = c.workers;
  return o;
}

int positive_int(const ExperimentConfig& c, const std::string& key) {
  const long long v = c.integer(key);
  if (v < 1 || v > 1'000'000'000) throw ParameterError(key + " must be a positive integer");
  return static_cast<int>(v);
}

std::vector<Artifact> run_check_conditions(const ExperimentConfig& c, std::ostream& log) {
  const auto report = check_conditions(c.real("alpha"), c.real("gamma0"), c.potential());
  nlohmann::json j = to_json(report);
  j["alpha"] = c.real("alpha");
  j["gamma0"] = c.real("gamma0");
  j["potential"] = c.potential().descriptor();
  log << j.dump(2) << '\n';
  return {{"conditions.json", dump(j)}};
}

std::vector<Artifact> run_exact(const ExperimentConfig& c, std::ostream& log) {
  const int N = static_cast<int>(c.integer("N"));
  if (N > kMaxEnumerationSpins)
    throw CapacityError("N > " + std::to_string(kMaxEnumerationSpins) +
                        ": exact enumeration cap exceeded");
  const double gamma = c.real("gamma");
  const ModelParams params =
      c.text("M") == "auto" ? ModelParams::make(N, c.real("alpha"), gamma)
                            : ModelParams::with_constraints(N, static_cast<int>(c.integer("M")),
                                                            gamma);
  const auto u = c.potential();
  RandomSource rng(Stream(c.seed).child("instance"));
  const Instance inst = sample_instance(params, rng);
  const GibbsSummary g = enumerate_gibbs(inst, u);

  nlohmann::json j = {{"N", params.N},
                      {"M", params.M},
                      {"alpha", params.alpha},
                      {"gamma", params.gamma},
                      {"potential", u.descriptor()},
                      {"log_Z", g.log_Z},
                      {"pN", g.log_Z / params.N},
                      {"magnetizations", g.magnetizations}};
  log << "log_Z = " << format_double(g.log_Z) << "  pN = " << format_double(g.log_Z / params.N)
      << '\n';
  return {{"instance.json", serialize_instance(inst)}, {"gibbs.json", dump(j)}};
}

std::vector<Artifact> run_decorrelation(const ExperimentConfig& c, std::ostream& log) {
  const auto u = c.potential();
  const int n = positive_int(c, "n_disorder");
  const Stream root(c.seed);
  std::vector<Artifact> out;
  nlohmann::json summaries = nlohmann::json::array();
  std::ostringstream table;
  table << "N,M,mean,std_error,n_samples\n";
  for (int N : c.int_list("N_list")) {
    if (N > kMaxEnumerationSpins)
      throw CapacityError("N > " + std::to_string(kMaxEnumerationSpins) +
                          ": exact enumeration cap exceeded");
    const auto params = ModelParams::make(N, c.real("alpha"), c.real("gamma"));
    const auto batch = disorder_average(params, u, StatisticSpec{StatisticKind::Decorrelation, 1},
                                        n, root.child("N", static_cast<std::uint64_t>(N)),
                                        c.workers);
    std::ostringstream csv;
    write_batch_csv(csv, batch);
    out.push_back({"decorrelation_N" + std::to_string(N) + ".csv", csv.str()});
    summaries.push_back(summary_json(batch, u));
    table << N << ',' << params.M << ',' << csv_number(batch.summary.mean) << ','
          << csv_number(batch.summary.std_error) << ',' << batch.summary.n_samples << '\n';
    log << "N=" << N << "  mean=" << format_double(batch.summary.mean)
        << "  se=" << format_double(batch.summary.std_error) << '\n';
  }
  out.push_back({"decorrelation.csv", table.str()});
  out.push_back({"summary.json", dump(summaries)});
  return out;
}

std::vector<Artifact> run_fixed_point(const ExperimentConfig& c, std::ostream& log) {
  const auto u = c.potential();
  auto options = solve_options(c);
  const double init = c.real("init");
  if (!(init >= -1.0 && init <= 1.0)) throw ParameterError("init must lie in [-1,1]");
  options.initial = std::vector<double>(options.pop_size, init);
  const auto result =
      solve_fixed_point(c.real("alpha"), c.real("gamma"), u, options, Stream(c.seed));

  std::ostringstream bin(std::ios::binary);
  write_population_binary(bin, result.population, u, c.seed);
  std::ostringstream csv;
  write_population_csv(csv, result.population);
  nlohmann::json j = report_json(result.report);
  j["mean"] = result.population.mean();
  log << "iterations=" << result.report.iterations
      << "  final_step_w1=" << format_double(result.report.final_step_w1) << '\n';
  return {{"population.bin", bin.str()},
          {"population.csv", csv.str()},
          {"convergence.csv", convergence_csv(result.report)},
          {"fixed_point.json", dump(j)}};
}

std::vector<Artifact> run_magnetization_law(const ExperimentConfig& c, std::ostream& log) {
  const auto u = c.potential();
  const double alpha = c.real("alpha");
  const double gamma = c.real("gamma");
  const Stream root(c.seed);
  const auto fp = solve_fixed_point(alpha, gamma, u, solve_options(c), root.child("fixed-point"));
  const int m = positive_int(c, "m");
  const int n = positive_int(c, "n_disorder");

  std::ostringstream csv;
  csv << "N,M,m,n_disorder,joint_w1,marginal_w1\n";
  for (int N : c.int_list("N_list")) {
    if (N > kMaxEnumerationSpins)
      throw CapacityError("N > " + std::to_string(kMaxEnumerationSpins) +
                          ": exact enumeration cap exceeded");
    const auto r = magnetization_law_test(alpha, u, gamma, N, m, n, fp.population,
                                          root.child("law", static_cast<std::uint64_t>(N)),
                                          c.workers);
    const int M = ModelParams::make(N, alpha, gamma).M;
    csv << N << ',' << M << ',' << m << ',' << n << ',' << csv_number(r.joint_w1) << ','
        << csv_number(r.marginal_w1) << '\n';
    log << "N=" << N << "  joint_w1=" << format_double(r.joint_w1)
        << "  marginal_w1=" << format_double(r.marginal_w1) << '\n';
  }
  return {{"magnetization_law.csv", csv.str()},
          {"convergence.csv", convergence_csv(fp.report)},
          {"fixed_point.json", dump(report_json(fp.report))}};
}

std::vector<Artifact> run_free_energy(const ExperimentConfig& c, std::ostream& log) {
  const auto u = c.potential();
  const double alpha = c.real("alpha");
  CurveOptions o;
  const auto solve = solve_options(c);
  o.pop_size = solve.pop_size;
  o.tol = solve.tol;
  o.max_iter = solve.max_iter;
  o.workers = c.workers;
  o.n_mc = static_cast<std::size_t>(positive_int(c, "n_mc"));
  o.richardson_tol = c.real("richardson_tol");
  const Stream root(c.seed);
  const auto curve = build_rs_curve(alpha, u, c.real("gamma_max"),
                                    static_cast<int>(c.integer("grid")), o, root.child("curve"));
  const auto N_list = c.int_list("N_list");
  for (int N : N_list)
    if (N > kMaxEnumerationSpins)
      throw CapacityError("N > " + std::to_string(kMaxEnumerationSpins) +
                          ": exact enumeration cap exceeded");
  const auto cmp = compare_pN_vs_F(alpha, u, c.real("gamma"), N_list, positive_int(c, "n_disorder"),
                                   curve, root.child("comparison"), c.workers);

  std::ostringstream rs;
  rs << "gamma,G,G_err,F\n";
  for (std::size_t j = 0; j < curve.gamma_grid.size(); ++j)
    rs << csv_number(curve.gamma_grid[j]) << ',' << csv_number(curve.G[j].value) << ','
       << csv_number(curve.G[j].std_error) << ',' << csv_number(curve.F[j]) << '\n';
  std::ostringstream table;
  table << "N,pN,pN_err,F,abs_diff\n";
  for (const auto& row : cmp.rows)
    table << row.N << ',' << csv_number(row.pN_mean) << ',' << csv_number(row.pN_stderr) << ','
          << csv_number(row.F_value) << ',' << csv_number(row.abs_diff) << '\n';

  nlohmann::json j = {{"F0", curve.F0},
                      {"gamma", cmp.gamma},
                      {"F_at_gamma", curve.F_at(cmp.gamma)},
                      {"F_error_at_gamma", curve.F_error_at(cmp.gamma)},
                      {"grid_too_coarse", curve.grid_too_coarse},
                      {"conditions_ok", curve.conditions_ok},
                      {"fitted_decay", cmp.fitted_decay},
                      {"fitted_intercept", cmp.fitted_intercept}};
  j["richardson_diff"] = curve.richardson_diff ? nlohmann::json(*curve.richardson_diff)
                                               : nlohmann::json(nullptr);
  for (const auto& row : cmp.rows)
    log << "N=" << row.N << "  pN=" << format_double(row.pN_mean)
        << "  F=" << format_double(row.F_value) << "  |diff|=" << format_double(row.abs_diff)
        << '\n';
  return {{"rs_curve.csv", rs.str()},
          {"comparison.csv", table.str()},
          {"free_energy.json", dump(j)}};
}

nlohmann::json manifest(const ExperimentConfig& c, const std::vector<Artifact>& files) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& a : files) outputs.push_back(a.name);
  outputs.push_back("manifest.json");
  return {{"command", c.command},
          {"seed", c.seed},
          {"workers", c.workers},
          {"params", params},
          {"outputs", outputs}};
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"check-conditions", "exact",
                                                 "decorrelation",    "fixed-point",
                                                 "magnetization-law", "free-energy"};
  return names;
}

const std::vector<ParamSpec>& command_schema(std::string_view command) {
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw ConfigError("unknown command '" + std::string(command) + "'");
  return it->second;
}

std::string canonical_key(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

const std::string& ExperimentConfig::text(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw ConfigError("parameter '" + key + "' not set");
  return it->second;
}

double ExperimentConfig::real(const std::string& key) const {
  const double v = parse_exact<double>(key, text(key));
  if (!std::isfinite(v)) throw ConfigError("parameter '" + key + "' must be finite");
  return v;
}

long long ExperimentConfig::integer(const std::string& key) const {
  return parse_exact<long long>(key, text(key));
}

std::vector<int> ExperimentConfig::int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(text(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_exact<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("parameter '" + key + "' is empty");
  return out;
}

BoundedPotential ExperimentConfig::potential() const {
  return BoundedPotential::parse(text("potential"));
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = canonical_key(trim(std::string_view(body).substr(0, eq)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (out.count(key)) throw ConfigError(where + ": key '" + key + "' assigned twice");
    out[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

ExperimentConfig resolve_config(const std::string& command,
                                const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& overrides) {
  const auto& schema = command_schema(command);
  ExperimentConfig c;
  c.command = command;
  for (const auto& p : schema) c.params[p.key] = p.default_value;
  for (const auto* layer : {&file_values, &overrides}) {
    for (const auto& [raw, value] : *layer) {
      const std::string key = canonical_key(raw);
      if (key == "command") continue;
      if (!c.params.count(key))
        throw ConfigError("unknown key '" + raw + "' for command '" + command + "'");
      c.params[key] = value;
    }
  }
  c.seed = parse_exact<std::uint64_t>("seed", c.params["seed"]);
  const long long w = parse_exact<long long>("workers", c.params["workers"]);
  if (w < 1 || w > 4096) throw ConfigError("parameter 'workers' must be >= 1");
  c.workers = static_cast<unsigned>(w);
  c.out_dir = c.params["out_dir"];
  if (c.out_dir.empty()) throw ConfigError("parameter 'out_dir' is empty");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& command,
                             const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> file_values;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    file_values = parse_key_values(in, path.string());
  }
  std::string resolved = command;
  if (resolved.empty()) {
    const auto it = file_values.find("command");
    if (it == file_values.end()) throw ConfigError("no command given");
    resolved = it->second;
  }
  return resolve_config(resolved, file_values, overrides);
}

std::vector<Artifact> execute(const ExperimentConfig& config, std::ostream& log) {
  std::vector<Artifact> files;
  const std::string& cmd = config.command;
  if (cmd == "check-conditions") files = run_check_conditions(config, log);
  else if (cmd == "exact") files = run_exact(config, log);
  else if (cmd == "decorrelation") files = run_decorrelation(config, log);
  else if (cmd == "fixed-point") files = run_fixed_point(config, log);
  else if (cmd == "magnetization-law") files = run_magnetization_law(config, log);
  else if (cmd == "free-energy") files = run_free_energy(config, log);
  else throw ConfigError("unknown command '" + cmd + "'");
  files.push_back({"manifest.json", dump(manifest(config, files))});
  return files;
}

int run(const ExperimentConfig& config, std::ostream& log) {
  std::vector<std::filesystem::path> written;
  try {
    const auto files = execute(config, log);
    std::filesystem::create_directories(config.out_dir);
    for (const auto& a : files) {
      const auto path = config.out_dir / a.name;
      written.push_back(path);
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      os.write(a.content.data(), static_cast<std::streamsize>(a.content.size()));
      if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    return exit_code::ok;
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    log << "error: " << e.what() << '\n';
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e))
      return exit_code::config;
    if (dynamic_cast<const CapacityError*>(&e)) return exit_code::capacity;
    if (dynamic_cast<const NumericalError*>(&e)) return exit_code::numerical;
    return exit_code::failure;
  }
}

}  // namespace dperc
