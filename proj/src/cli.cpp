#include "defcast/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "defcast/diagnostics.hpp"
#include "defcast/errors.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/game.hpp"
#include "defcast/kernel.hpp"
#include "defcast/opponents.hpp"
#include "defcast/rng.hpp"
#include "defcast/run_log.hpp"
#include "json.hpp"

namespace defcast::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Inline JSON if the argument looks like an object or list, else a file path.
json json_arg(const std::string& arg, const char* what) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  std::string text;
  if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[')) {
    text = arg;
  } else {
    std::ifstream in(arg);
    if (!in) throw InputError(std::string("cannot open ") + what + " file '" + arg + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + suffix);
  return out;
}

json bin_rows_json(const std::vector<BinRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j = {{"bin", r.bin}, {"lower", r.lower}, {"upper", r.upper}, {"count", r.count}};
    j["mean_p"] = r.mean_p ? json(*r.mean_p) : json(nullptr);
    j["mean_y"] = r.mean_y ? json(*r.mean_y) : json(nullptr);
    j["deviation"] = r.deviation ? json(*r.deviation) : json(nullptr);
    out.push_back(j);
  }
  return out;
}

json soft_rows_json(const std::vector<SoftRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j = {{"numerator", r.numerator},
              {"denominator", r.denominator},
              {"bound", r.bound},
              {"denominator_exceeds_sqrt_n", r.well_populated}};
    j["ratio"] = r.ratio ? json(*r.ratio) : json(nullptr);
    j["ratio_bound"] = r.ratio_bound ? json(*r.ratio_bound) : json(nullptr);
    out.push_back(j);
  }
  return out;
}

std::vector<SoftNeighborhood> default_neighborhoods() {
  std::vector<SoftNeighborhood> out;
  for (int i = 1; i <= 9; ++i) {
    const double c = 0.1 * i;
    out.push_back(SoftNeighborhood::calibration(TrapezoidFn(c - 0.04, c + 0.04, 0.01)));
  }
  return out;
}

// --- run ---------------------------------------------------------------------

struct RunArgs {
  std::string kernel;
  std::string algorithm = "K29STAR";
  std::string opponent;
  std::optional<std::size_t> rounds;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t repeat = 1;
  bool header = false;
  std::string skeptic;
  double initial_capital = 0.0;
};

GameConfig build_config(const RunArgs& a) {
  GameConfig c;
  c.kernel = json_arg(a.kernel, "kernel").get<KernelSpec>();
  c.algorithm = parse_forecaster_kind(a.algorithm);
  c.opponent = json_arg(a.opponent, "opponent").get<OpponentSpec>();
  if (a.header) c.opponent.set_replay_header(true);
  if (!a.skeptic.empty()) c.skeptic = skeptic_from_json(json_arg(a.skeptic, "skeptic"));
  c.initial_capital = a.initial_capital;
  c.seed = a.seed;
  if (a.rounds) {
    c.rounds = *a.rounds;
  } else {
    std::optional<std::size_t> len;
    if (const auto* r = std::get_if<ReplayData>(&c.opponent.reality1)) len = replay_source(r->path, r->header).size();
    if (const auto* r = std::get_if<ReplayOutcomes>(&c.opponent.reality2)) {
      const auto n = replay_source(r->path, r->header).size();
      len = len ? std::min(*len, n) : n;
    }
    if (!len) throw ConfigError("--rounds is required unless the opponent replays a file");
    c.rounds = *len;
  }
  return c;
}

json run_one(const GameConfig& config, const fs::path& out_path) {
  const GameResult res = play_game(config);
  save_run_log(out_path.string(), res.log);
  const fs::path capital_path = sibling(out_path, ".capital.jsonl");
  save_capital_trace(capital_path.string(), res.capital);
  return {{"seed", config.seed},
          {"rounds", res.log.rounds.size()},
          {"log", out_path.string()},
          {"capital", capital_path.string()},
          {"drift_sq", drift_sq(res.log)},
          {"variance_budget", variance_budget(res.log)},
          {"final_capital", res.capital.values.back()}};
}

int cmd_run(const RunArgs& a, std::ostream& out) {
  const GameConfig base = build_config(a);
  if (a.repeat <= 1) {
    out << run_one(base, a.out).dump(2) << '\n';
    return kOk;
  }
  const fs::path out_path(a.out);
  std::vector<std::future<json>> jobs;
  for (std::size_t r = 0; r < a.repeat; ++r) {
    GameConfig c = base;
    c.seed = base.seed + r;
    const fs::path p = sibling(out_path, ".rep" + std::to_string(r) + out_path.extension().string());
    jobs.push_back(std::async(std::launch::async, [c, p] { return run_one(c, p); }));
  }
  json runs = json::array();
  for (auto& j : jobs) runs.push_back(j.get());
  double max_ratio = 0.0;
  for (const auto& r : runs) {
    const double v = r.at("variance_budget").get<double>();
    if (v > 0.0) max_ratio = std::max(max_ratio, r.at("drift_sq").get<double>() / v);
  }
  out << json{{"runs", runs}, {"max_drift_to_variance_ratio", max_ratio}}.dump(2) << '\n';
  return kOk;
}

// --- verify ------------------------------------------------------------------

const std::vector<std::string> kAllChecks = {"t1", "eq4", "t2-trapezoid", "t4-witness", "t3", "lemma1"};

bool is_fermi_sobolev(const KernelSpec& k) { return std::holds_alternative<FermiSobolevKernel>(k.variant); }

std::vector<std::string> default_checks(const RunLog& log) {
  std::vector<std::string> out = {"t1", "eq4"};
  if (is_fermi_sobolev(log.header.kernel)) out.push_back("t2-trapezoid");
  const bool adversary = log.header.opponent && log.header.opponent->is_adversary();
  if (adversary) {
    out.push_back("t3");
    out.push_back("t4-witness");
  }
  const bool eq25 = log.header.skeptic.is_null() || log.header.skeptic.value("kind", "") == "k29star_eq25";
  if (log.header.algorithm == "K29STAR" || (log.header.algorithm == "lemma1" && eq25)) out.push_back("lemma1");
  return out;
}

int cmd_verify(const std::string& log_path, const std::string& checks_arg, const std::string& nb_path,
               const std::string& out_path, std::ostream& out) {
  const RunLog log = load_run_log(log_path);
  std::vector<std::string> checks;
  if (checks_arg.empty() || checks_arg == "default") {
    checks = default_checks(log);
  } else if (checks_arg == "all") {
    checks = kAllChecks;
  } else {
    std::stringstream ss(checks_arg);
    std::string c;
    while (std::getline(ss, c, ','))
      if (!c.empty()) checks.push_back(c);
  }
  for (const auto& c : checks)
    if (std::find(kAllChecks.begin(), kAllChecks.end(), c) == kAllChecks.end())
      throw ConfigError("unknown check '" + c + "'");

  json reports = json::array();
  bool ok = true;
  auto add = [&](const TheoremReport& r) {
    reports.push_back(r.to_json());
    ok = ok && r.satisfied;
  };
  for (const auto& c : checks) {
    if (c == "t1") {
      add(check_theorem1(log));
    } else if (c == "eq4") {
      add(check_eq4(log));
    } else if (c == "t3") {
      add(check_theorem3(log));
    } else if (c == "lemma1") {
      add(check_lemma1(log));
    } else if (c == "t4-witness") {
      if (log.rounds.empty()) {
        TheoremReport r;
        r.theorem_id = "t4";
        r.lower_bound = true;
        r.satisfied = true;
        r.vacuous = true;
        add(r);
      } else {
        add(theorem4_witness(log).second);
      }
    } else if (c == "t2-trapezoid") {
      if (!is_fermi_sobolev(log.header.kernel)) {
        reports.push_back({{"theorem", "t2"}, {"applicable", false},
                           {"reason", "trapezoid norms are exact only for fermi_sobolev kernels"}});
        continue;
      }
      const auto nbs = nb_path.empty()
                           ? std::vector<SoftNeighborhood>{SoftNeighborhood::calibration(TrapezoidFn(0.4, 0.6, 0.05))}
                           : neighborhoods_from_json(json_arg(nb_path, "neighborhoods"));
      const auto dims = coordinate_count(log.header.kernel).value_or(1);
      for (const auto& nb : nbs) {
        if (nb.factors().size() > dims) throw ConfigError("neighborhood has more factors than kernel coordinates");
        add(check_theorem2(log, [&nb](PointRef z) { return nb(z); }, nb.fs_norm()));
      }
    }
  }
  const json result = {{"log", log_path}, {"rounds", log.rounds.size()}, {"all_satisfied", ok}, {"checks", reports}};
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw InputError("cannot write '" + out_path + "'");
    f << result.dump(2) << '\n';
  }
  out << result.dump(2) << '\n';
  return ok ? kOk : kCheckFailed;
}

// --- report ------------------------------------------------------------------

int cmd_report(const std::string& log_path, std::size_t bins, const std::string& nb_path,
               const std::string& out_path, std::ostream& out) {
  const RunLog log = load_run_log(log_path);
  const auto rows = binned_calibration(log, bins);
  const auto nbs = nb_path.empty() ? default_neighborhoods() : neighborhoods_from_json(json_arg(nb_path, "neighborhoods"));
  const auto soft = soft_calibration_report(log, nbs);
  const auto lil = lil_ratio(log);
  json result = {{"log", log_path},
                 {"rounds", log.rounds.size()},
                 {"bins", bin_rows_json(rows)},
                 {"soft_calibration", soft_rows_json(soft)}};
  result["lil_ratio"] = lil ? json(*lil) : json(nullptr);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw InputError("cannot write '" + out_path + "'");
    f << result.dump(2) << '\n';
    const fs::path plot = sibling(out_path, ".plot.csv");
    std::ofstream csv(plot);
    if (!csv) throw InputError("cannot write '" + plot.string() + "'");
    csv << "bin_center,mean_p,mean_y,count\n";
    for (const auto& r : rows) {
      if (r.count == 0) continue;
      csv << format_double(0.5 * (r.lower + r.upper)) << ',' << format_double(*r.mean_p) << ','
          << format_double(*r.mean_y) << ',' << r.count << '\n';
    }
  } else {
    out << result.dump(2) << '\n';
  }
  return kOk;
}

// --- kernel-info -------------------------------------------------------------

int cmd_kernel_info(const std::string& spec_arg, std::ostream& out) {
  const auto spec = json_arg(spec_arg, "kernel").get<KernelSpec>();
  const auto coords = coordinate_count(spec);
  const std::size_t dims = coords.value_or(2);
  const bool unit_box = std::holds_alternative<FermiSobolevKernel>(spec.variant) ||
                        std::holds_alternative<ProductKernel>(spec.variant);
  const CounterRng rng(0);
  std::vector<Point> pts;
  for (std::uint64_t i = 0; i < 30; ++i) {
    Point z;
    z.p = rng.uniform(0, i);
    for (std::size_t j = 1; j < dims; ++j) z.x.push_back(unit_box ? rng.uniform(j, i) : 4.0 * rng.uniform(j, i) - 2.0);
    pts.push_back(std::move(z));
  }
  double min_eig = 0.0;
  bool psd = false;
  try {
    const KernelFn k = [&spec](PointRef a, PointRef b) { return eval(spec, a, b); };
    min_eig = min_gram_eigenvalue(k, pts);
    psd = min_eig >= -1e-9;
  } catch (const DomainError&) {
    // product kernels with a Gaussian block may reject the unit-box sample; retry inside [0,1]
    for (auto& z : pts)
      for (std::size_t j = 0; j < z.x.size(); ++j) z.x[j] = rng.uniform(j + 1, z.x.size() + j);
    psd = psd_check(spec, pts, 1e-9);
  }
  const double c = diag_sup(spec);
  json result = {{"kernel", spec},
                 {"c_K", c},
                 {"c_K_squared", c * c},
                 {"psd_check", psd},
                 {"psd_sample_size", pts.size()},
                 {"min_eigenvalue", min_eig}};
  result["coordinates"] = coords ? json(*coords) : json("any");
  result["domain"] = std::holds_alternative<FermiSobolevKernel>(spec.variant) ? "[0,1] x [0,1]^k" : "[0,1] x R^k";
  out << result.dump(2) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Defensive forecasting: K29*/K29 runs, theorem verification, calibration reports"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "play a forecasting game and write a RunLog");
  run_cmd->add_option("--kernel", ra.kernel, "kernel JSON or path")->required();
  run_cmd->add_option("--algorithm", ra.algorithm,
                      "K29STAR | K29 | baseline_prev_y | constant_half | random_uniform | lemma1");
  run_cmd->add_option("--opponent", ra.opponent, "opponent JSON or path")->required();
  run_cmd->add_option("--rounds", ra.rounds, "number of rounds");
  run_cmd->add_option("--seed", ra.seed, "64-bit run seed");
  run_cmd->add_option("--out", ra.out, "RunLog JSONL path")->required();
  run_cmd->add_option("--repeat", ra.repeat, "independent seeds seed..seed+R-1, run concurrently");
  run_cmd->add_flag("--header", ra.header, "replay CSVs have a header line");
  run_cmd->add_option("--skeptic", ra.skeptic, "skeptic JSON or path (default k29star_eq25)");
  run_cmd->add_option("--initial-capital", ra.initial_capital, "Skeptic's initial capital");

  std::string log_path, checks, nb_path, report_out;
  auto* verify_cmd = app.add_subcommand("verify", "check the theorem inequalities on a RunLog");
  verify_cmd->add_option("log", log_path, "RunLog JSONL")->required();
  verify_cmd->add_option("--checks", checks, "comma list of t1,eq4,t2-trapezoid,t4-witness,t3,lemma1 | all");
  verify_cmd->add_option("--neighborhoods", nb_path, "JSON list of trapezoid neighborhoods");
  verify_cmd->add_option("--out", report_out, "also write the report here");

  std::size_t bins = 10;
  auto* report_cmd = app.add_subcommand("report", "calibration and resolution report");
  report_cmd->add_option("log", log_path, "RunLog JSONL")->required();
  report_cmd->add_option("--bins", bins, "number of equal-width bins");
  report_cmd->add_option("--neighborhoods", nb_path, "JSON list of trapezoid neighborhoods");
  report_cmd->add_option("--out", report_out, "report JSON path; the plot CSV goes next to it");

  std::string kernel_arg;
  auto* info_cmd = app.add_subcommand("kernel-info", "describe a kernel");
  info_cmd->add_option("spec", kernel_arg, "kernel JSON or path");
  info_cmd->add_option("--kernel", kernel_arg, "kernel JSON or path");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(ra, out);
    if (verify_cmd->parsed()) return cmd_verify(log_path, checks, nb_path, report_out, out);
    if (report_cmd->parsed()) {
      if (bins == 0) throw ConfigError("--bins must be at least 1");
      return cmd_report(log_path, bins, nb_path, report_out, out);
    }
    if (info_cmd->parsed()) {
      if (kernel_arg.empty()) throw ConfigError("kernel-info needs a kernel spec");
      return cmd_kernel_info(kernel_arg, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace defcast::cli
