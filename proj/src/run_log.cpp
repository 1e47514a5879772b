#include "defcast/run_log.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "defcast/errors.hpp"

namespace defcast {

namespace {

nlohmann::json header_json(const RunHeader& h) {
  nlohmann::json j;
  j["kernel"] = h.kernel;
  j["algorithm"] = h.algorithm;
  j["opponent"] = h.opponent ? nlohmann::json(*h.opponent) : nlohmann::json(nullptr);
  if (h.seed) j["seed"] = *h.seed;
  if (!h.skeptic.is_null()) j["skeptic"] = h.skeptic;
  if (h.initial_capital) j["initial_capital"] = *h.initial_capital;
  return j;
}

RunHeader parse_header(const nlohmann::json& j) {
  RunHeader h;
  h.kernel = j.at("kernel").get<KernelSpec>();
  h.algorithm = j.at("algorithm").get<std::string>();
  if (j.contains("opponent") && !j.at("opponent").is_null()) h.opponent = j.at("opponent").get<OpponentSpec>();
  if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("skeptic")) h.skeptic = j.at("skeptic");
  if (j.contains("initial_capital")) h.initial_capital = j.at("initial_capital").get<double>();
  return h;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) throw ContractError("cannot serialize non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_run_log(std::ostream& out, const RunLog& log) {
  out << header_json(log.header).dump() << '\n';
  for (const auto& r : log.rounds) {
    out << "{\"n\":" << r.index << ",\"x\":[";
    for (std::size_t i = 0; i < r.x.size(); ++i) out << (i ? "," : "") << format_double(r.x[i]);
    out << "],\"p\":" << format_double(r.p) << ",\"y\":" << r.y
        << ",\"residual\":" << format_double(r.residual) << "}\n";
  }
}

RunLog read_run_log(std::istream& in, const std::string& name) {
  RunLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        log.header = parse_header(j);
        have_header = true;
        continue;
      }
      Round r;
      r.index = j.at("n").get<std::size_t>();
      r.x = j.at("x").get<std::vector<double>>();
      r.p = j.at("p").get<double>();
      r.y = j.at("y").get<int>();
      r.residual = j.at("residual").get<double>();
      if (r.index != log.rounds.size() + 1)
        throw InputError("round index " + std::to_string(r.index) + " out of sequence");
      if (r.y != 0 && r.y != 1) throw InputError("outcome must be 0 or 1");
      if (!(r.p >= 0.0 && r.p <= 1.0)) throw InputError("forecast outside [0,1]");
      if (!(r.residual >= 0.0)) throw InputError("residual must be nonnegative");
      log.rounds.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(name + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw InputError(name + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw InputError(name + ": missing header line");
  return log;
}

void save_run_log(const std::string& path, const RunLog& log) {
  auto out = open_out(path);
  write_run_log(out, log);
  if (!out) throw InputError("write to '" + path + "' failed");
}

RunLog load_run_log(const std::string& path) {
  auto in = open_in(path);
  return read_run_log(in, path);
}

void write_capital_trace(std::ostream& out, const CapitalTrace& trace) {
  for (std::size_t n = 0; n < trace.values.size(); ++n)
    out << "{\"n\":" << n << ",\"capital\":" << format_double(trace.values[n]) << "}\n";
}

CapitalTrace read_capital_trace(std::istream& in, const std::string& name) {
  CapitalTrace trace;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("n").get<std::size_t>() != trace.values.size())
        throw InputError("capital index out of sequence");
      trace.values.push_back(j.at("capital").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (trace.values.empty()) throw InputError(name + ": empty capital trace");
  trace.initial = trace.values.front();
  return trace;
}

void save_capital_trace(const std::string& path, const CapitalTrace& trace) {
  auto out = open_out(path);
  write_capital_trace(out, trace);
  if (!out) throw InputError("write to '" + path + "' failed");
}

CapitalTrace load_capital_trace(const std::string& path) {
  auto in = open_in(path);
  return read_capital_trace(in, path);
}

}  // namespace defcast
