#pragma once

// RunLog persistence as JSONL: one header object, then one object per round.
//
//   {"algorithm":"K29STAR","kernel":{...},"opponent":{...},...}
//   {"n":1,"x":[0.2,0.7],"p":0.5,"y":1,"residual":0}
//
// Round values are written with 17 significant digits, so every double reads
// back bit-identical. The capital trace is a parallel file of
// {"n":k,"capital":K_k} lines.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "defcast/kernel.hpp"
#include "defcast/opponents.hpp"
#include "defcast/round.hpp"
#include "json.hpp"

namespace defcast {

struct RunHeader {
  KernelSpec kernel;
  std::string algorithm = "K29STAR";
  std::optional<OpponentSpec> opponent;
  std::optional<std::uint64_t> seed;
  nlohmann::json skeptic;  // null when the run had no Skeptic
  std::optional<double> initial_capital;

  friend bool operator==(const RunHeader&, const RunHeader&) = default;
};

struct RunLog {
  RunHeader header;
  std::vector<Round> rounds;

  friend bool operator==(const RunLog&, const RunLog&) = default;
};

struct CapitalTrace {
  double initial = 0.0;
  std::vector<double> values;  // K_0 = initial, K_1, ..., K_N

  friend bool operator==(const CapitalTrace&, const CapitalTrace&) = default;
};

std::string format_double(double v);

void write_run_log(std::ostream& out, const RunLog& log);
RunLog read_run_log(std::istream& in, const std::string& name = "runlog");
void save_run_log(const std::string& path, const RunLog& log);
RunLog load_run_log(const std::string& path);

void write_capital_trace(std::ostream& out, const CapitalTrace& trace);
CapitalTrace read_capital_trace(std::istream& in, const std::string& name = "capital");
void save_capital_trace(const std::string& path, const CapitalTrace& trace);
CapitalTrace load_capital_trace(const std::string& path);

}  // namespace defcast
