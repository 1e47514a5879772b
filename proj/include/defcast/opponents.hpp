#pragma once

// Reality I (data) and Reality II (outcomes).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "defcast/kernel.hpp"
#include "defcast/rng.hpp"
#include "defcast/round.hpp"
#include "json.hpp"

namespace defcast {

// --- Reality I -------------------------------------------------------------

// k independent uniform [0,1] coordinates per round.
struct IidUniformData {
  std::size_t k = 1;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const IidUniformData&, const IidUniformData&) = default;
};

// x_n = [n mod 2]. Deterministic; the seed is carried for schema symmetry.
struct ParityFeatureData {
  std::optional<std::uint64_t> seed;

  friend bool operator==(const ParityFeatureData&, const ParityFeatureData&) = default;
};

// Feature columns of a replay CSV.
struct ReplayData {
  std::string path;
  bool header = false;

  friend bool operator==(const ReplayData&, const ReplayData&) = default;
};

using RealityOneSpec = std::variant<IidUniformData, ParityFeatureData, ReplayData>;

// --- Reality II ------------------------------------------------------------

struct BernoulliOutcomes {
  double theta = 0.5;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const BernoulliOutcomes&, const BernoulliOutcomes&) = default;
};

// y ~ Bernoulli(sigmoid(bias + parity_weight * (n mod 2) + sum_i weights[i] * x[i])).
struct LogisticOutcomes {
  std::vector<double> weights;
  double bias = 0.0;
  double parity_weight = 0.0;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const LogisticOutcomes&, const LogisticOutcomes&) = default;
};

// Outcome column of a replay CSV.
struct ReplayOutcomes {
  std::string path;
  bool header = false;

  friend bool operator==(const ReplayOutcomes&, const ReplayOutcomes&) = default;
};

// Worst-case Reality II: sees p_n and maximizes the drift-norm increment.
struct AdversaryOutcomes {
  friend bool operator==(const AdversaryOutcomes&, const AdversaryOutcomes&) = default;
};

using RealityTwoSpec =
    std::variant<BernoulliOutcomes, LogisticOutcomes, ReplayOutcomes, AdversaryOutcomes>;

struct OpponentSpec {
  RealityOneSpec reality1;
  RealityTwoSpec reality2;

  // Fills every missing seed from the run seed, so the resolved spec alone
  // reproduces the run.
  OpponentSpec resolved(std::uint64_t run_seed) const;

  // Number of data coordinates produced, if known without touching files.
  std::optional<std::size_t> data_dimension() const;

  bool is_adversary() const { return std::holds_alternative<AdversaryOutcomes>(reality2); }

  // Applies a global "replay CSV has a header line" switch.
  void set_replay_header(bool header);

  friend bool operator==(const OpponentSpec&, const OpponentSpec&) = default;
};

void to_json(nlohmann::json& j, const OpponentSpec& spec);
void from_json(const nlohmann::json& j, OpponentSpec& spec);

// --- moves -----------------------------------------------------------------

// Returns the outcome that makes the drift norm grow the most. With
// T = sum_i K(z, z_i)(y_i - p_i) and K_d = K(z, z), the squared-norm
// increment is 2(y-p)T + (y-p)^2 K_d; ties go to y = 1.
int reality2_adversary_move(std::span<const Round> history, double p_new,
                            std::span<const double> x_new, const KernelSpec& kernel);

int bernoulli_move(double theta, const CounterRng& rng, std::uint64_t counter);

std::vector<double> parity_feature_move(std::size_t n);

struct ReplayRow {
  std::vector<double> x;
  int y = 0;
};

// Parses "x_1,...,x_k,y" rows. Throws InputError naming the 1-based line.
std::vector<ReplayRow> parse_replay(std::istream& in, bool header, const std::string& name = "replay");
std::vector<ReplayRow> replay_source(const std::string& path, bool header = false);

// --- runtime players -------------------------------------------------------

class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual std::vector<double> next(std::size_t n) = 0;
  virtual std::optional<std::size_t> length() const { return std::nullopt; }
  virtual std::size_t dimension() const = 0;
};

class OutcomeSource {
 public:
  virtual ~OutcomeSource() = default;
  // Called after Forecaster has announced p for round n.
  virtual int next(std::size_t n, std::span<const Round> history, std::span<const double> x,
                   double p) = 0;
  virtual std::optional<std::size_t> length() const { return std::nullopt; }
};

// `spec` must be resolved (all seeds present).
std::unique_ptr<DataSource> make_data_source(const RealityOneSpec& spec);
std::unique_ptr<OutcomeSource> make_outcome_source(const RealityTwoSpec& spec,
                                                   const KernelSpec& kernel);

}  // namespace defcast
