#include "defcast/forecaster.hpp"

#include <cmath>
#include <functional>

#include "defcast/errors.hpp"

namespace defcast {

std::string_view to_string(Algorithm a) { return a == Algorithm::k29_star ? "K29STAR" : "K29"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "K29STAR") return Algorithm::k29_star;
  if (name == "K29") return Algorithm::k29;
  throw ConfigError("unknown forecasting algorithm '" + std::string(name) + "'");
}

SCurve::SCurve(const Forecaster& owner, std::span<const double> x) : owner_(&owner) {
  const auto& k = owner.kernel_;
  validate_point(k, PointRef(0.0, x));
  weights_.resize(owner.history_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const auto& r = owner.history_[i];
    if (r.x.size() != x.size()) throw DomainError("data dimension changed between rounds");
    weights_[i] = data_part(k, x, r.x) * owner.past_err_[i];
  }
  data_diag_ = data_part(k, x, x);
}

double SCurve::cross_sum(double p) const {
  const auto& k = owner_->kernel_;
  const auto& past = owner_->past_p_;
  double s = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) s += forecast_part(k, p, past[i]) * weights_[i];
  return s;
}

double SCurve::diagonal(double p) const { return forecast_part(owner_->kernel_, p, p) * data_diag_; }

double SCurve::operator()(double p) const {
  double s = cross_sum(p);
  if (owner_->algorithm_ == Algorithm::k29_star) s += 0.5 * diagonal(p) * (1.0 - 2.0 * p);
  return s;
}

Forecaster::Forecaster(KernelSpec kernel, Algorithm algorithm)
    : kernel_(std::move(kernel)), algorithm_(algorithm) {
  kernel_.validate();
  const double c = diag_sup(kernel_);
  c_k_sq_ = c * c;
}

SCurve Forecaster::s_curve(std::span<const double> x) const { return SCurve(*this, x); }

double Forecaster::s_value(std::span<const double> x, double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("forecast must lie in [0,1]");
  return s_curve(x)(p);
}

double Forecaster::root_tolerance() const { return 1e-12 * (1.0 + c_k_sq_ * (1.0 + abs_err_sum_)); }

ForecastChoice Forecaster::next_forecast(std::span<const double> x) const {
  const SCurve s = s_curve(x);
  // K29 on the first round: S is identically zero; play the neutral value.
  if (algorithm_ == Algorithm::k29 && history_.empty()) return {0.5, 0.0, false};
  return select_forecast(std::cref(s), root_tolerance());
}

void Forecaster::update(Round round) {
  if (round.index != history_.size() + 1)
    throw ContractError("round index " + std::to_string(round.index) + " does not follow " +
                        std::to_string(history_.size()));
  if (round.y != 0 && round.y != 1) throw ContractError("outcome must be 0 or 1");
  if (!(round.p >= 0.0 && round.p <= 1.0)) throw ContractError("forecast must lie in [0,1]");
  const SCurve s = s_curve(round.x);
  const double e = round.error();
  const double kd = s.diagonal(round.p);
  drift_sq_ += 2.0 * e * s.cross_sum(round.p) + e * e * kd;
  variance_budget_ += round.p * (1.0 - round.p) * kd;
  diagonal_budget_ += kd;
  residual_sum_ += round.residual;
  abs_err_sum_ += std::fabs(e);
  past_p_.push_back(round.p);
  past_err_.push_back(e);
  history_.push_back(std::move(round));
}

RunLog forecast_stream(const KernelSpec& kernel, Algorithm algorithm, std::span<const Observation> stream) {
  Forecaster f(kernel, algorithm);
  RunLog log;
  log.header.kernel = kernel;
  log.header.algorithm = std::string(to_string(algorithm));
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::size_t n = i + 1;
    const auto& obs = stream[i];
    if (obs.y != 0 && obs.y != 1)
      throw InputError("round " + std::to_string(n) + ": outcome must be 0 or 1");
    ForecastChoice choice;
    try {
      choice = f.next_forecast(obs.x);
    } catch (const DomainError& e) {
      throw InputError("round " + std::to_string(n) + ": " + e.what());
    }
    f.update(Round{n, obs.x, choice.p, obs.y, choice.residual});
  }
  log.rounds = f.history();
  return log;
}

}  // namespace defcast
