#include "nsq/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nsq {

namespace {

void require_positive(double value, const char* name) {
  if (!std::isfinite(value)) throw std::invalid_argument(std::string(name) + " must be finite");
  if (!(value > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
}

void require_non_negative(double value, const char* name) {
  if (!std::isfinite(value)) throw std::invalid_argument(std::string(name) + " must be finite");
  if (value < 0.0) throw std::invalid_argument(std::string(name) + " must be non-negative");
}

}  // namespace

NSystemParams validate(const NSystemParams& params) {
  require_positive(params.lambda1, "lambda1");
  require_positive(params.lambda2, "lambda2");
  require_positive(params.mu1, "mu1");
  require_positive(params.mu2, "mu2");
  require_non_negative(params.theta_s, "theta_s");
  require_non_negative(params.theta_d, "theta_d");
  return params;
}

bool stability_check(const NSystemParams& params) {
  return params.lambda1 + params.lambda2 < params.mu1 + params.mu2 && params.lambda2 < params.mu2;
}

NSystemParams mirror(const NSystemParams& p) {
  return NSystemParams{
      .lambda1 = p.mu2,
      .lambda2 = p.mu1,
      .mu1 = p.lambda2,
      .mu2 = p.lambda1,
      .theta_s = p.theta_d,
      .theta_d = p.theta_s,
  };
}

std::string to_string(SystemKind kind) {
  return kind == SystemKind::one_sided ? "one-sided" : "two-sided";
}

SystemKind parse_system_kind(const std::string& text) {
  if (text == "one-sided" || text == "one_sided") return SystemKind::one_sided;
  if (text == "two-sided" || text == "two_sided") return SystemKind::two_sided;
  throw std::invalid_argument("unknown system '" + text + "' (expected one-sided or two-sided)");
}

TwoSidedState TwoSidedState::left(int m, int n) {
  if (m < 0 || n < 0 || m + n == 0)
    throw std::invalid_argument("left-queue state needs m, n >= 0 and m + n > 0");
  return {Regime::left, m, n};
}

TwoSidedState TwoSidedState::right(int m, int n) {
  if (m < 0 || n < 0 || m + n == 0)
    throw std::invalid_argument("right-queue state needs m, n >= 0 and m + n > 0");
  return {Regime::right, m, n};
}

TwoSidedState TwoSidedState::both(int i, int j) {
  if (i < 1 || j < 1) throw std::invalid_argument("both-queues state needs i >= 1 and j >= 1");
  return {Regime::both, i, j};
}

int TwoSidedState::supply_count() const {
  switch (regime_) {
    case Regime::left:
      return first_ + second_;
    case Regime::both:
      return first_;
    default:
      return 0;
  }
}

int TwoSidedState::demand_count() const {
  switch (regime_) {
    case Regime::right:
      return first_ + second_;
    case Regime::both:
      return second_;
    default:
      return 0;
  }
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::empty:
      return "empty";
    case Regime::left:
      return "left";
    case Regime::right:
      return "right";
    case Regime::both:
      return "both";
  }
  return "?";
}

std::string to_string(const OneSidedState& s) {
  return "(" + std::to_string(s.m) + "," + std::to_string(s.n) + ")";
}

std::string to_string(const TwoSidedState& s) {
  if (s.regime() == Regime::empty) return "empty";
  return to_string(s.regime()) + "(" + std::to_string(s.first()) + "," +
         std::to_string(s.second()) + ")";
}

}  // namespace nsq
