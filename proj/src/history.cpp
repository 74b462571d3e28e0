#include "bagged_rl/history.hpp"

#include "bagged_rl/errors.hpp"

namespace bagged_rl {

StepView step_view(const BagRecord& bag, int K, int k) {
  if (k < 1 || k > K) throw std::out_of_range("step index outside the bag");
  auto uk = static_cast<std::size_t>(k);
  if (bag.C.size() < uk || bag.A.size() < uk - 1 || bag.M.size() < uk - 1)
    throw IncompleteHistoryError("bag record too short for step " + std::to_string(k));
  StepView v;
  v.K = K;
  v.k = k;
  v.E_prev = bag.prev_E;
  v.R_prev = bag.prev_R;
  v.C = std::span<const double>(bag.C.data(), uk);
  v.A = std::span<const int>(bag.A.data(), uk - 1);
  v.M = std::span<const double>(bag.M.data(), uk - 1);
  return v;
}

ObservedHistory::ObservedHistory(int K) : K_(K) {
  if (K < 1) throw ConfigError("K must be positive");
}

void ObservedHistory::begin_bag(double prev_E, double prev_R) {
  if (phase_ != Phase::Idle) throw ProtocolError("begin_bag called inside a bag");
  partial_ = BagRecord{};
  partial_.prev_E = prev_E;
  partial_.prev_R = prev_R;
  phase_ = Phase::Context;
}

void ObservedHistory::observe_context(double c) {
  if (phase_ != Phase::Context) throw ProtocolError("context observed out of order");
  partial_.C.push_back(c);
  phase_ = Phase::Action;
}

void ObservedHistory::record_action(int a) {
  if (phase_ != Phase::Action) throw ProtocolError("action recorded out of order");
  if (a != 0 && a != 1) throw ShapeError("actions are binary");
  partial_.A.push_back(a);
  phase_ = Phase::Mediator;
}

void ObservedHistory::observe_mediator(double m) {
  if (phase_ != Phase::Mediator) throw ProtocolError("mediator observed out of order");
  partial_.M.push_back(m);
  phase_ = static_cast<int>(partial_.M.size()) == K_ ? Phase::End : Phase::Context;
}

const BagRecord& ObservedHistory::end_bag(double E, double R, double O) {
  if (phase_ != Phase::End) throw ProtocolError("bag ended before all K steps were observed");
  partial_.E = E;
  partial_.R = R;
  partial_.O = O;
  bags_.push_back(std::move(partial_));
  partial_ = BagRecord{};
  phase_ = Phase::Idle;
  return bags_.back();
}

StepView ObservedHistory::current() const {
  if (phase_ != Phase::Action) throw IncompleteHistoryError("no decision pending");
  return step_view(partial_, K_, static_cast<int>(partial_.C.size()));
}

StepView ObservedHistory::at(std::size_t t, int k) const {
  if (t >= bags_.size()) throw std::out_of_range("bag index outside the history");
  return step_view(bags_[t], K_, k);
}

}  // namespace bagged_rl
