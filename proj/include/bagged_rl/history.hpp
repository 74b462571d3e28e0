#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bagged_rl {

// One bag of the testbed: contexts, actions, mediators for k = 1..K, then the
// end-of-bag engagement E, reward R and emission O. prev_E / prev_R are the
// previous bag's E and R (or the initial E_0, R_0).
struct BagRecord {
  double prev_E = 0.0, prev_R = 0.0;
  std::vector<double> C, M;
  std::vector<int> A;
  double E = 0.0, R = 0.0, O = 0.0;
};

struct BagTrajectory {
  double E0 = 0.0, R0 = 0.0;
  std::vector<BagRecord> bags;
};

// Everything an agent may condition on just before choosing A_{d,k}.
// k is 1-based; C holds C_{d,1..k}, A and M hold steps 1..k-1.
struct StepView {
  int K = 0;
  int k = 1;
  double E_prev = 0.0, R_prev = 0.0;
  std::span<const double> C;
  std::span<const int> A;
  std::span<const double> M;

  double context() const { return C[static_cast<std::size_t>(k - 1)]; }
};

StepView step_view(const BagRecord& bag, int K, int k);

class ObservedHistory {
 public:
  explicit ObservedHistory(int K);

  void begin_bag(double prev_E, double prev_R);
  void observe_context(double c);
  void record_action(int a);
  void observe_mediator(double m);
  const BagRecord& end_bag(double E, double R, double O);

  // View at the in-progress decision (context seen, action not yet taken).
  StepView current() const;
  // View at (bag t, step k) of a completed bag; t is zero-based, k 1-based.
  StepView at(std::size_t t, int k) const;

  int K() const { return K_; }
  std::size_t completed() const { return bags_.size(); }
  bool in_bag() const { return phase_ != Phase::Idle; }
  bool awaiting_action() const { return phase_ == Phase::Action; }
  int step() const { return static_cast<int>(partial_.C.size()); }
  const std::vector<BagRecord>& bags() const { return bags_; }
  const BagRecord& partial() const { return partial_; }

 private:
  enum class Phase { Idle, Context, Action, Mediator, End };
  int K_;
  Phase phase_ = Phase::Idle;
  std::vector<BagRecord> bags_;
  BagRecord partial_;
};

}  // namespace bagged_rl
