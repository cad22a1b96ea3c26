#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dwellcert/matrix_grid_fn.hpp"
#include "dwellcert/synthesis.hpp"
#include "dwellcert/systems.hpp"

namespace dwellcert {

using Signal = std::function<Vector(double)>;          // t -> w_c(t)
using SequenceSignal = std::function<Vector(int)>;     // k -> w_d(k)

/// Timed samples of a hybrid run. Impulse instants appear as paired rows:
/// the left-limit sample (mark 1) followed by the right-limit sample (mark 2).
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> z_c;          // per sample (empty vectors when q_c = 0)
  std::vector<Vector> w_c;          // recorded continuous input per sample
  std::vector<int> impulse_mark;    // 0 plain, 1 left limit, 2 right limit
  std::vector<double> impulse_times;
  std::vector<Vector> z_d;          // per impulse
  std::vector<Vector> w_d;          // per impulse

  std::size_t size() const { return times.size(); }
};

/// Deterministic xorshift-based generator; identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() {
    std::uint64_t x = state_;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    return state_ = x;
  }
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double exponential(double mean) {
    double u = uniform01();
    if (u >= 1.0) u = 0.5;
    return -mean * std::log1p(-u);
  }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

/// Admissible impulse instants on (0, horizon): range specs draw gaps uniformly
/// from [t_min, t_max]; minimum specs draw t_bar plus a truncated exponential.
std::vector<double> sample_dwell_sequence(const DwellTimeSpec& spec, double horizon,
                                          std::uint64_t seed);

struct SimOptions {
  double dt = 1e-3;
  double horizon = 0.0;        // 0: last impulse + one dwell period
  double divergence_norm = 1e12;
};

/// RK4 flow integration with exact landing on every impulse instant; jumps are
/// applied atomically, z_d(k) samples the left-limit state.
Trajectory simulate(const ImpulsiveSystemd& sys, const std::vector<double>& impulses,
                    const Signal& w_c, const SequenceSignal& w_d, const Vector& x0,
                    const SimOptions& opts = {});

/// Plant plus lower/upper observers driven by the plant's measurements.
struct IntervalRun {
  Trajectory plant;
  Trajectory lower;
  Trajectory upper;

  /// Worst violation of lower <= plant <= upper over all samples (<= 0 holds).
  double enclosure_violation() const;
};

struct BoundedSignal {
  Signal value, lo, hi;
};
struct BoundedSequence {
  SequenceSignal value, lo, hi;
};

IntervalRun run_interval_observer(const ImpulsiveSystemd& plant,
                                  const ObserverDesign& design,
                                  const std::vector<double>& impulses,
                                  const BoundedSignal& w_c, const BoundedSequence& w_d,
                                  const Vector& x0, const Vector& x0_lo,
                                  const Vector& x0_hi, const SimOptions& opts = {});

/// Switched-system variant on the lifted state; `modes[k]` is the active mode
/// on the k-th inter-switch interval. Enclosure is checked on active blocks.
struct SwitchedIntervalRun {
  IntervalRun lifted;
  std::vector<Index> modes;            // active mode per interval
  std::vector<double> switch_times;
  Index block_dim = 0;

  double active_enclosure_violation() const;
};

SwitchedIntervalRun run_switched_interval_observer(
    const SwitchedSystemd& sw, const SwitchedObserverDesign& design,
    const std::vector<double>& switch_times, const std::vector<Index>& modes,
    const BoundedSignal& w, const Vector& x0, const Vector& x0_lo, const Vector& x0_hi,
    const SimOptions& opts = {});

struct EmpiricalGainOptions {
  int trials = 100;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  double horizon = 0.0;  // 0: auto from the dwell spec
};

struct EmpiricalGainResult {
  double worst_ratio = 0.0;
  int trials_used = 0;
  int trials_skipped = 0;
};

/// Worst L1/l1 energy ratio over random admissible impulse sequences and
/// random nonnegative finite-energy inputs (pulse trains), starting from x0=0.
EmpiricalGainResult empirical_gain(const ImpulsiveSystemd& sys, const DwellTimeSpec& spec,
                                   const EmpiricalGainOptions& opts = {});

/// Switched counterpart on the physical error dynamics: the error state is
/// continuous across switches, the output is M e of the active mode only.
EmpiricalGainResult empirical_gain_switched(const SwitchedSystemd& sw,
                                            const SwitchedObserverDesign& design,
                                            const EmpiricalGainOptions& opts = {});

/// L1 norm of a sampled signal by trapezoidal quadrature (impulse pairs carry
/// zero width, so plain consecutive-sample trapezoids are exact-in-structure).
double trapezoid_l1(const std::vector<double>& times, const std::vector<Vector>& values);

}  // namespace dwellcert
