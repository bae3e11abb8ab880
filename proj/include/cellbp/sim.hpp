#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cellbp/error.hpp"
#include "cellbp/model.hpp"
#include "cellbp/parallel.hpp"
#include "cellbp/random.hpp"

namespace cellbp {

enum class EventKind : std::uint8_t {
  SymSelfRenew = 1,  // (+1, 0, 0)
  Asym = 2,          // ( 0,+1, 0)
  SymDiff = 3,       // (-1,+2, 0)
  DudRenew = 4,      // ( 0, 0,+1)
};

struct CountChange {
  int dx = 0;
  int dy = 0;
  int dz = 0;

  friend bool operator==(const CountChange&, const CountChange&) = default;
};

inline CountChange count_change(EventKind kind) {
  switch (kind) {
    case EventKind::SymSelfRenew: return {1, 0, 0};
    case EventKind::Asym: return {0, 1, 0};
    case EventKind::SymDiff: return {-1, 2, 0};
    case EventKind::DudRenew: return {0, 0, 1};
  }
  return {};
}

inline std::optional<EventKind> kind_from_change(CountChange c) {
  for (auto k : {EventKind::SymSelfRenew, EventKind::Asym, EventKind::SymDiff, EventKind::DudRenew}) {
    if (count_change(k) == c) return k;
  }
  return std::nullopt;
}

inline int event_index(EventKind kind) { return static_cast<int>(kind); }

struct EventRecord {
  double t = 0.0;
  EventKind kind = EventKind::SymSelfRenew;
  // Counts after the event.
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  CountChange change() const { return count_change(kind); }
};

struct CellCounts {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
};

struct Trajectory {
  std::int64_t s0 = 0;
  std::vector<EventRecord> events;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }

  // Viable count just before event i.
  std::int64_t viable_before(std::size_t i) const { return i == 0 ? s0 : events[i - 1].x; }
  double time_before(std::size_t i) const { return i == 0 ? 0.0 : events[i - 1].t; }

  // Right-continuous: an event at exactly t is already counted.
  CellCounts counts_at(double t) const {
    CellCounts c{s0, 0, 0};
    for (const auto& e : events) {
      if (e.t > t) break;
      c = {e.x, e.y, e.z};
    }
    return c;
  }

  bool extinct() const { return !events.empty() && events.back().x == 0; }

  std::optional<double> extinction_time() const {
    if (!extinct()) return std::nullopt;
    return events.back().t;
  }
};

// Returns an empty string when the trajectory satisfies its invariants.
inline std::string trajectory_violation(const Trajectory& traj) {
  if (traj.s0 < 0) return "s0 must be >= 0";
  CellCounts c{traj.s0, 0, 0};
  double last_t = 0.0;
  for (std::size_t i = 0; i < traj.events.size(); ++i) {
    const auto& e = traj.events[i];
    const std::string where = "event " + std::to_string(i + 1) + ": ";
    if (c.x <= 0) return where + "occurs after viable cells are exhausted";
    if (!(e.t > last_t) || !std::isfinite(e.t)) return where + "event times must be strictly increasing";
    const auto d = e.change();
    c = {c.x + d.dx, c.y + d.dy, c.z + d.dz};
    if (e.x != c.x || e.y != c.y || e.z != c.z) return where + "running counts are inconsistent";
    last_t = e.t;
  }
  return {};
}

// Builds a trajectory from a sequence of (t, change) rows, e.g. read from CSV.
inline Trajectory trajectory_from_changes(std::int64_t s0,
                                          const std::vector<std::pair<double, CountChange>>& rows) {
  Trajectory traj;
  traj.s0 = s0;
  traj.events.reserve(rows.size());
  CellCounts c{s0, 0, 0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [t, change] = rows[i];
    auto kind = kind_from_change(change);
    if (!kind) {
      throw Error(ErrorKind::MalformedObservation,
                  "row " + std::to_string(i + 1) + ": count change is not one of the four event types");
    }
    c.x += change.dx;
    c.y += change.dy;
    c.z += change.dz;
    traj.events.push_back({t, *kind, c.x, c.y, c.z});
  }
  if (auto v = trajectory_violation(traj); !v.empty()) throw Error(ErrorKind::MalformedObservation, v);
  return traj;
}


struct PartialRecord {
  double t = 0.0;
  std::int64_t m = 0;  // viable + dud stem cells
  std::int64_t y = 0;  // differentiated cells
};

struct PartialTrajectory {
  std::int64_t m0 = 0;
  std::vector<PartialRecord> records;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

// Observable classes of a partial step.
enum class StepClass : std::uint8_t {
  GainStem,  // (dm, dy) = (+1, 0): event 1 or 4
  Asym,      // (0, +1): event 2
  Diff,      // (-1, +2): event 3
};

inline std::optional<StepClass> classify_step(std::int64_t dm, std::int64_t dy) {
  if (dm == 1 && dy == 0) return StepClass::GainStem;
  if (dm == 0 && dy == 1) return StepClass::Asym;
  if (dm == -1 && dy == 2) return StepClass::Diff;
  return std::nullopt;
}

inline PartialTrajectory project_partial(const Trajectory& traj) {
  PartialTrajectory out;
  out.m0 = traj.s0;
  out.records.reserve(traj.events.size());
  for (const auto& e : traj.events) out.records.push_back({e.t, e.x + e.z, e.y});
  return out;
}

struct SimulateOptions {
  double t_max = std::numeric_limits<double>::infinity();
};

namespace detail {

inline EventKind sample_kind(const Probabilities& p, double u) {
  const double probs[4] = {p.p1, p.p2, p.p3, p.p4};
  double cum = 0.0;
  for (int j = 0; j < 4; ++j) {
    cum += probs[j];
    if (u < cum && probs[j] > 0.0) return static_cast<EventKind>(j + 1);
  }
  // Rounding left u above the cumulative sum; take the last possible outcome.
  for (int j = 3; j >= 0; --j) {
    if (probs[j] > 0.0) return static_cast<EventKind>(j + 1);
  }
  return EventKind::SymDiff;
}

}  // namespace detail

// Event-driven exact simulation: waiting time ~ Exp(r X), outcome drawn from
// the probabilities evaluated at the new event time.
template <ProbabilityModel M>
Trajectory simulate(const M& model, std::uint64_t seed, SimulateOptions opts = {}) {
  Trajectory traj;
  traj.s0 = model.initial_count();
  Rng rng(seed);
  const double r = model.rate();
  CellCounts c{traj.s0, 0, 0};
  double t = 0.0;
  while (c.x > 0) {
    t += rng.exponential(r * static_cast<double>(c.x));
    if (t > opts.t_max) break;
    const auto kind = detail::sample_kind(model.probabilities_at(t), rng.uniform());
    const auto d = count_change(kind);
    c = {c.x + d.dx, c.y + d.dy, c.z + d.dz};
    traj.events.push_back({t, kind, c.x, c.y, c.z});
  }
  return traj;
}

template <ProbabilityModel M>
std::vector<Trajectory> simulate_ensemble(const M& model, std::size_t n_reps, std::uint64_t master_seed,
                                          SimulateOptions opts = {}, unsigned threads = 0) {
  if (n_reps == 0) throw Error(ErrorKind::InvalidArgument, "n_reps must be >= 1");
  std::vector<Trajectory> out(n_reps);
  parallel_for(
      n_reps, [&](std::size_t i) { out[i] = simulate(model, derived_seed(master_seed, i), opts); }, threads);
  return out;
}

}  // namespace cellbp
