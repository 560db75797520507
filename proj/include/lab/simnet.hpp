#pragma once

#include <deque>
#include <random>
#include <utility>

#include "lab/core.hpp"

namespace lab {

struct PartitionEvent {
  Tick at = 0;
  Tick heal = 0;
  std::set<ServerId> side_a;
  std::set<ServerId> side_b;
};

struct FaultSchedule {
  double drop_probability = 0.0;       // per delivery attempt, per destination
  double duplicate_probability = 0.0;  // extra copy scheduled one tick later
  int max_duplicates = 1;
  std::vector<PartitionEvent> partitions;
};

// A timer the harness scheduled for a server; delivered like an envelope.
struct TimerEvent {
  Tick at = 0;
  ServerId server = 0;
  std::string kind;
  int64_t data = 0;
};

struct NetEvent {
  enum class Kind { Envelope, Timer, Quiescent } kind = Kind::Quiescent;
  Envelope envelope;
  TimerEvent timer;
};

// Deterministic seeded discrete-event network. Single-threaded; the same
// (seed, fault schedule, send sequence) yields a byte-identical delivered log.
class SimNet {
 public:
  SimNet(int n, std::vector<std::vector<Tick>> rtt, FaultSchedule faults, uint64_t seed);

  Tick clock() const { return clock_; }
  int cluster_size() const { return n_; }

  // Schedules e at clock + rtt[from][to]; broadcast expands to every server
  // except the sender. Drops and duplicates are applied per destination.
  void send(const Envelope& e);

  void schedule_timer(Tick at, ServerId server, const std::string& kind, int64_t data = 0);

  // Manual partition control (the fault schedule cuts/heals automatically).
  void partition(const std::set<ServerId>& a, const std::set<ServerId>& b, Tick heal_at);
  void heal_all();

  // Pops the earliest deliverable event, advancing the clock to it. Ties are
  // broken by an rng draw among the candidates at the same tick.
  NetEvent next_event();

  const std::vector<Envelope>& delivered_log() const { return delivered_; }
  uint64_t delivered_digest() const;
  int64_t sent_count() const { return sent_count_; }

 private:
  struct InFlight {
    Tick deliver_at = 0;
    Envelope env;
    int64_t seq = 0;  // insertion order, for stable sorting
  };
  struct Held {
    Tick remaining = 1;
    Envelope env;
    int64_t seq = 0;
  };
  struct Cut {
    std::set<ServerId> a;
    std::set<ServerId> b;
    Tick heal_at = 0;
  };

  bool crosses_cut(ServerId x, ServerId y, const Cut& c) const;
  bool cut_active_between(ServerId x, ServerId y) const;
  void apply_due_partitions();
  void heal_due_cuts();
  void schedule_one(const Envelope& e, ServerId dest);

  int n_;
  std::vector<std::vector<Tick>> rtt_;
  FaultSchedule faults_;
  std::mt19937_64 rng_;
  Tick clock_ = 0;
  int64_t seq_ = 0;
  int64_t sent_count_ = 0;
  size_t next_partition_ = 0;
  std::vector<InFlight> in_flight_;
  std::vector<Held> held_;
  std::vector<Cut> cuts_;
  std::vector<TimerEvent> timers_;
  std::vector<Envelope> delivered_;
};

}  // namespace lab
