#include "lab/simnet.hpp"

#include <algorithm>
#include <stdexcept>

namespace lab {

SimNet::SimNet(int n, std::vector<std::vector<Tick>> rtt, FaultSchedule faults, uint64_t seed)
    : n_(n), rtt_(std::move(rtt)), faults_(std::move(faults)), rng_(seed) {
  if (static_cast<int>(rtt_.size()) != n_)
    throw std::invalid_argument("SimNet: rtt matrix size != n");
  auto& ps = faults_.partitions;
  std::sort(ps.begin(), ps.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
}

bool SimNet::crosses_cut(ServerId x, ServerId y, const Cut& c) const {
  return (c.a.count(x) && c.b.count(y)) || (c.b.count(x) && c.a.count(y));
}

bool SimNet::cut_active_between(ServerId x, ServerId y) const {
  for (const auto& c : cuts_)
    if (crosses_cut(x, y, c)) return true;
  return false;
}

void SimNet::schedule_one(const Envelope& e, ServerId dest) {
  ++sent_count_;
  if (faults_.drop_probability > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng_) < faults_.drop_probability) return;
  }
  Envelope copy = e;
  copy.to = dest;
  copy.sent_at = clock_;
  Tick latency = rtt_.at(e.from).at(dest);
  if (latency <= 0) latency = 1;
  int copies = 1;
  if (faults_.duplicate_probability > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int extra = 0;
    while (extra < faults_.max_duplicates && u(rng_) < faults_.duplicate_probability) ++extra;
    copies += extra;
  }
  for (int k = 0; k < copies; ++k) {
    if (cut_active_between(e.from, dest)) {
      held_.push_back(Held{latency + k, copy, seq_++});
    } else {
      in_flight_.push_back(InFlight{clock_ + latency + k, copy, seq_++});
    }
  }
}

void SimNet::send(const Envelope& e) {
  if (e.from < 0 || e.from >= n_) throw std::invalid_argument("send: sender not in cluster");
  if (e.to == kBroadcast) {
    for (ServerId d = 0; d < n_; ++d)
      if (d != e.from) schedule_one(e, d);
  } else {
    schedule_one(e, e.to);
  }
}

void SimNet::schedule_timer(Tick at, ServerId server, const std::string& kind, int64_t data) {
  timers_.push_back(TimerEvent{std::max(at, clock_), server, kind, data});
}

void SimNet::partition(const std::set<ServerId>& a, const std::set<ServerId>& b, Tick heal_at) {
  for (ServerId x : a)
    if (b.count(x)) throw std::invalid_argument("partition: overlapping sides");
  Cut cut{a, b, heal_at};
  // In-flight envelopes crossing the new cut are held with their residual
  // flight time, to be rescheduled at heal.
  std::vector<InFlight> keep;
  for (auto& f : in_flight_) {
    if (crosses_cut(f.env.from, f.env.to, cut)) {
      held_.push_back(Held{std::max<Tick>(1, f.deliver_at - clock_), f.env, f.seq});
    } else {
      keep.push_back(std::move(f));
    }
  }
  in_flight_ = std::move(keep);
  cuts_.push_back(std::move(cut));
}

void SimNet::heal_all() {
  for (auto& c : cuts_) c.heal_at = clock_;
  heal_due_cuts();
}

void SimNet::apply_due_partitions() {
  while (next_partition_ < faults_.partitions.size() &&
         faults_.partitions[next_partition_].at <= clock_) {
    const auto& p = faults_.partitions[next_partition_++];
    partition(p.side_a, p.side_b, p.heal);
  }
}

void SimNet::heal_due_cuts() {
  std::vector<Cut> active;
  for (auto& c : cuts_) {
    if (c.heal_at <= clock_) continue;
    active.push_back(std::move(c));
  }
  cuts_ = std::move(active);
  // Reschedule held envelopes that no longer cross any active cut.
  std::vector<Held> still_held;
  for (auto& h : held_) {
    if (cut_active_between(h.env.from, h.env.to)) {
      still_held.push_back(std::move(h));
    } else {
      in_flight_.push_back(InFlight{clock_ + h.remaining, h.env, h.seq});
    }
  }
  held_ = std::move(still_held);
}

NetEvent SimNet::next_event() {
  // Process scheduled partition changes that become due before the next
  // deliverable event.
  for (;;) {
    Tick next_due = -1;
    auto consider = [&next_due](Tick t) {
      if (next_due < 0 || t < next_due) next_due = t;
    };
    for (const auto& f : in_flight_) consider(f.deliver_at);
    for (const auto& t : timers_) consider(t.at);

    Tick next_cut = -1;
    if (next_partition_ < faults_.partitions.size())
      next_cut = faults_.partitions[next_partition_].at;
    Tick next_heal = -1;
    for (const auto& c : cuts_)
      if (next_heal < 0 || c.heal_at < next_heal) next_heal = c.heal_at;

    Tick admin = -1;
    if (next_cut >= 0) admin = next_cut;
    if (next_heal >= 0 && (admin < 0 || next_heal < admin)) admin = next_heal;

    if (admin >= 0 && (next_due < 0 || admin <= next_due)) {
      clock_ = std::max(clock_, admin);
      apply_due_partitions();
      heal_due_cuts();
      continue;
    }
    if (next_due < 0) return NetEvent{};  // quiescent

    clock_ = std::max(clock_, next_due);

    // Collect all candidates at this tick; pick one via rng for tie-breaking.
    std::vector<size_t> env_idx, timer_idx;
    for (size_t i = 0; i < in_flight_.size(); ++i)
      if (in_flight_[i].deliver_at == next_due) env_idx.push_back(i);
    for (size_t i = 0; i < timers_.size(); ++i)
      if (timers_[i].at == next_due) timer_idx.push_back(i);

    // Stable ordering of candidates before the draw keeps runs reproducible.
    std::sort(env_idx.begin(), env_idx.end(),
              [this](size_t a, size_t b) { return in_flight_[a].seq < in_flight_[b].seq; });

    size_t total = env_idx.size() + timer_idx.size();
    size_t pick = 0;
    if (total > 1) {
      std::uniform_int_distribution<size_t> d(0, total - 1);
      pick = d(rng_);
    }
    if (pick < env_idx.size()) {
      size_t i = env_idx[pick];
      NetEvent ev;
      ev.kind = NetEvent::Kind::Envelope;
      ev.envelope = in_flight_[i].env;
      in_flight_.erase(in_flight_.begin() + static_cast<int64_t>(i));
      delivered_.push_back(ev.envelope);
      return ev;
    }
    size_t i = timer_idx[pick - env_idx.size()];
    NetEvent ev;
    ev.kind = NetEvent::Kind::Timer;
    ev.timer = timers_[i];
    timers_.erase(timers_.begin() + static_cast<int64_t>(i));
    return ev;
  }
}

uint64_t SimNet::delivered_digest() const {
  Canon c;
  for (const auto& e : delivered_) {
    c.i64(e.from);
    c.i64(e.to);
    c.i64(e.sent_at);
    canon_payload(c, e.payload);
  }
  return fnv1a(c.bytes());
}

}  // namespace lab
