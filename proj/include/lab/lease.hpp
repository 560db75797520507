#pragma once

#include "lab/multipaxos.hpp"
#include "lab/raftstar.hpp"

namespace lab::lease {

// Quorum-lease state bolted onto a base protocol. All of it is Δ state: the
// drop-Δ projection of any lease operation leaves the base protocol alone.
struct LeaseDelta {
  Tick timer_view = 0;  // last observed value of the shared logical timer
  Tick lease_duration = 2000;
  std::map<ServerId, Tick> granted;   // holder -> deadline, granted by me
  std::map<ServerId, Tick> received;  // grantor -> deadline, held by me
  Index apply_index = kNilIndex;
  std::map<std::string, std::string> kv;  // materialized applied prefix
};

// Holders I granted whose leases are still live at the current timer.
std::vector<ServerId> active_grants(const LeaseDelta& d);

// True iff a quorum of grantors all hold unexpired leases for this server.
bool lease_is_active(const LeaseDelta& d, const QuorumSystem& q);

// leases[me][holder] := timer + duration; returns the grant message.
GrantLeaseMsg grant_lease(LeaseDelta& d, ServerId me, ServerId holder);
void receive_grant(LeaseDelta& d, const GrantLeaseMsg& m);
void update_timer(LeaseDelta& d, Tick t);

struct PqlState {
  paxos::PaxosState base;
  LeaseDelta lease;
};

struct RqlState {
  raft::RaftState base;
  LeaseDelta lease;
};

// PQL commit gate (B.3 CanCommitAt) over a global view: some quorum voted
// (i, b, v) and every holder granted a lease by a quorum member also voted.
struct LeaseView {
  const std::map<Index, std::set<std::pair<Ballot, Value>>>* votes = nullptr;
  const LeaseDelta* lease = nullptr;
};
bool can_commit_at(const std::vector<LeaseView>& universe, const QuorumSystem& q, Index i,
                   Ballot b, const Value& v);

// Holder-gated Learn (Fig 11): a quorum of matching acks whose advertised
// holders have all acked too. Applies paxos::learn on success.
bool pql_learn(PqlState& s, const std::vector<AcceptOkMsg>& acks, const QuorumSystem& q);

// Raft*-PQL LeaderLearn (Fig 13): f follower acks plus the implicit self-ack;
// the holder set is the union of the acks' holders and the holders granted by
// the leader itself. Commit advances only to indexes acked by every holder.
bool rql_leader_learn(RqlState& s, const std::vector<AppendOkMsg>& acks, const QuorumSystem& q);

struct ReadOutcome {
  bool served = false;
  std::string value;  // empty when the key was never written
};

// Serve a linearizable read from the local replica, or refuse (caller falls
// back to the logged-read path). Consumes zero network messages.
ReadOutcome local_read_pql(const PqlState& s, const QuorumSystem& q, const std::string& key);
ReadOutcome local_read_rql(const RqlState& s, const QuorumSystem& q, const std::string& key);

// Apply the next entry in index order; rejected out of order or before the
// commit gate covers it.
bool apply_pql(PqlState& s, Index i);
bool apply_rql(RqlState& s, Index i);

// Largest log index whose entry writes `key` (kNilIndex when none).
Index max_index_touching(const std::vector<Entry>& log, const std::string& key);

void canon_delta(Canon& c, const LeaseDelta& d);

}  // namespace lab::lease
