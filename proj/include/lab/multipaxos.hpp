#pragma once

#include "lab/core.hpp"

namespace lab::paxos {

// Full replicated-server state for one MultiPaxos replica. Pure value type;
// every operation is a free function (state, event) -> (state', outputs).
struct PaxosState {
  ServerId me = 0;
  int n = 1;
  Ballot ballot = 0;       // highestBallot
  bool leader = false;     // phase1Succeeded
  std::vector<Entry> log;  // per-index instance (bal, val); term stays -1
  Index log_tail = kNilIndex;
  std::map<Index, std::pair<Ballot, Value>> chosen;
  // Ghost vote history, visible only to checkers.
  std::map<Index, std::set<std::pair<Ballot, Value>>> votes;
};

PaxosState make_initial(ServerId me, int n);

Entry entry_at(const PaxosState& s, Index i);
void set_entry(PaxosState& s, Index i, const Entry& e);

// ballot := b, leader := false. Rejected (returns false) unless b > ballot.
bool increase_ballot(PaxosState& s, Ballot b);

// Emits Prepare(ballot) for broadcast. State unchanged; rejected while leader
// or when the current ballot belongs to another proposer. The candidate's own
// reply is synthesized locally (self_prepare_ok) since phase1b is strict.
std::optional<PrepareMsg> phase1a(const PaxosState& s);
PrepareOkMsg self_prepare_ok(const PaxosState& s);

// If m.bal > ballot: adopt it, drop leadership, reply with the full log.
// Stale prepares are silently ignored.
std::optional<PrepareOkMsg> phase1b(PaxosState& s, const PrepareMsg& m);

// Merge the highest-ballot entry per index over 0..max(reply log tails).
// Requires: not leader, all replies at the current ballot, a self reply,
// and a quorum of distinct acceptors.
bool become_leader(PaxosState& s, const std::vector<PrepareOkMsg>& replies,
                   const QuorumSystem& q);

struct ProposeResult {
  bool ok = false;
  AcceptMsg accept;     // broadcast to all other servers
  AcceptOkMsg self_ack; // the implicit self-accept, already applied
};

// Emits Accept(i, ballot, v); the leader's own acceptance happens inline.
ProposeResult propose(PaxosState& s, Index i, const Value& v, int64_t op_id = -1);

// Phase2b. Accept iff m.bal >= ballot; demotes on strictly higher ballots.
std::optional<AcceptOkMsg> accept(PaxosState& s, const AcceptMsg& m);

// Learn(i): f+1 matching acceptOKs choose (b, v) at i. Conflicting acks or a
// thin set are rejected. Any server may learn (acceptOKs are broadcast).
bool learn(PaxosState& s, const std::vector<AcceptOkMsg>& acks, const QuorumSystem& q);

void canon_state(Canon& c, const PaxosState& s);
uint64_t state_digest(const PaxosState& s);
bool states_equal(const PaxosState& a, const PaxosState& b);
// Field-by-field mismatch description, empty when equal (checker diagnostics).
std::string diff_states(const PaxosState& a, const PaxosState& b);

}  // namespace lab::paxos
