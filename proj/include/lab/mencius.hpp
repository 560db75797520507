#pragma once

#include "lab/multipaxos.hpp"
#include "lab/raftstar.hpp"

namespace lab::mencius {

// Round-robin instance partition: server (i mod N) owns index i.
ServerId default_leader(Index i, int n);

// Δ state of one coordinated group. skip_tags[i] marks an index whose Noop
// came from the default leader; such entries are executable before commit.
struct CoordDelta {
  std::vector<bool> skip_tags;
  std::set<std::pair<Index, Value>> executable;
};

bool skip_tag_at(const CoordDelta& d, Index i);
void set_skip_tag(CoordDelta& d, Index i);

// One coordinated-Paxos group (B.5): a MultiPaxos core over group-local
// indexes, a constant default leader, skip tags and an executable set.
// The default leader starts out as the leader at its own round-0 ballot, so
// it can propose without a phase-1 exchange; recovery leaders elect normally.
struct CoorPaxosState {
  paxos::PaxosState base;
  ServerId default_server = 0;  // constant
  bool is_default = false;
  CoordDelta coord;
};

CoorPaxosState make_coorpaxos(ServerId me, int n, ServerId default_server);

// Base propose, restricted: non-Noop values only from the default leader.
// The emitted accept carries the proposer's default flag; the inline
// self-accept applies the skip rule.
paxos::ProposeResult coord_propose(CoorPaxosState& s, Index i, const Value& v,
                                   int64_t op_id = -1);

// Base accept plus: a Noop from the default leader sets the skip tag and
// joins the executable set before any commit quorum forms.
std::optional<AcceptOkMsg> coord_accept(CoorPaxosState& s, const AcceptMsg& m);

// Phase-1 surfaces carrying skip tags alongside the log.
std::optional<PrepareOkMsg> coord_phase1b(CoorPaxosState& s, const PrepareMsg& m);
PrepareOkMsg coord_self_prepare_ok(const CoorPaxosState& s);
bool coord_become_leader(CoorPaxosState& s, const std::vector<PrepareOkMsg>& replies,
                         const QuorumSystem& q);

// Coordinated Raft* group (B.6), mirroring the paxos variant.
struct CoorRaftState {
  raft::RaftState base;
  ServerId default_server = 0;  // constant
  bool is_default = false;
  CoordDelta coord;
};

CoorRaftState make_coorraft(ServerId me, int n, ServerId default_server);

raft::AppendResult coord_append_entries(CoorRaftState& s, const std::vector<Value>& vals,
                                        Index prev, const std::vector<int64_t>& op_ids = {});
std::optional<AppendOkMsg> coord_receive_append(CoorRaftState& s, const AppendMsg& m,
                                                raft::AppendReject* why = nullptr);
std::optional<RequestVoteOkMsg> coord_receive_vote(CoorRaftState& s, const RequestVoteMsg& m);
raft::RequestVoteResult coord_request_vote(CoorRaftState& s);
bool coord_become_leader(CoorRaftState& s, const std::vector<RequestVoteOkMsg>& replies,
                         const QuorumSystem& q);

// Skip-tag merge used by both become_leader flavors: each recovered index
// takes its tag from the same reply that supplied the safe value.
void canon_delta(Canon& c, const CoordDelta& d);

}  // namespace lab::mencius
