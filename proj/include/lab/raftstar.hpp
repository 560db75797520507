#pragma once

#include "lab/core.hpp"

namespace lab::raft {

// Reasons receive_append rejects; kept for trace labels and tests.
enum class AppendReject { None, StaleTerm, PrevMismatch, WouldShorten };

struct RaftState {
  ServerId me = 0;
  int n = 1;
  Ballot current_term = 0;
  bool leader = false;
  std::vector<Entry> log;  // term + shadow bal + val
  Index last_index = kNilIndex;
  Index log_tail = kNilIndex;
  Index commit_index = kNilIndex;
  // Ghost vote history, visible only to checkers.
  std::map<Index, std::set<std::pair<Ballot, Value>>> votes;
};

RaftState make_initial(ServerId me, int n);

Entry entry_at(const RaftState& s, Index i);
Ballot term_at(const RaftState& s, Index i);  // -1 beyond the log

struct RequestVoteResult {
  bool ok = false;
  RequestVoteMsg msg;            // broadcast
  RequestVoteOkMsg self_reply;   // synthesized local grant
};

// Bumps the term to the next one owned by this server and solicits votes.
RequestVoteResult request_vote(RaftState& s);

// Grant iff m.term > current_term and the candidate's log is at least as
// up to date (B.2 Phase1b three-disjunct form). Non-grants change nothing.
std::optional<RequestVoteOkMsg> receive_vote(RaftState& s, const RequestVoteMsg& m);

// Safe-value merge over the vote replies: entries up to our own last_index are
// kept, recovered entries are installed restamped to the current term
// (term and shadow ballot). When anything was recovered the whole prefix's
// shadow ballot is rewritten too — the implicit self-accept of the merged log,
// which is what lets the merged state replay as Phase2a+Phase2b per index.
bool become_leader(RaftState& s, const std::vector<RequestVoteOkMsg>& replies,
                   const QuorumSystem& q);

struct AppendResult {
  bool ok = false;
  AppendMsg msg;        // broadcast to all other servers
  AppendOkMsg self_ack; // the implicit self-append, already applied
};

// Appends vals (non-empty) at log_tail+1.. and emits Append covering
// prev+1..new last_index. prev must be -1 or <= log_tail. The leader's local
// mutation runs through the same acceptance path as followers.
AppendResult append_entries(RaftState& s, const std::vector<Value>& vals, Index prev,
                            const std::vector<int64_t>& op_ids = {});

std::optional<AppendOkMsg> receive_append(RaftState& s, const AppendMsg& m,
                                          AppendReject* why = nullptr);

// commit_index := max(commit_index, min over ack last_index). Needs f acks
// from distinct servers other than the leader (the self-ack is implicit).
bool leader_learn(RaftState& s, const std::vector<AppendOkMsg>& acks, const QuorumSystem& q);

void canon_state(Canon& c, const RaftState& s);
uint64_t state_digest(const RaftState& s);

}  // namespace lab::raft
