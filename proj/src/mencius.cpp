#include "lab/mencius.hpp"

#include <algorithm>

namespace lab::mencius {

ServerId default_leader(Index i, int n) {
  if (i < 0 || n <= 0) return -1;
  return static_cast<ServerId>(i % n);
}

bool skip_tag_at(const CoordDelta& d, Index i) {
  return i >= 0 && i < static_cast<Index>(d.skip_tags.size()) && d.skip_tags[static_cast<size_t>(i)];
}

void set_skip_tag(CoordDelta& d, Index i) {
  if (i < 0) return;
  if (i >= static_cast<Index>(d.skip_tags.size())) d.skip_tags.resize(static_cast<size_t>(i) + 1);
  d.skip_tags[static_cast<size_t>(i)] = true;
}

CoorPaxosState make_coorpaxos(ServerId me, int n, ServerId default_server) {
  CoorPaxosState s;
  s.base = paxos::make_initial(me, n);
  s.default_server = default_server;
  s.is_default = (me == default_server);
  // The default leader owns round 0 and starts pre-elected; everyone's
  // initial ballot points at it so its accepts clear the b >= ballot guard.
  s.base.ballot = make_ballot(0, default_server, n);
  s.base.leader = s.is_default;
  return s;
}

paxos::ProposeResult coord_propose(CoorPaxosState& s, Index i, const Value& v, int64_t op_id) {
  paxos::ProposeResult res;
  if (!is_noop(v) && !s.is_default) return res;  // coordination rule
  if (!s.base.leader || i < 0 || is_noval(v)) return res;
  Entry cur = paxos::entry_at(s.base, i);
  if (!cur.empty() && cur.val != v) return res;
  AcceptMsg m{0, i, s.base.ballot, v, s.is_default, op_id};
  auto self = coord_accept(s, m);
  if (!self) return res;
  res.accept = m;
  res.self_ack = *self;
  res.ok = true;
  return res;
}

std::optional<AcceptOkMsg> coord_accept(CoorPaxosState& s, const AcceptMsg& m) {
  auto ack = paxos::accept(s.base, m);
  if (!ack) return ack;
  if (m.is_default && is_noop(m.val) &&
      ballot_proposer(m.bal, s.base.n) == s.default_server) {
    set_skip_tag(s.coord, m.index);
    s.coord.executable.insert({m.index, m.val});
  }
  return ack;
}

std::optional<PrepareOkMsg> coord_phase1b(CoorPaxosState& s, const PrepareMsg& m) {
  auto ok = paxos::phase1b(s.base, m);
  if (ok) ok->skip_tags = s.coord.skip_tags;
  return ok;
}

PrepareOkMsg coord_self_prepare_ok(const CoorPaxosState& s) {
  PrepareOkMsg ok = paxos::self_prepare_ok(s.base);
  ok.skip_tags = s.coord.skip_tags;
  return ok;
}

namespace {

// The reply whose entry wins the safe-value merge also supplies the skip tag.
template <typename Reply>
std::pair<Entry, bool> winning_entry_and_tag(const std::vector<Reply>& replies, Index i, int n) {
  Entry best;
  bool tag = false;
  for (const auto& r : replies) {
    Entry e = (i < static_cast<Index>(r.log.size())) ? r.log[static_cast<size_t>(i)] : Entry{};
    if (compare_entries(e, best, n) > 0) {
      best = e;
      tag = i < static_cast<Index>(r.skip_tags.size()) && r.skip_tags[static_cast<size_t>(i)];
    }
  }
  return {best, tag};
}

}  // namespace

bool coord_become_leader(CoorPaxosState& s, const std::vector<PrepareOkMsg>& replies,
                         const QuorumSystem& q) {
  Index old_tail = kNilIndex;
  for (const auto& r : replies) old_tail = std::max(old_tail, r.log_tail);
  if (!paxos::become_leader(s.base, replies, q)) return false;
  for (Index i = 0; i <= old_tail; ++i) {
    auto [best, tag] = winning_entry_and_tag(replies, i, s.base.n);
    if (i < static_cast<Index>(s.coord.skip_tags.size()))
      s.coord.skip_tags[static_cast<size_t>(i)] = tag;
    else if (tag)
      set_skip_tag(s.coord, i);
    if (tag && !best.empty()) s.coord.executable.insert({i, best.val});
  }
  return true;
}

CoorRaftState make_coorraft(ServerId me, int n, ServerId default_server) {
  CoorRaftState s;
  s.base = raft::make_initial(me, n);
  s.default_server = default_server;
  s.is_default = (me == default_server);
  s.base.current_term = make_ballot(0, default_server, n);
  s.base.leader = s.is_default;
  return s;
}

namespace {

// The skip rule fires at every index whose instance was (re)written by this
// message: carried entries always, plus prefix ballot rewrites. A restamp is
// a re-accept, so it re-evaluates the rule with the sender's default flag.
void skip_rule_over(CoorRaftState& s, const std::vector<Ballot>& pre_bals, Index upto,
                    Index replaced_from, Ballot term, bool msg_default) {
  if (!msg_default || ballot_proposer(term, s.base.n) != s.default_server) return;
  for (Index i = 0; i <= upto; ++i) {
    bool replaced = i >= replaced_from;
    Ballot old = (i < static_cast<Index>(pre_bals.size())) ? pre_bals[static_cast<size_t>(i)]
                                                           : kNilBallot;
    if (!replaced && old == term) continue;  // instance untouched
    Entry e = raft::entry_at(s.base, i);
    if (is_noop(e.val)) {
      set_skip_tag(s.coord, i);
      s.coord.executable.insert({i, e.val});
    }
  }
}

std::vector<Ballot> snapshot_bals(const raft::RaftState& s) {
  std::vector<Ballot> out;
  out.reserve(s.log.size());
  for (const auto& e : s.log) out.push_back(e.bal);
  return out;
}

}  // namespace

raft::AppendResult coord_append_entries(CoorRaftState& s, const std::vector<Value>& vals,
                                        Index prev, const std::vector<int64_t>& op_ids) {
  for (const auto& v : vals)
    if (!is_noop(v) && !s.is_default) return {};  // coordination rule
  Index first_new = s.base.log_tail + 1;
  std::vector<Ballot> pre_bals = snapshot_bals(s.base);
  auto res = raft::append_entries(s.base, vals, prev, op_ids);
  if (!res.ok) return res;
  res.msg.is_default = s.is_default;
  skip_rule_over(s, pre_bals, s.base.last_index, first_new, s.base.current_term, s.is_default);
  return res;
}

std::optional<AppendOkMsg> coord_receive_append(CoorRaftState& s, const AppendMsg& m,
                                                raft::AppendReject* why) {
  std::vector<Ballot> pre_bals = snapshot_bals(s.base);
  auto ack = raft::receive_append(s.base, m, why);
  if (!ack) return ack;
  skip_rule_over(s, pre_bals, s.base.last_index, m.prev + 1, m.term, m.is_default);
  return ack;
}

std::optional<RequestVoteOkMsg> coord_receive_vote(CoorRaftState& s, const RequestVoteMsg& m) {
  auto ok = raft::receive_vote(s.base, m);
  if (ok) ok->skip_tags = s.coord.skip_tags;
  return ok;
}

raft::RequestVoteResult coord_request_vote(CoorRaftState& s) {
  auto res = raft::request_vote(s.base);
  if (res.ok) res.self_reply.skip_tags = s.coord.skip_tags;
  return res;
}

bool coord_become_leader(CoorRaftState& s, const std::vector<RequestVoteOkMsg>& replies,
                         const QuorumSystem& q) {
  Index old_last = s.base.last_index;
  std::vector<Ballot> pre_bals = snapshot_bals(s.base);
  if (!raft::become_leader(s.base, replies, q)) return false;
  for (Index i = old_last + 1; i <= s.base.last_index; ++i) {
    auto [best, tag] = winning_entry_and_tag(replies, i, s.base.n);
    if (tag && !best.empty()) {
      set_skip_tag(s.coord, i);
      s.coord.executable.insert({i, best.val});
    }
  }
  // The restamp is the implicit self-accept of the merged log; a default
  // leader's noops become executable here (Fig 15 merge clause, extended
  // over the rewritten prefix).
  if (s.base.last_index > old_last)
    skip_rule_over(s, pre_bals, s.base.last_index, old_last + 1, s.base.current_term,
                   s.is_default);
  return true;
}

void canon_delta(Canon& c, const CoordDelta& d) {
  c.i64(static_cast<int64_t>(d.skip_tags.size()));
  for (bool b : d.skip_tags) c.boolean(b);
  c.i64(static_cast<int64_t>(d.executable.size()));
  for (const auto& [i, v] : d.executable) {
    c.i64(i);
    canon_value(c, v);
  }
}

}  // namespace lab::mencius
