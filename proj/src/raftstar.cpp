#include "lab/raftstar.hpp"

#include <algorithm>
#include <stdexcept>

namespace lab::raft {

RaftState make_initial(ServerId me, int n) {
  RaftState s;
  s.me = me;
  s.n = n;
  return s;
}

Entry entry_at(const RaftState& s, Index i) {
  if (i < 0 || i >= static_cast<Index>(s.log.size())) return Entry{};
  return s.log[static_cast<size_t>(i)];
}

Ballot term_at(const RaftState& s, Index i) { return entry_at(s, i).term; }

namespace {

void set_entry(RaftState& s, Index i, const Entry& e) {
  if (i >= static_cast<Index>(s.log.size())) s.log.resize(static_cast<size_t>(i) + 1);
  s.log[static_cast<size_t>(i)] = e;
}

// Shadow-ballot rewrite with the matching ghost vote; a no-op when the
// instance already carries this ballot.
void rewrite_bal(RaftState& s, Index i, Ballot b) {
  Entry e = entry_at(s, i);
  if (e.empty() || e.bal == b) return;
  e.bal = b;
  set_entry(s, i, e);
  s.votes[i].insert({b, e.val});
}

}  // namespace

RequestVoteResult request_vote(RaftState& s) {
  RequestVoteResult res;
  if (s.leader) return res;
  s.current_term = ballot_succ(s.current_term, s.me, s.n);
  res.msg = RequestVoteMsg{0, s.current_term, s.last_index, term_at(s, s.last_index)};
  res.self_reply = RequestVoteOkMsg{0, s.me, s.current_term, s.log, s.log_tail, {}};
  res.ok = true;
  return res;
}

std::optional<RequestVoteOkMsg> receive_vote(RaftState& s, const RequestVoteMsg& m) {
  if (m.term <= s.current_term) return std::nullopt;
  Ballot own_last_term = term_at(s, s.last_index);
  bool up_to_date = s.last_index == kNilIndex || own_last_term < m.last_term ||
                    (own_last_term == m.last_term && s.last_index <= m.last_index);
  if (!up_to_date) return std::nullopt;
  s.current_term = m.term;
  s.leader = false;
  return RequestVoteOkMsg{m.group, s.me, m.term, s.log, s.log_tail, {}};
}

bool become_leader(RaftState& s, const std::vector<RequestVoteOkMsg>& replies,
                   const QuorumSystem& q) {
  if (s.leader || replies.empty()) return false;
  std::set<ServerId> accs;
  bool has_self = false;
  Index max_tail = kNilIndex;
  for (const auto& r : replies) {
    if (r.term != s.current_term) return false;
    accs.insert(r.acc);
    if (r.acc == s.me) has_self = true;
    max_tail = std::max(max_tail, r.log_tail);
  }
  if (!has_self || !q.is_quorum(accs)) return false;

  bool recovered = false;
  for (Index i = s.last_index + 1; i <= max_tail; ++i) {
    Entry best;
    for (const auto& r : replies) {
      Entry e = (i < static_cast<Index>(r.log.size())) ? r.log[static_cast<size_t>(i)] : Entry{};
      if (compare_entries(e, best, s.n) > 0) best = e;
    }
    if (best.empty()) continue;  // unreachable for hole-free raft logs
    set_entry(s, i, Entry{s.current_term, s.current_term, best.val});
    s.votes[i].insert({s.current_term, best.val});
    s.last_index = std::max(s.last_index, i);
    s.log_tail = std::max(s.log_tail, i);
    recovered = true;
  }
  if (recovered) {
    for (Index i = 0; i <= s.last_index; ++i) rewrite_bal(s, i, s.current_term);
  }
  s.leader = true;
  return true;
}

AppendResult append_entries(RaftState& s, const std::vector<Value>& vals, Index prev,
                            const std::vector<int64_t>& op_ids) {
  AppendResult res;
  if (!s.leader || vals.empty() || prev > s.log_tail || prev < kNilIndex) return res;
  for (const auto& v : vals)
    if (is_noval(v)) return res;

  AppendMsg m;
  m.term = s.current_term;
  m.prev = prev;
  m.prev_term = term_at(s, prev);
  m.leader_commit = s.commit_index;

  Index start = s.log_tail + 1;
  for (size_t k = 0; k < vals.size(); ++k)
    set_entry(s, start + static_cast<Index>(k), Entry{s.current_term, s.current_term, vals[k]});
  Index new_last = start + static_cast<Index>(vals.size()) - 1;
  s.last_index = new_last;
  s.log_tail = new_last;
  for (Index i = 0; i <= new_last; ++i) rewrite_bal(s, i, s.current_term);
  for (Index i = std::max<Index>(prev + 1, 0); i <= new_last; ++i)
    s.votes[i].insert({s.current_term, entry_at(s, i).val});

  m.entries.assign(s.log.begin() + static_cast<int64_t>(prev + 1),
                   s.log.begin() + static_cast<int64_t>(new_last + 1));
  m.op_ids = op_ids;
  res.msg = m;
  res.self_ack = AppendOkMsg{0, s.me, s.current_term, s.last_index, {}};
  res.ok = true;
  return res;
}

std::optional<AppendOkMsg> receive_append(RaftState& s, const AppendMsg& m, AppendReject* why) {
  auto reject = [&why](AppendReject r) {
    if (why) *why = r;
    return std::nullopt;
  };
  if (why) *why = AppendReject::None;
  if (m.term < s.current_term) return reject(AppendReject::StaleTerm);
  Index new_last = m.prev + static_cast<Index>(m.entries.size());
  if (m.prev != kNilIndex) {
    if (m.prev > s.last_index || term_at(s, m.prev) != m.prev_term)
      return reject(AppendReject::PrevMismatch);
  }
  // Raft* never lets an append shorten the log (B.2's longer-or-equal rule).
  if (s.last_index > new_last) return reject(AppendReject::WouldShorten);

  if (m.term > s.current_term) {
    s.current_term = m.term;
    s.leader = false;
  }
  for (size_t k = 0; k < m.entries.size(); ++k) {
    Index i = m.prev + 1 + static_cast<Index>(k);
    Entry e = m.entries[k];
    e.bal = m.term;
    set_entry(s, i, e);
    s.votes[i].insert({m.term, e.val});
  }
  s.last_index = new_last;
  s.log_tail = std::max(s.log_tail, new_last);
  for (Index i = 0; i <= new_last; ++i) rewrite_bal(s, i, m.term);
  s.commit_index = std::max(s.commit_index, m.leader_commit);
  return AppendOkMsg{m.group, s.me, s.current_term, s.last_index, {}};
}

bool leader_learn(RaftState& s, const std::vector<AppendOkMsg>& acks, const QuorumSystem& q) {
  if (!s.leader || acks.empty()) return false;
  std::set<ServerId> accs;
  Index min_index = kNilIndex;
  for (const auto& a : acks) {
    if (a.term != s.current_term) return false;
    if (a.acc == s.me) continue;
    accs.insert(a.acc);
    min_index = (min_index == kNilIndex) ? a.last_index : std::min(min_index, a.last_index);
  }
  if (static_cast<int>(accs.size()) < q.f) return false;
  if (min_index > s.commit_index) s.commit_index = std::min(min_index, s.last_index);
  return true;
}

void canon_state(Canon& c, const RaftState& s) {
  c.i64(s.me);
  c.i64(s.current_term);
  c.boolean(s.leader);
  c.i64(s.last_index);
  c.i64(s.log_tail);
  c.i64(s.commit_index);
  c.i64(static_cast<int64_t>(s.log.size()));
  for (const auto& e : s.log) canon_entry(c, e);
  c.i64(static_cast<int64_t>(s.votes.size()));
  for (const auto& [i, vs] : s.votes) {
    c.i64(i);
    c.i64(static_cast<int64_t>(vs.size()));
    for (const auto& [b, v] : vs) {
      c.i64(b);
      canon_value(c, v);
    }
  }
}

uint64_t state_digest(const RaftState& s) {
  Canon c;
  canon_state(c, s);
  return fnv1a(c.bytes());
}

}  // namespace lab::raft
