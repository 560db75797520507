#include "lab/refinement.hpp"

#include <algorithm>

namespace lab::refine {

std::optional<MapId> parse_map(const std::string& spec) {
  if (spec == "raftstar:paxos" || spec == "raftstar:multipaxos") return MapId::RaftstarToPaxos;
  if (spec == "pql:paxos" || spec == "pql:multipaxos") return MapId::PqlToPaxos;
  if (spec == "raftstar-pql:raftstar") return MapId::RqlToRaftstar;
  if (spec == "raftstar-pql:pql") return MapId::RqlToPql;
  if (spec == "raftstar-mencius:raftstar") return MapId::MenciusToRaftstar;
  if (spec == "coorpaxos:paxos" || spec == "coorpaxos:multipaxos") return MapId::CoorpaxosToPaxos;
  if (spec == "raftstar-mencius:coorpaxos") return MapId::MenciusToCoorpaxos;
  return std::nullopt;
}

const char* map_name(MapId m) {
  switch (m) {
    case MapId::RaftstarToPaxos: return "raftstar:paxos";
    case MapId::PqlToPaxos: return "pql:paxos";
    case MapId::RqlToRaftstar: return "raftstar-pql:raftstar";
    case MapId::RqlToPql: return "raftstar-pql:pql";
    case MapId::MenciusToRaftstar: return "raftstar-mencius:raftstar";
    case MapId::CoorpaxosToPaxos: return "coorpaxos:paxos";
    case MapId::MenciusToCoorpaxos: return "raftstar-mencius:coorpaxos";
  }
  return "?";
}

const char* map_source(MapId m) {
  switch (m) {
    case MapId::RaftstarToPaxos: return "raftstar";
    case MapId::PqlToPaxos: return "pql";
    case MapId::RqlToRaftstar:
    case MapId::RqlToPql: return "raftstar-pql";
    case MapId::MenciusToRaftstar:
    case MapId::MenciusToCoorpaxos: return "raftstar-mencius";
    case MapId::CoorpaxosToPaxos: return "coorpaxos";
  }
  return "?";
}

paxos::PaxosState map_raft_to_paxos(const raft::RaftState& r) {
  paxos::PaxosState p;
  p.me = r.me;
  p.n = r.n;
  p.ballot = r.current_term;
  p.leader = r.leader;
  p.log.reserve(r.log.size());
  for (const auto& e : r.log) p.log.push_back(Entry{e.bal, kNilBallot, e.val});
  p.log_tail = r.log_tail;
  for (Index i = 0; i <= r.commit_index; ++i) {
    Entry e = raft::entry_at(r, i);
    p.chosen[i] = {e.bal, e.val};
  }
  p.votes = r.votes;
  return p;
}

namespace {

std::string sname(ServerId s) { return "s" + std::to_string(s); }

PrepareOkMsg map_vote_reply(const RequestVoteOkMsg& r) {
  PrepareOkMsg ok;
  ok.acc = r.acc;
  ok.bal = r.term;
  ok.log.reserve(r.log.size());
  for (const auto& e : r.log) ok.log.push_back(Entry{e.bal, kNilBallot, e.val});
  ok.log_tail = r.log_tail;
  ok.skip_tags = r.skip_tags;
  return ok;
}

uint64_t raft_digest(const raft::RaftState& s) { return raft::state_digest(s); }

bool raft_equal(const raft::RaftState& a, const raft::RaftState& b) {
  return raft_digest(a) == raft_digest(b);
}

std::string raft_diff(const raft::RaftState& a, const raft::RaftState& b) {
  if (a.current_term != b.current_term) return "currentTerm";
  if (a.leader != b.leader) return "isLeader";
  if (a.last_index != b.last_index) return "lastIndex";
  if (a.log_tail != b.log_tail) return "logTail";
  if (a.commit_index != b.commit_index) return "commitIndex";
  size_t m = std::max(a.log.size(), b.log.size());
  for (size_t i = 0; i < m; ++i) {
    Entry ea = i < a.log.size() ? a.log[i] : Entry{};
    Entry eb = i < b.log.size() ? b.log[i] : Entry{};
    if (!(ea == eb)) return "entry[" + std::to_string(i) + "]";
  }
  if (a.votes != b.votes) return "votes";
  return "state";
}

bool lease_equal(const lease::LeaseDelta& a, const lease::LeaseDelta& b) {
  Canon ca, cb;
  lease::canon_delta(ca, a);
  lease::canon_delta(cb, b);
  return ca.bytes() == cb.bytes();
}

bool coord_equal(const mencius::CoordDelta& a, const mencius::CoordDelta& b) {
  auto trim = [](std::vector<bool> v) {
    while (!v.empty() && !v.back()) v.pop_back();
    return v;
  };
  return trim(a.skip_tags) == trim(b.skip_tags) && a.executable == b.executable;
}

// Choosability of (i, ?, v) in a universe's ghost votes: some quorum voted
// the value, preferring the given ballot. Returns the voter set at b.
bool value_choosable(const std::vector<const std::map<Index, std::set<std::pair<Ballot, Value>>>*>&
                         votes,
                     const QuorumSystem& q, Index i, Ballot b, const Value& v, bool* exact_ballot) {
  auto voters_at = [&](Ballot bb) {
    std::set<ServerId> out;
    for (size_t x = 0; x < votes.size(); ++x) {
      auto it = votes[x]->find(i);
      if (it != votes[x]->end() && it->second.count({bb, v}))
        out.insert(static_cast<ServerId>(x));
    }
    return out;
  };
  if (q.is_quorum(voters_at(b))) {
    if (exact_ballot) *exact_ballot = true;
    return true;
  }
  // Fall back to any ballot: the value was chosen earlier and the commit is
  // being adopted under a newer term.
  std::set<Ballot> ballots;
  for (size_t x = 0; x < votes.size(); ++x) {
    auto it = votes[x]->find(i);
    if (it != votes[x]->end())
      for (const auto& [bb, vv] : it->second)
        if (vv == v) ballots.insert(bb);
  }
  for (Ballot bb : ballots) {
    if (q.is_quorum(voters_at(bb))) {
      if (exact_ballot) *exact_ballot = false;
      return true;
    }
  }
  return false;
}

struct ReplayCtx {
  const Universe* pre = nullptr;
  const Universe* post = nullptr;
  const Step* step = nullptr;
  StepVerdict* verdict = nullptr;

  bool fail(const std::string& why) {
    if (!verdict->violation) verdict->violation = why;
    return false;
  }
  void act(const std::string& a) { verdict->actions.push_back(a); }
};

// --- Raft-family step replayed as MultiPaxos actions (Fig 3) -------------
//
// The mapped log of the acting server is mutated in place; the caller
// compares the result against the mapped post-universe.
bool replay_raft_as_paxos(ReplayCtx& cx, std::vector<paxos::PaxosState>& mapped) {
  const Step& st = *cx.step;
  ServerId s = st.server;
  const raft::RaftState& rpre = cx.pre->raft[static_cast<size_t>(s)];
  const raft::RaftState& rpost = cx.post->raft[static_cast<size_t>(s)];
  paxos::PaxosState& m = mapped[static_cast<size_t>(s)];
  const QuorumSystem& q = cx.pre->quorums;

  // Replays Phase2a + the implicit self Phase2b for every index whose mapped
  // instance changed in this step (the ballot-rewrite self-accepts).
  auto repropose_changed = [&](Index upto) {
    for (Index i = 0; i <= upto; ++i) {
      Entry want = raft::entry_at(rpost, i);
      Entry have = paxos::entry_at(m, i);
      if (have.bal == want.bal && have.val == want.val) continue;
      auto pr = paxos::propose(m, i, want.val);
      if (!pr.ok) return cx.fail("Phase2a not enabled at index " + std::to_string(i));
      cx.act("Phase2a(" + std::to_string(i) + ")");
      cx.act("Phase2b(" + sname(s) + "," + std::to_string(i) + ")");
    }
    return true;
  };

  auto replay_learns = [&](Index from_commit, Index to_commit) {
    std::vector<const std::map<Index, std::set<std::pair<Ballot, Value>>>*> votes;
    for (const auto& r : cx.post->raft) votes.push_back(&r.votes);
    for (Index j = from_commit + 1; j <= to_commit; ++j) {
      Entry e = raft::entry_at(rpost, j);
      if (e.empty()) return cx.fail("commit over empty index " + std::to_string(j));
      bool exact = false;
      if (!value_choosable(votes, q, j, e.bal, e.val, &exact))
        return cx.fail("Learn: value not choosable at index " + std::to_string(j));
      m.chosen[j] = {e.bal, e.val};
      paxos::set_entry(m, j, Entry{e.bal, kNilBallot, e.val});
      cx.act(exact ? "Learn(" + std::to_string(j) + ")"
                   : "Learn(" + std::to_string(j) + ",prior-ballot)");
    }
    return true;
  };

  if (st.label == "request_vote") {
    if (!paxos::increase_ballot(m, rpost.current_term))
      return cx.fail("IncreaseHighestBallot not enabled");
    cx.act("IncreaseHighestBallot");
    if (!paxos::phase1a(m)) return cx.fail("Phase1a not enabled");
    cx.act("Phase1a");
    return true;
  }
  if (st.label == "receive_vote") {
    if (!st.vote_msg) return cx.fail("receive_vote step without message");
    PrepareMsg pm{0, st.vote_msg->term};
    if (!paxos::phase1b(m, pm)) return cx.fail("Phase1b not enabled");
    cx.act("Phase1b");
    return true;
  }
  if (st.label == "become_leader") {
    std::vector<PrepareOkMsg> replies;
    replies.reserve(st.vote_replies.size());
    for (const auto& r : st.vote_replies) replies.push_back(map_vote_reply(r));
    if (!paxos::become_leader(m, replies, q)) return cx.fail("Phase1Succeed not enabled");
    cx.act("Phase1Succeed");
    return repropose_changed(rpost.last_index);
  }
  if (st.label == "append_entries") {
    if (!repropose_changed(rpost.last_index)) return false;
    return true;
  }
  if (st.label == "receive_append") {
    if (!st.append_msg) return cx.fail("receive_append step without message");
    const AppendMsg& am = *st.append_msg;
    Index new_last = am.prev + static_cast<Index>(am.entries.size());
    for (Index i = 0; i <= new_last; ++i) {
      Entry want = raft::entry_at(rpost, i);
      Entry have = paxos::entry_at(m, i);
      bool replaced = i > am.prev;
      if (!replaced && have.bal == want.bal && have.val == want.val) continue;
      AcceptMsg acc{0, i, am.term, want.val, false, -1};
      if (!paxos::accept(m, acc)) return cx.fail("Phase2b not enabled at " + std::to_string(i));
      cx.act("Phase2b(" + sname(s) + "," + std::to_string(i) + ")");
    }
    return replay_learns(rpre.commit_index, rpost.commit_index);
  }
  if (st.label == "leader_learn") {
    return replay_learns(rpre.commit_index, rpost.commit_index);
  }
  return cx.fail("unknown raft step label: " + st.label);
}

// --- Identity replay of a raft-family step (drop-Δ targets) --------------
bool replay_raft_identity(ReplayCtx& cx, std::vector<raft::RaftState>& mapped) {
  const Step& st = *cx.step;
  ServerId s = st.server;
  raft::RaftState& m = mapped[static_cast<size_t>(s)];
  const QuorumSystem& q = cx.pre->quorums;
  const raft::RaftState& rpost = cx.post->raft[static_cast<size_t>(s)];

  if (st.label == "request_vote") {
    if (!raft::request_vote(m).ok) return cx.fail("RequestVote not enabled");
    cx.act("RequestVote");
    return true;
  }
  if (st.label == "receive_vote") {
    if (!st.vote_msg || !raft::receive_vote(m, *st.vote_msg))
      return cx.fail("ReceiveVote(grant) not enabled");
    cx.act("ReceiveVote");
    return true;
  }
  if (st.label == "become_leader") {
    if (!raft::become_leader(m, st.vote_replies, q)) return cx.fail("BecomeLeader not enabled");
    cx.act("BecomeLeader");
    return true;
  }
  if (st.label == "append_entries") {
    if (!raft::append_entries(m, st.values, st.prev).ok)
      return cx.fail("AppendEntries not enabled");
    cx.act("AppendEntries");
    return true;
  }
  if (st.label == "receive_append") {
    if (!st.append_msg) return cx.fail("receive_append step without message");
    AppendMsg am = *st.append_msg;
    if (!raft::receive_append(m, am)) return cx.fail("ReceiveAppend not enabled");
    cx.act("ReceiveAppend");
    return true;
  }
  if (st.label == "leader_learn") {
    // The optimized protocol may commit less eagerly than the base rule; the
    // exact commit point is justified by the ack subset reaching it.
    Index target = rpost.commit_index;
    std::vector<AppendOkMsg> subset;
    for (const auto& a : st.append_acks)
      if (a.last_index >= target) subset.push_back(a);
    if (!raft::leader_learn(m, subset, q)) return cx.fail("LeaderLearn not enabled");
    cx.act("LeaderLearn");
    return true;
  }
  return cx.fail("unknown raft step label: " + st.label);
}

// --- Identity replay of a paxos-family step ------------------------------
bool replay_paxos_identity(ReplayCtx& cx, std::vector<paxos::PaxosState>& mapped) {
  const Step& st = *cx.step;
  ServerId s = st.server;
  paxos::PaxosState& m = mapped[static_cast<size_t>(s)];
  const QuorumSystem& q = cx.pre->quorums;

  if (st.label == "increase_ballot") {
    if (!paxos::increase_ballot(m, st.ballot)) return cx.fail("IncreaseHighestBallot not enabled");
    cx.act("IncreaseHighestBallot");
    return true;
  }
  if (st.label == "phase1a") {
    if (!paxos::phase1a(m)) return cx.fail("Phase1a not enabled");
    cx.act("Phase1a");
    return true;
  }
  if (st.label == "phase1b") {
    if (!st.prepare_msg || !paxos::phase1b(m, *st.prepare_msg))
      return cx.fail("Phase1b not enabled");
    cx.act("Phase1b");
    return true;
  }
  if (st.label == "become_leader") {
    if (!paxos::become_leader(m, st.prepare_replies, q))
      return cx.fail("BecomeLeader not enabled");
    cx.act("Phase1Succeed");
    return true;
  }
  if (st.label == "propose") {
    if (!paxos::propose(m, st.index, st.value).ok) return cx.fail("Phase2a not enabled");
    cx.act("Phase2a");
    cx.act("Phase2b(" + sname(s) + ")");
    return true;
  }
  if (st.label == "accept") {
    if (!st.accept_msg || !paxos::accept(m, *st.accept_msg)) return cx.fail("Phase2b not enabled");
    cx.act("Phase2b");
    return true;
  }
  if (st.label == "learn") {
    // Pass only the agreeing quorum subset (PQL steps may carry extras).
    std::vector<AcceptOkMsg> agreeing;
    if (!st.learn_acks.empty()) {
      const auto& f = st.learn_acks.front();
      const paxos::PaxosState& post_s = cx.post->paxos[static_cast<size_t>(s)];
      auto it = post_s.chosen.find(f.index);
      if (it != post_s.chosen.end()) {
        for (const auto& a : st.learn_acks)
          if (a.index == f.index && a.bal == it->second.first && a.val == it->second.second)
            agreeing.push_back(a);
      }
    }
    if (!paxos::learn(m, agreeing, q)) return cx.fail("Learn not enabled");
    cx.act("Learn");
    return true;
  }
  return cx.fail("unknown paxos step label: " + st.label);
}

// --- Lease Δ replay (targets that keep Δ) ---------------------------------
bool replay_lease_delta(ReplayCtx& cx, lease::LeaseDelta& d) {
  const Step& st = *cx.step;
  if (st.label == "grant_lease") {
    lease::grant_lease(d, st.server, st.other);
    cx.act("GrantLease");
    return true;
  }
  if (st.label == "receive_grant") {
    if (!st.grant_msg) return cx.fail("receive_grant step without message");
    lease::receive_grant(d, *st.grant_msg);
    cx.act("GrantLease(holder)");
    return true;
  }
  if (st.label == "update_timer") {
    lease::update_timer(d, st.timer);
    cx.act("UpdateTimer");
    return true;
  }
  if (st.label == "local_read") {
    cx.act("ReadAtLocal");
    return true;
  }
  if (st.label == "apply") {
    return true;  // caller applies against the mapped base
  }
  return false;
}

bool is_lease_label(const std::string& l) {
  return l == "grant_lease" || l == "receive_grant" || l == "update_timer" ||
         l == "local_read" || l == "apply";
}

}  // namespace

StepVerdict verify_step(MapId map, const Universe& pre, const Step& step, const Universe& post) {
  StepVerdict v;
  v.step_id = step.id;
  ReplayCtx cx{&pre, &post, &step, &v};
  size_t n = 0;

  auto finish_paxos = [&](std::vector<paxos::PaxosState>& replayed,
                          const std::vector<paxos::PaxosState>& mapped_post) {
    for (size_t x = 0; x < replayed.size(); ++x) {
      if (!paxos::states_equal(replayed[x], mapped_post[x])) {
        v.violation = "post-state mismatch at s" + std::to_string(x) + ": " +
                      paxos::diff_states(replayed[x], mapped_post[x]);
        return;
      }
    }
    if (v.actions.empty()) v.stutter = true;
  };
  auto finish_raft = [&](std::vector<raft::RaftState>& replayed,
                         const std::vector<raft::RaftState>& mapped_post) {
    for (size_t x = 0; x < replayed.size(); ++x) {
      if (!raft_equal(replayed[x], mapped_post[x])) {
        v.violation = "post-state mismatch at s" + std::to_string(x) + ": " +
                      raft_diff(replayed[x], mapped_post[x]);
        return;
      }
    }
    if (v.actions.empty()) v.stutter = true;
  };
  auto check_lease_deltas = [&](const std::vector<lease::LeaseDelta>& replayed) {
    for (size_t x = 0; x < replayed.size(); ++x) {
      if (!lease_equal(replayed[x], post.lease[x])) {
        v.violation = "lease Δ mismatch at s" + std::to_string(x);
        return;
      }
    }
  };
  auto check_coord_deltas = [&](const std::vector<mencius::CoordDelta>& replayed) {
    for (size_t x = 0; x < replayed.size(); ++x) {
      if (!coord_equal(replayed[x], post.coord[x])) {
        v.violation = "coord Δ mismatch at s" + std::to_string(x);
        return;
      }
    }
  };

  switch (map) {
    case MapId::RaftstarToPaxos: {
      n = pre.raft.size();
      std::vector<paxos::PaxosState> replayed, mapped_post;
      for (size_t x = 0; x < n; ++x) {
        replayed.push_back(map_raft_to_paxos(pre.raft[x]));
        mapped_post.push_back(map_raft_to_paxos(post.raft[x]));
      }
      // A step that leaves every mapped state unchanged is a stutter.
      bool changed = false;
      for (size_t x = 0; x < n; ++x)
        if (!paxos::states_equal(replayed[x], mapped_post[x])) changed = true;
      if (!changed) {
        v.stutter = true;
        return v;
      }
      if (!replay_raft_as_paxos(cx, replayed)) return v;
      finish_paxos(replayed, mapped_post);
      return v;
    }

    case MapId::RqlToRaftstar:
    case MapId::MenciusToRaftstar: {
      n = pre.raft.size();
      std::vector<raft::RaftState> replayed = pre.raft;
      bool changed = false;
      for (size_t x = 0; x < n; ++x)
        if (!raft_equal(replayed[x], post.raft[x])) changed = true;
      if (!changed) {
        v.stutter = true;
        return v;
      }
      if (is_lease_label(step.label)) {
        // Δ-only step that changed the base projection: that is a mutation.
        v.violation = "Δ subaction '" + step.label + "' mutated base state";
        return v;
      }
      if (!replay_raft_identity(cx, replayed)) return v;
      finish_raft(replayed, post.raft);
      return v;
    }

    case MapId::PqlToPaxos:
    case MapId::CoorpaxosToPaxos: {
      n = pre.paxos.size();
      std::vector<paxos::PaxosState> replayed = pre.paxos;
      bool changed = false;
      for (size_t x = 0; x < n; ++x)
        if (!paxos::states_equal(replayed[x], post.paxos[x])) changed = true;
      if (!changed) {
        v.stutter = true;
        return v;
      }
      if (is_lease_label(step.label)) {
        v.violation = "Δ subaction '" + step.label + "' mutated base state";
        return v;
      }
      if (!replay_paxos_identity(cx, replayed)) return v;
      finish_paxos(replayed, post.paxos);
      return v;
    }

    case MapId::RqlToPql: {
      n = pre.raft.size();
      std::vector<paxos::PaxosState> replayed, mapped_post;
      std::vector<lease::LeaseDelta> replayed_lease = pre.lease;
      for (size_t x = 0; x < n; ++x) {
        replayed.push_back(map_raft_to_paxos(pre.raft[x]));
        mapped_post.push_back(map_raft_to_paxos(post.raft[x]));
      }
      if (is_lease_label(step.label)) {
        auto& d = replayed_lease[static_cast<size_t>(step.server)];
        if (step.label == "apply") {
          // PQL Apply: next in order, gated on the chosen prefix.
          lease::PqlState ps{replayed[static_cast<size_t>(step.server)], d};
          if (!lease::apply_pql(ps, step.index)) {
            v.violation = "Apply not enabled at index " + std::to_string(step.index);
            return v;
          }
          replayed[static_cast<size_t>(step.server)] = ps.base;
          replayed_lease[static_cast<size_t>(step.server)] = ps.lease;
          v.actions.push_back("Apply");
        } else if (!replay_lease_delta(cx, d)) {
          return v;
        }
      } else if (step.label == "leader_learn") {
        // The ported Learn gate: f acks' holders plus the leader's own
        // grants, every holder acked. Checked by replaying PQL's learn with
        // the mapped acceptOKs (the implicit self-ack synthesized).
        const auto& rpre = pre.raft[static_cast<size_t>(step.server)];
        const auto& rpost = post.raft[static_cast<size_t>(step.server)];
        lease::PqlState ps{replayed[static_cast<size_t>(step.server)],
                           replayed_lease[static_cast<size_t>(step.server)]};
        for (Index j = rpre.commit_index + 1; j <= rpost.commit_index; ++j) {
          Entry e = raft::entry_at(rpost, j);
          std::vector<AcceptOkMsg> acks;
          for (const auto& a : step.append_acks) {
            if (a.last_index < j) continue;
            acks.push_back(AcceptOkMsg{0, a.acc, j, e.bal, e.val, a.holders, -1});
          }
          AcceptOkMsg self{0, step.server, j, e.bal, e.val,
                           lease::active_grants(ps.lease), -1};
          acks.push_back(self);
          if (!lease::pql_learn(ps, acks, pre.quorums)) {
            v.violation = "PQL Learn gate fails at index " + std::to_string(j) +
                          " (lease holders not covered)";
            return v;
          }
          v.actions.push_back("Learn(" + std::to_string(j) + ")");
        }
        replayed[static_cast<size_t>(step.server)] = ps.base;
      } else {
        bool changed = false;
        for (size_t x = 0; x < n; ++x)
          if (!paxos::states_equal(replayed[x], mapped_post[x])) changed = true;
        if (changed && !replay_raft_as_paxos(cx, replayed)) return v;
      }
      finish_paxos(replayed, mapped_post);
      if (!v.violation) check_lease_deltas(replayed_lease);
      if (!v.violation && v.actions.empty()) v.stutter = true;
      return v;
    }

    case MapId::MenciusToCoorpaxos: {
      n = pre.raft.size();
      std::vector<paxos::PaxosState> replayed, mapped_post;
      std::vector<mencius::CoordDelta> replayed_coord = pre.coord;
      for (size_t x = 0; x < n; ++x) {
        replayed.push_back(map_raft_to_paxos(pre.raft[x]));
        mapped_post.push_back(map_raft_to_paxos(post.raft[x]));
      }
      ServerId s = step.server;
      const raft::RaftState& rpost = post.raft[static_cast<size_t>(s)];

      // Replay base actions with the coordinated accept so skip effects are
      // reproduced on the mapped side.
      mencius::CoorPaxosState cs;
      cs.base = replayed[static_cast<size_t>(s)];
      cs.default_server = pre.default_server;
      cs.is_default = (s == pre.default_server);
      cs.coord = replayed_coord[static_cast<size_t>(s)];

      auto sync_back = [&]() {
        replayed[static_cast<size_t>(s)] = cs.base;
        replayed_coord[static_cast<size_t>(s)] = cs.coord;
      };

      if (step.label == "become_leader") {
        std::vector<PrepareOkMsg> replies;
        for (const auto& r : step.vote_replies) replies.push_back(map_vote_reply(r));
        if (!mencius::coord_become_leader(cs, replies, pre.quorums)) {
          v.violation = "Phase1Succeed not enabled";
          return v;
        }
        v.actions.push_back("Phase1Succeed");
        for (Index i = 0; i <= rpost.last_index; ++i) {
          Entry want = raft::entry_at(rpost, i);
          Entry have = paxos::entry_at(cs.base, i);
          if (have.bal == want.bal && have.val == want.val) continue;
          if (!mencius::coord_propose(cs, i, want.val).ok) {
            v.violation = "Phase2a not enabled at index " + std::to_string(i);
            return v;
          }
          v.actions.push_back("Phase2a(" + std::to_string(i) + ")");
          v.actions.push_back("Phase2b(" + sname(s) + "," + std::to_string(i) + ")");
        }
        sync_back();
      } else if (step.label == "append_entries") {
        const raft::RaftState& rpre2 = pre.raft[static_cast<size_t>(s)];
        (void)rpre2;
        for (Index i = 0; i <= rpost.last_index; ++i) {
          Entry want = raft::entry_at(rpost, i);
          Entry have = paxos::entry_at(cs.base, i);
          if (have.bal == want.bal && have.val == want.val) continue;
          if (!mencius::coord_propose(cs, i, want.val).ok) {
            v.violation = "Phase2a not enabled at index " + std::to_string(i);
            return v;
          }
          v.actions.push_back("Phase2a(" + std::to_string(i) + ")");
          v.actions.push_back("Phase2b(" + sname(s) + "," + std::to_string(i) + ")");
        }
        sync_back();
      } else if (step.label == "receive_append") {
        if (!step.append_msg) {
          v.violation = "receive_append step without message";
          return v;
        }
        const AppendMsg& am = *step.append_msg;
        Index new_last = am.prev + static_cast<Index>(am.entries.size());
        for (Index i = 0; i <= new_last; ++i) {
          Entry want = raft::entry_at(rpost, i);
          Entry have = paxos::entry_at(cs.base, i);
          bool replaced = i > am.prev;
          if (!replaced && have.bal == want.bal && have.val == want.val) continue;
          AcceptMsg acc{0, i, am.term, want.val, am.is_default, -1};
          if (!mencius::coord_accept(cs, acc)) {
            v.violation = "Phase2b not enabled at " + std::to_string(i);
            return v;
          }
          v.actions.push_back("Phase2b(" + sname(s) + "," + std::to_string(i) + ")");
        }
        sync_back();
        // Commit adoption maps to Learn, as in the plain raft map.
        const raft::RaftState& rpre3 = pre.raft[static_cast<size_t>(s)];
        std::vector<const std::map<Index, std::set<std::pair<Ballot, Value>>>*> votes;
        for (const auto& r : post.raft) votes.push_back(&r.votes);
        for (Index j = rpre3.commit_index + 1; j <= rpost.commit_index; ++j) {
          Entry e = raft::entry_at(rpost, j);
          if (!value_choosable(votes, pre.quorums, j, e.bal, e.val, nullptr)) {
            v.violation = "Learn: value not choosable at index " + std::to_string(j);
            return v;
          }
          auto& mm = replayed[static_cast<size_t>(s)];
          mm.chosen[j] = {e.bal, e.val};
          paxos::set_entry(mm, j, Entry{e.bal, kNilBallot, e.val});
          v.actions.push_back("Learn(" + std::to_string(j) + ")");
        }
      } else {
        // request_vote / receive_vote / leader_learn reuse the raft→paxos
        // machinery (no skip effects possible).
        bool changed = false;
        for (size_t x = 0; x < n; ++x)
          if (!paxos::states_equal(replayed[x], mapped_post[x])) changed = true;
        if (changed && !replay_raft_as_paxos(cx, replayed)) return v;
      }
      finish_paxos(replayed, mapped_post);
      if (!v.violation) check_coord_deltas(replayed_coord);
      if (!v.violation && v.actions.empty()) v.stutter = true;
      return v;
    }
  }
  v.violation = "unhandled map";
  return v;
}

AuditReport audit_step(const Universe& pre, const Step& step, const Universe& post,
                       AuditReport carry) {
  AuditReport r = carry;
  auto base_unchanged = [&]() {
    if (!pre.paxos.empty()) {
      for (size_t x = 0; x < pre.paxos.size(); ++x)
        if (!paxos::states_equal(pre.paxos[x], post.paxos[x])) return false;
    }
    if (!pre.raft.empty()) {
      for (size_t x = 0; x < pre.raft.size(); ++x)
        if (raft::state_digest(pre.raft[x]) != raft::state_digest(post.raft[x])) return false;
    }
    return true;
  };
  if (step.tag == "added") {
    ++r.added;
    if (!base_unchanged() && !r.violation)
      r.violation = "added subaction '" + step.label + "' (step " + std::to_string(step.id) +
                    ") mutated base protocol state";
  } else if (step.tag == "modified") {
    ++r.modified;
  } else if (step.tag == "unchanged") {
    ++r.unchanged;
  } else if (step.tag == "base") {
    ++r.base;
  } else if (!r.violation) {
    r.violation = "step " + std::to_string(step.id) + " missing classification tag";
  }
  return r;
}

bool universes_equal(const Universe& a, const Universe& b) {
  return universe_digest(a) == universe_digest(b);
}

uint64_t universe_digest(const Universe& u) {
  Canon c;
  c.str(u.protocol);
  for (const auto& p : u.paxos) paxos::canon_state(c, p);
  for (const auto& r : u.raft) raft::canon_state(c, r);
  for (const auto& l : u.lease) lease::canon_delta(c, l);
  for (const auto& d : u.coord) mencius::canon_delta(c, d);
  return fnv1a(c.bytes());
}

}  // namespace lab::refine
