#include "soap/maxsat.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "soap/error.hpp"

namespace soap {

WcnfInstance::WcnfInstance(int var_count) : var_count_(var_count) {
  if (var_count < 0) throw InvalidInput("negative variable count");
}

void WcnfInstance::reserve_vars(int n) { var_count_ = std::max(var_count_, n); }

bool WcnfInstance::normalize(std::vector<Lit>& lits) {
  for (Lit l : lits) {
    if (l == 0) throw InvalidInput("literal 0 inside a clause");
    if (l == std::numeric_limits<int>::min()) throw InvalidInput("literal out of range");
    var_count_ = std::max(var_count_, std::abs(l));
  }
  std::sort(lits.begin(), lits.end(), [](Lit a, Lit b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
  });
  lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
  for (std::size_t i = 1; i < lits.size(); ++i)
    if (lits[i] == -lits[i - 1]) return false;  // tautology
  return true;
}

void WcnfInstance::add_hard(std::vector<Lit> lits) {
  if (normalize(lits)) hard_.push_back(std::move(lits));
}

void WcnfInstance::add_soft(std::vector<Lit> lits, std::uint64_t weight) {
  if (weight == 0) throw InvalidInput("soft clause with weight 0");
  if (!normalize(lits)) return;
  if (soft_total_ > std::numeric_limits<std::uint64_t>::max() - 1 - weight)
    throw InvalidInput("total soft weight overflows 64 bits");
  soft_total_ += weight;
  soft_.push_back(SoftClause{std::move(lits), weight});
}

namespace {

bool lit_true(const Assignment& a, Lit l) {
  const auto v = static_cast<std::size_t>(std::abs(l));
  return v < a.size() && a[v] == (l > 0);
}

bool clause_sat(const Assignment& a, const std::vector<Lit>& c) {
  return std::any_of(c.begin(), c.end(), [&](Lit l) { return lit_true(a, l); });
}

}  // namespace

bool WcnfInstance::satisfies_hard(const Assignment& a) const {
  return std::all_of(hard_.begin(), hard_.end(), [&](const auto& c) { return clause_sat(a, c); });
}

std::uint64_t WcnfInstance::cost(const Assignment& a) const {
  std::uint64_t total = 0;
  for (const SoftClause& s : soft_)
    if (!clause_sat(a, s.lits)) total += s.weight;
  return total;
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

constexpr int kNoReason = -1;

// Internal literal: 2 * var + sign, sign 1 = negated; variables are 0-based.
inline int mk_lit(Lit l) { return 2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0); }
inline int var_of(int lit) { return lit >> 1; }

class BranchAndBound {
 public:
  BranchAndBound(const WcnfInstance& inst, const SolveOptions& opts)
      : inst_(inst), opts_(opts), orig_vars_(inst.var_count()) {
    nvars_ = orig_vars_;
    std::map<int, std::uint64_t> unit_soft;  // internal lit -> merged weight
    for (const SoftClause& s : inst.soft()) {
      if (s.lits.empty()) {
        base_cost_ += s.weight;
      } else if (s.lits.size() == 1) {
        unit_soft[mk_lit(s.lits[0])] += s.weight;
      } else {
        // (C or r) hard, soft literal -r
        const int r = nvars_++;
        std::vector<int> c;
        for (Lit l : s.lits) c.push_back(mk_lit(l));
        c.push_back(2 * r);
        relaxed_.push_back(std::move(c));
        unit_soft[2 * r + 1] += s.weight;
      }
    }
    for (auto [lit, w] : unit_soft) {
      soft_lit_.push_back(lit);
      soft_w_.push_back(w);
    }
    val_.assign(nvars_, -1);
    reason_.assign(nvars_, kNoReason);
    trail_pos_.assign(nvars_, 0);
    seen_.assign(nvars_, 0);
    watches_.assign(2 * static_cast<std::size_t>(nvars_), {});
    cost_true_.assign(nvars_, 0);
    cost_false_.assign(nvars_, 0);
    std::vector<std::uint64_t> occurrence(nvars_, 0);
    for (std::size_t i = 0; i < soft_lit_.size(); ++i) {
      const int v = var_of(soft_lit_[i]);
      // the soft literal is falsified by the opposite polarity
      ((soft_lit_[i] & 1) ? cost_true_ : cost_false_)[v] += soft_w_[i];
      occurrence[v] += soft_w_[i];
    }
    for (const SoftClause& s : inst.soft())
      if (s.lits.size() > 1)
        for (Lit l : s.lits) occurrence[std::abs(l) - 1] += s.weight;

    order_.resize(nvars_);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return occurrence[a] > occurrence[b]; });
    soft_order_.resize(soft_lit_.size());
    std::iota(soft_order_.begin(), soft_order_.end(), 0);
    std::stable_sort(soft_order_.begin(), soft_order_.end(),
                     [&](std::size_t a, std::size_t b) { return soft_w_[a] > soft_w_[b]; });
    excluded_.assign(soft_lit_.size(), 0);
  }

  SolveResult run() {
    SolveResult res;
    start_ = std::chrono::steady_clock::now();
    if (!load_clauses() || propagate() != kNoReason) {
      res.status = SolveStatus::hard_unsat;
      return res;
    }
    bool timed_out = false;
    for (;;) {
      if (opts_.timeout.count() > 0 && (nodes_ & 63) == 0 && expired()) {
        timed_out = true;
        break;
      }
      bool conflict = propagate() != kNoReason;
      if (!conflict && have_ub_) {
        const std::uint64_t cost = cost_ + base_cost_;
        conflict = cost >= ub_ || cost + lower_bound(ub_ - cost) >= ub_;
      }
      if (!conflict) {
        const int v = pick_var();
        if (v < 0) {
          record_solution();
          conflict = true;
        } else {
          ++nodes_;
          levels_.push_back(Level{trail_.size(), false});
          assign(2 * v + (prefer_true(v) ? 0 : 1), kNoReason);
          continue;
        }
      }
      if (!backtrack()) break;
    }
    res.nodes = nodes_;
    if (have_ub_) {
      res.has_model = true;
      res.model = best_model_;
      res.cost = inst_.cost(best_model_);
      res.status = timed_out ? SolveStatus::timeout : SolveStatus::optimal;
    } else {
      res.status = timed_out ? SolveStatus::timeout : SolveStatus::hard_unsat;
    }
    return res;
  }

 private:
  struct Level {
    std::size_t start;
    bool flipped;
  };

  bool expired() const {
    return std::chrono::steady_clock::now() - start_ >= opts_.timeout;
  }

  int value(int lit) const {
    const int v = val_[var_of(lit)];
    return v < 0 ? -1 : (v ^ (lit & 1));
  }

  void assign(int lit, int reason) {
    const int v = var_of(lit);
    val_[v] = (lit & 1) ? 0 : 1;
    reason_[v] = reason;
    trail_pos_[v] = trail_.size();
    trail_.push_back(lit);
    cost_ += val_[v] ? cost_true_[v] : cost_false_[v];
  }

  void undo_to(std::size_t size) {
    while (trail_.size() > size) {
      const int v = var_of(trail_.back());
      cost_ -= val_[v] ? cost_true_[v] : cost_false_[v];
      val_[v] = -1;
      trail_.pop_back();
    }
    qhead_ = std::min(qhead_, trail_.size());
  }

  bool add_clause(std::vector<int> c) {
    if (c.empty()) return false;
    if (c.size() == 1) {
      const int v = value(c[0]);
      if (v == 0) return false;
      if (v < 0) assign(c[0], kNoReason);
      return true;
    }
    const int idx = static_cast<int>(clauses_.size());
    watches_[c[0]].push_back(idx);
    watches_[c[1]].push_back(idx);
    clauses_.push_back(std::move(c));
    return true;
  }

  bool load_clauses() {
    for (const auto& h : inst_.hard()) {
      std::vector<int> c;
      for (Lit l : h) c.push_back(mk_lit(l));
      if (!add_clause(std::move(c))) return false;
    }
    for (auto& c : relaxed_)
      if (!add_clause(c)) return false;
    return true;
  }

  // Returns the index of a falsified clause, or kNoReason.
  int propagate() {
    while (qhead_ < trail_.size()) {
      const int falsified = trail_[qhead_++] ^ 1;
      auto& ws = watches_[falsified];
      std::size_t keep = 0;
      for (std::size_t i = 0; i < ws.size(); ++i) {
        const int ci = ws[i];
        auto& c = clauses_[ci];
        if (c[0] == falsified) std::swap(c[0], c[1]);
        if (value(c[0]) == 1) {
          ws[keep++] = ci;
          continue;
        }
        bool moved = false;
        for (std::size_t k = 2; k < c.size(); ++k) {
          if (value(c[k]) != 0) {
            std::swap(c[1], c[k]);
            watches_[c[1]].push_back(ci);
            moved = true;
            break;
          }
        }
        if (moved) continue;
        ws[keep++] = ci;
        if (value(c[0]) == 0) {
          for (++i; i < ws.size(); ++i) ws[keep++] = ws[i];
          ws.resize(keep);
          qhead_ = trail_.size();
          return ci;
        }
        assign(c[0], ci);
      }
      ws.resize(keep);
    }
    return kNoReason;
  }

  // Soft literals asserted as assumptions carry reason -2 - soft index.
  static int assumption(std::size_t soft) { return -2 - static_cast<int>(soft); }

  // Collects the assumptions (soft indices) behind the falsification of
  // `lits`, walking reasons of literals assigned at or after `mark`.
  void collect_core(const std::vector<int>& lits, std::size_t mark, std::vector<std::size_t>& core) {
    ++stamp_;
    std::vector<int> stack;
    for (int l : lits) stack.push_back(var_of(l));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (seen_[v] == stamp_ || val_[v] < 0 || trail_pos_[v] < mark) continue;
      seen_[v] = stamp_;
      const int r = reason_[v];
      if (r <= -2) {
        core.push_back(static_cast<std::size_t>(-2 - r));
      } else if (r >= 0) {
        for (int l : clauses_[r]) stack.push_back(var_of(l));
      }
    }
  }

  // Sum of minimum weights over disjoint cores: sets of unassigned soft
  // literals that unit propagation shows cannot all hold. Stops early once
  // the bound reaches `enough`.
  std::uint64_t lower_bound(std::uint64_t enough) {
    const std::size_t mark = trail_.size();
    std::fill(excluded_.begin(), excluded_.end(), 0);
    std::uint64_t lb = 0;
    std::vector<std::size_t> core;
    bool again = true;
    while (again && lb < enough) {
      again = false;
      for (std::size_t i : soft_order_) {
        if (excluded_[i]) continue;
        const int lit = soft_lit_[i];
        const int v = value(lit);
        if (v == 1) continue;
        core.clear();
        if (v == 0) {
          if (trail_pos_[var_of(lit)] < mark) continue;  // already paid for in the cost
          core.push_back(i);
          collect_core({lit}, mark, core);
        } else {
          assign(lit, assumption(i));
          const int confl = propagate();
          if (confl == kNoReason) continue;
          collect_core(clauses_[confl], mark, core);
        }
        std::uint64_t w = std::numeric_limits<std::uint64_t>::max();
        for (std::size_t s : core) {
          w = std::min(w, soft_w_[s]);
          excluded_[s] = 1;
        }
        lb += w;
        undo_to(mark);
        again = true;
        break;
      }
    }
    undo_to(mark);
    return lb;
  }

  int pick_var() const {
    for (int v : order_)
      if (val_[v] < 0) return v;
    return -1;
  }

  bool prefer_true(int v) const { return cost_false_[v] > cost_true_[v]; }

  void record_solution() {
    ub_ = cost_ + base_cost_;
    have_ub_ = true;
    best_model_.assign(static_cast<std::size_t>(orig_vars_) + 1, false);
    for (int v = 0; v < orig_vars_; ++v) best_model_[v + 1] = val_[v] == 1;
  }

  bool backtrack() {
    while (!levels_.empty() && levels_.back().flipped) {
      undo_to(levels_.back().start);
      levels_.pop_back();
    }
    if (levels_.empty()) return false;
    const int decision = trail_[levels_.back().start];
    undo_to(levels_.back().start);
    levels_.back().flipped = true;
    assign(decision ^ 1, kNoReason);
    return true;
  }

  const WcnfInstance& inst_;
  SolveOptions opts_;
  int orig_vars_;
  int nvars_;
  std::uint64_t base_cost_ = 0;
  std::vector<std::vector<int>> relaxed_;
  std::vector<int> soft_lit_;
  std::vector<std::uint64_t> soft_w_;
  std::vector<std::size_t> soft_order_;
  std::vector<char> excluded_;

  std::vector<std::vector<int>> clauses_;
  std::vector<std::vector<int>> watches_;
  std::vector<int> val_;
  std::vector<int> reason_;
  std::vector<std::size_t> trail_pos_;
  std::vector<unsigned> seen_;
  unsigned stamp_ = 0;
  std::vector<int> trail_;
  std::size_t qhead_ = 0;
  std::vector<Level> levels_;
  std::vector<int> order_;

  std::vector<std::uint64_t> cost_true_;
  std::vector<std::uint64_t> cost_false_;
  std::uint64_t cost_ = 0;

  bool have_ub_ = false;
  std::uint64_t ub_ = 0;
  Assignment best_model_;
  std::uint64_t nodes_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

SolveResult solve(const WcnfInstance& instance, const SolveOptions& options) {
  return BranchAndBound(instance, options).run();
}

// ---------------------------------------------------------------------------
// DIMACS WCNF

void write_wcnf(const WcnfInstance& inst, std::ostream& out) {
  const std::uint64_t top = inst.top();
  out << "p wcnf " << inst.var_count() << ' ' << inst.hard().size() + inst.soft().size() << ' '
      << top << '\n';
  for (const auto& c : inst.hard()) {
    out << top;
    for (Lit l : c) out << ' ' << l;
    out << " 0\n";
  }
  for (const SoftClause& s : inst.soft()) {
    out << s.weight;
    for (Lit l : s.lits) out << ' ' << l;
    out << " 0\n";
  }
}

namespace {

template <class T>
bool parse_number(const std::string& tok, T& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

}  // namespace

WcnfInstance read_wcnf(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  long long header_vars = 0;
  std::uint64_t header_clauses = 0;
  std::uint64_t top = 0;
  bool have_top = false;
  WcnfInstance inst;
  std::uint64_t found = 0;

  bool in_clause = false;
  std::size_t clause_line = 0;
  std::uint64_t weight = 0;
  std::vector<Lit> lits;

  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (!in_clause && tok == "c") continue;
    if (!in_clause && tok == "p") {
      if (have_header) throw ParseError("duplicate header", lineno);
      std::string fmt, nv, nc, tp;
      ls >> fmt >> nv >> nc;
      if (fmt != "wcnf" || !parse_number(nv, header_vars) || header_vars < 0 ||
          !parse_number(nc, header_clauses))
        throw ParseError("malformed header, expected 'p wcnf <nvars> <nclauses> <top>'", lineno);
      if (ls >> tp) {
        if (!parse_number(tp, top) || top == 0) throw ParseError("malformed top weight", lineno);
        have_top = true;
      }
      if (header_vars > std::numeric_limits<int>::max())
        throw ParseError("variable count overflows", lineno);
      inst = WcnfInstance(static_cast<int>(header_vars));
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError("clause before the 'p wcnf' header", lineno);
    do {
      if (!in_clause) {
        if (!parse_number(tok, weight))
          throw ParseError("bad clause weight '" + tok + "' (overflow or not an integer)", lineno);
        if (weight == 0) throw ParseError("clause weight 0 is not allowed", lineno);
        if (have_top && weight > top)
          throw ParseError("clause weight " + std::to_string(weight) + " exceeds top " +
                               std::to_string(top),
                           lineno);
        in_clause = true;
        clause_line = lineno;
        lits.clear();
        continue;
      }
      long long l = 0;
      if (!parse_number(tok, l)) throw ParseError("bad literal '" + tok + "'", lineno);
      if (l == 0) {
        ++found;
        try {
          if (have_top && weight == top) inst.add_hard(lits);
          else inst.add_soft(lits, weight);
        } catch (const InvalidInput& e) {
          throw ParseError(e.what(), clause_line);
        }
        in_clause = false;
        continue;
      }
      if (std::llabs(l) > header_vars)
        throw ParseError("literal " + std::to_string(l) + " exceeds the declared " +
                             std::to_string(header_vars) + " variables",
                         lineno);
      lits.push_back(static_cast<Lit>(l));
    } while (ls >> tok);
  }
  if (!have_header) throw ParseError("missing 'p wcnf' header", lineno);
  if (in_clause) throw ParseError("clause not terminated by 0", clause_line);
  if (found != header_clauses)
    throw ParseError("header declares " + std::to_string(header_clauses) + " clauses, found " +
                     std::to_string(found));
  return inst;
}

}  // namespace soap
