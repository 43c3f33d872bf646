#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace soap {

/// DIMACS literal: +v or -v for variable v >= 1.
using Lit = int;

struct SoftClause {
  std::vector<Lit> lits;
  std::uint64_t weight;

  friend bool operator==(const SoftClause&, const SoftClause&) = default;
};

/// Truth values indexed by variable; entry 0 is unused.
using Assignment = std::vector<bool>;

/// Weighted partial Max-SAT instance. Clauses are normalized on insertion:
/// duplicate literals collapse and tautologies are dropped.
class WcnfInstance {
 public:
  explicit WcnfInstance(int var_count = 0);

  int var_count() const noexcept { return var_count_; }
  void reserve_vars(int n);

  void add_hard(std::vector<Lit> lits);
  void add_soft(std::vector<Lit> lits, std::uint64_t weight);

  const std::vector<std::vector<Lit>>& hard() const noexcept { return hard_; }
  const std::vector<SoftClause>& soft() const noexcept { return soft_; }

  std::uint64_t soft_total() const noexcept { return soft_total_; }
  /// Weight marking hard clauses in WCNF files: total soft weight + 1.
  std::uint64_t top() const noexcept { return soft_total_ + 1; }

  bool satisfies_hard(const Assignment& a) const;
  /// Total weight of soft clauses falsified by a.
  std::uint64_t cost(const Assignment& a) const;

 private:
  bool normalize(std::vector<Lit>& lits);

  int var_count_;
  std::vector<std::vector<Lit>> hard_;
  std::vector<SoftClause> soft_;
  std::uint64_t soft_total_ = 0;
};

enum class SolveStatus : std::uint8_t { optimal, hard_unsat, timeout };

struct SolveOptions {
  std::chrono::milliseconds timeout{0};  // 0 disables the limit
};

struct SolveResult {
  SolveStatus status = SolveStatus::hard_unsat;
  bool has_model = false;   // false for hard_unsat and for a timeout without incumbent
  Assignment model;
  std::uint64_t cost = 0;   // falsified soft weight of `model`
  std::uint64_t nodes = 0;  // branch-and-bound decisions
};

/// Exact branch and bound: unit propagation on hard clauses, a lower bound
/// from disjoint soft cores found by propagation, and branching on variables
/// in order of decreasing soft weight.
SolveResult solve(const WcnfInstance& instance, const SolveOptions& options = {});

void write_wcnf(const WcnfInstance& instance, std::ostream& out);
/// Throws ParseError with the line number on malformed input.
WcnfInstance read_wcnf(std::istream& in);

}  // namespace soap
