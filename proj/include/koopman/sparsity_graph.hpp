#pragma once

#include <queue>
#include <set>
#include <string>
#include <vector>

#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"

namespace koopman {

// Directed dependency graph of a vector field: edge x_i → x_j when component
// f_j depends on x_i (i ≠ j). Subsystems are exactly the index sets closed
// under incoming edges. Immutable after construction.
class SparsityGraph {
 public:
  // deps[j-1] lists the indices component j depends on. Self-indices are
  // silently dropped (the edge definition requires i ≠ j; every component
  // may depend on itself without that being structure).
  static SparsityGraph from_dependencies(const std::vector<IndexSet>& deps, int n) {
    if (n < 1) throw ValidationError("SparsityGraph: dimension must be positive");
    if (static_cast<int>(deps.size()) != n)
      throw ValidationError("SparsityGraph: expected " + std::to_string(n) +
                            " dependency sets, got " + std::to_string(deps.size()));
    SparsityGraph g;
    g.n_ = n;
    g.deps_.reserve(deps.size());
    for (int j = 1; j <= n; ++j) {
      const IndexSet& dj = deps[static_cast<std::size_t>(j - 1)];
      std::vector<int> kept;
      for (int i : dj) {
        if (i < 1 || i > n)
          throw ValidationError("SparsityGraph: component " + std::to_string(j) +
                                " depends on out-of-range index " + std::to_string(i));
        if (i != j) kept.push_back(i);
      }
      g.deps_.emplace_back(std::move(kept));
    }
    return g;
  }

  int n() const { return n_; }

  // Dependencies of component j (1-based), self excluded.
  const IndexSet& deps(int j) const {
    if (j < 1 || j > n_) throw ValidationError("SparsityGraph::deps: index out of range");
    return deps_[static_cast<std::size_t>(j - 1)];
  }

  // Edges (i, j) with i ∈ deps(j), in (j, i) scan order.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 1; j <= n_; ++j)
      for (int i : deps(j)) out.emplace_back(i, j);
    return out;
  }

  // True iff I is closed under incoming edges: deps(j) ⊆ I for every j ∈ I.
  bool is_subsystem(const IndexSet& I) const {
    I.range_check(n_, "SparsityGraph::is_subsystem");
    for (int j : I)
      if (!deps(j).subset_of(I)) return false;
    return true;
  }

  // Smallest subsystem containing S: backward reachability over edges.
  IndexSet closure(const IndexSet& S) const {
    S.range_check(n_, "SparsityGraph::closure");
    std::vector<char> in(static_cast<std::size_t>(n_) + 1, 0);
    std::queue<int> work;
    for (int i : S) {
      in[static_cast<std::size_t>(i)] = 1;
      work.push(i);
    }
    while (!work.empty()) {
      int j = work.front();
      work.pop();
      for (int i : deps(j)) {
        if (!in[static_cast<std::size_t>(i)]) {
          in[static_cast<std::size_t>(i)] = 1;
          work.push(i);
        }
      }
    }
    std::vector<int> out;
    for (int i = 1; i <= n_; ++i)
      if (in[static_cast<std::size_t>(i)]) out.push_back(i);
    return IndexSet(std::move(out));
  }

  // All nonempty closed sets, sorted by cardinality then lexicographically.
  //
  // Closed sets are exactly the unions of singleton closures (each closed I
  // equals ∪_{i∈I} closure({i}), and unions of closed sets are closed), so a
  // breadth-first search over "add one singleton closure" reaches them all.
  // Throws CapExceededError as soon as more than `cap` distinct sets exist;
  // the error carries the count found up to that point.
  std::vector<IndexSet> enumerate_subsystems(std::size_t cap = 4096) const {
    if (cap < 1) throw ValidationError("enumerate_subsystems: cap must be ≥ 1");
    std::vector<IndexSet> singleton_closures;
    singleton_closures.reserve(static_cast<std::size_t>(n_));
    for (int i = 1; i <= n_; ++i) singleton_closures.push_back(closure(IndexSet{i}));

    std::set<IndexSet> seen;
    std::queue<IndexSet> work;
    auto push = [&](const IndexSet& s) {
      if (seen.insert(s).second) {
        if (seen.size() > cap)
          throw CapExceededError("enumerate_subsystems: more than " + std::to_string(cap) +
                                     " subsystems exist",
                                 seen.size());
        work.push(s);
      }
    };
    for (const IndexSet& c : singleton_closures) push(c);
    while (!work.empty()) {
      IndexSet cur = work.front();
      work.pop();
      for (const IndexSet& c : singleton_closures) {
        IndexSet u = set_union(cur, c);
        if (u != cur) push(u);
      }
    }
    // std::set<IndexSet> already orders by (cardinality, lex) via operator<.
    return std::vector<IndexSet>(seen.begin(), seen.end());
  }

 private:
  SparsityGraph() = default;

  int n_ = 0;
  std::vector<IndexSet> deps_;
};

}  // namespace koopman
