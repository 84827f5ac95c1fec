// Sparsity graph of the coupled Duffing system: edges and all subsystems.

#include <iostream>

#include <koopman/dynamics.hpp>
#include <koopman/sparsity_graph.hpp>

int main() {
  const koopman::SparseSystem sys = koopman::SparseSystem::builtin("coupled_duffing");
  const koopman::SparsityGraph g = sys.sparsity_graph();

  std::cout << "coupled_duffing: n = " << g.n() << "\n";
  std::cout << "edges (x_i -> x_j):\n";
  for (const auto& [i, j] : g.edges()) std::cout << "  x" << i << " -> x" << j << "\n";

  std::cout << "subsystems:\n";
  for (const koopman::IndexSet& I : g.enumerate_subsystems()) {
    std::cout << "  {";
    for (std::size_t k = 0; k < I.indices().size(); ++k)
      std::cout << (k ? "," : "") << I.indices()[k];
    std::cout << "}\n";
  }
  return 0;
}
