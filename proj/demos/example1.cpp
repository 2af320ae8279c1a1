// Clusters the six-state example chain into three metastable sets.
#include <iostream>

#include "cpcca/cpcca.hpp"

int main() {
  const cpcca::StochasticMatrix p = cpcca::fixture_example1();

  cpcca::ClusterOptions opts;
  opts.n_clusters = 3;
  opts.mode = cpcca::SelectionMode::LargestRealPart;
  const cpcca::ClusteringResult r = cpcca::cluster(p, opts);

  std::cout << "eigenvalues:\n" << r.basis.spectrum.eigenvalues << "\n\n";
  std::cout << "membership:\n" << r.membership.values << "\n\n";
  std::cout << "coarse matrix:\n" << r.coarse << "\n\n";
  std::cout << "crispness: " << r.crispness << "\n";
}
