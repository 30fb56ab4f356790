#include <cstdio>
#include "fermik/graphs.hpp"
#include "fermik/classifier.hpp"
using namespace fermik;
int main() {
  // fig L1 spec
  GraphSpec s;
  s.shape = Shape::Main; s.n = 2; s.ell = {1,1};
  s.clusters.blocks = {{0,3},{1,4},{2,5}};
  auto g = build_graph(s);
  resolve_momenta(g);
  std::printf("free=%d sign=%d deg=(%d,%d) rel=%s\n", g.num_free, cluster_sign(s.clusters),
              int(g.degree[0]), int(g.degree[1]), to_string(relevance(g)));
  std::printf("oracle=%d\n", int(delta_oracle(g, 1, 2)));
  auto cls = classify(g);
  std::printf("tag=%s motives=%zu\n", to_string(cls.tag), cls.recollisions.size());
  if (!cls.recollisions.empty())
    std::printf("motive=%s sigma=%d site=%d\n", to_string(cls.recollisions[0].id),
                cls.recollisions[0].sigma, cls.recollisions[0].site);
  // dependency of k_{1,1} (edge id: lower3[v2=2][0]=left)
  int e_k11 = g.lower3[1][0];
  std::printf("k11 edge=%d dep=", e_k11);
  for (int f = 0; f < g.num_free; ++f) std::printf("%d,", int(g.dep_of(e_k11)[f]));
  std::printf(" free_ids=");
  for (int f : g.free_ids) std::printf("%d,", f);
  std::printf("\n");
  return 0;
}
