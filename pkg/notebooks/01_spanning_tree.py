# %% [markdown]
# # The spanning tree overlay
#
# Nodes hear each other when they sit within radio range. Of all the links in
# that radio graph we keep a minimum spanning tree, and every later message
# travels along it.

# %%
import random

from adhocsec import build_mst, build_radio_graph, tree_path

rng = random.Random(4)
positions = {i: (rng.uniform(0, 100), rng.uniform(0, 100)) for i in range(9)}
graph = build_radio_graph(positions, 70)
print(len(graph.edges), "radio links")

# %%
tree = build_mst(graph)
for i, j in tree.sorted_edges():
    print(f"{i} -- {j}  {tree.weights[(i, j)]:.2f}")
print("total", round(tree.total_weight, 3))

# %% [markdown]
# Ties are broken on (weight, low id, high id), so the tree is the same on
# every run. Routes are the unique tree path between two nodes.

# %%
print(tree_path(tree, 0, 8))
print({n: sorted(nbrs) for n, nbrs in tree.adjacency().items()})
