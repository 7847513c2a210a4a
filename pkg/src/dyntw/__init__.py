"""Dynamic query answering on bounded-treewidth graphs by periodic rebuilds."""
