"""efmatch: envy-free matching in markets with lower and paramodular quotas."""
