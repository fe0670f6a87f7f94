from ldpcscale import DegreeDistribution, Ensemble

REGULAR_36 = Ensemble.regular(3, 6)

# λ(x) = 0.5x + 0.5x², ρ(x) = x⁵
IRREGULAR = Ensemble(DegreeDistribution({2: 0.5, 3: 0.5}), DegreeDistribution({6: 1.0}))

# λ(x) = 0.25x + 0.75x², ρ(x) = 0.5x⁴ + 0.5x⁶
IRREGULAR_MIXED = Ensemble(
    DegreeDistribution({2: 0.25, 3: 0.75}), DegreeDistribution({5: 0.5, 7: 0.5})
)

ensembles = [REGULAR_36, IRREGULAR, IRREGULAR_MIXED]

ensemble_ids = ["regular-3-6", "irregular-2-3-6", "irregular-2-3-5-7"]

# (ε, y) grid for identity checks
eps_grid = [0.2, 0.3, 0.35, 0.4, 0.45]
y_grid = [0.4, 0.55, 0.7, 0.85, 1.0]
