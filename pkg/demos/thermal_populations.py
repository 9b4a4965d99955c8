"""
Thermal structure of the rotational ladder
==========================================

Where does a room-temperature molecular ion actually sit?  This walk
through the level structure shows why the detection scheme has to wait
for the molecule to visit the rotational ground level: at 300 K the
population is spread over hundreds of rotational states and the ground
level holds well under one percent.
"""

from dpqlsim.spectroscopy import (
    ROT_GROUND,
    MolecularConstants,
    enumerate_levels,
    level_energy,
    manifold_population,
    most_probable_rotational_state,
    partition_function,
    thermal_population,
)

constants = MolecularConstants()

# The truncated level set: two vibrational levels, both fine-structure
# manifolds, seventy rotational levels each.
levels = enumerate_levels(constants)
print(f"levels tracked: {len(levels)}")
print(f"ground level: {ROT_GROUND.label()} at "
      f"{level_energy(ROT_GROUND, constants):.3f} /cm")

for T in (300.0, 450.0):
    print(f"\n--- T = {T:g} K ---")
    print(f"partition function Z = {partition_function(constants, T):.1f}")

    # Vibrational and fine-structure marginals: the molecule is almost
    # always in v=0, and the detected manifold holds about two thirds.
    p_v0 = manifold_population(constants, T, v=0)
    p_upper = manifold_population(constants, T, v=0, two_omega=3) / p_v0
    print(f"P(v=0) = {p_v0:.4f}")
    print(f"P(Omega=3/2 | v=0) = {p_upper:.4f}")

    # The one level the dipole-phonon gate can use.
    pg = thermal_population(ROT_GROUND, constants, T)
    print(f"P(rotational ground) = {pg:.5f}  ({100 * pg:.3f}%)")

    peak = most_probable_rotational_state(constants, T)
    print(f"most probable rotational level: J = {peak.two_J}/2 "
          f"with P = {thermal_population(peak, constants, T):.5f}")

# Cooling the environment helps less than the Boltzmann factor alone
# suggests, because the level degeneracies keep weight at high J.
print("\nground-level population vs temperature:")
for T in (2.0, 77.0, 300.0, 450.0):
    print(f"  {T:6.1f} K  ->  {thermal_population(ROT_GROUND, constants, T):.5f}")
