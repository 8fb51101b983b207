"""Physical constants used throughout the package (SI units)."""

TABLE_VERSION = "CODATA-2018"

# CODATA 2018 recommended values
HBAR = 1.054571817e-34  # J s (exact, derived from h)
MU_B = 9.2740100783e-24  # J / T
MU_0 = 1.25663706212e-6  # N / A^2
K_B = 1.380649e-23  # J / K (exact)

# 87Rb atomic mass, 86.909180527 u
M_RB87 = 1.44316e-25  # kg

# 87Rb ground-state hyperfine splitting |F=1> <-> |F=2>
RB87_HYPERFINE_HZ = 6.834682610904e9
