"""Unit constants and conversions.

All pressures in this package are gauge pascals unless a name says otherwise.
"""

PSI_TO_PA = 6894.757293168361

STANDARD_GRAVITY = 9.80665  # m/s^2


def psi(value: float) -> float:
    """Convert PSI to Pa."""
    return value * PSI_TO_PA


def pa_to_psi(value: float) -> float:
    """Convert Pa to PSI."""
    return value / PSI_TO_PA
