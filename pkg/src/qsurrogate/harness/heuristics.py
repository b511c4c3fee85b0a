"""Parameter-transfer angles for random heavy-hex Ising models."""

import hashlib

from ..engine import AngleVector

HEURISTIC_ANGLES = {
    3: AngleVector(
        gamma=(-0.14264, -0.26589, -0.34195),
        beta=(0.50502, 0.35713, 0.19264),
    ),
    4: AngleVector(
        gamma=(-0.12077, -0.22360, -0.29902, -0.35329),
        beta=(0.54321, 0.41806, 0.28615, 0.16041),
    ),
    5: AngleVector(
        gamma=(-0.11764, -0.19946, -0.268736, -0.321586, -0.34583),
        beta=(0.53822, 0.44776, 0.32923, 0.23056, 0.12587),
    ),
}


def heuristic_angles(p: int) -> AngleVector:
    try:
        return HEURISTIC_ANGLES[p]
    except KeyError:
        raise KeyError(f"no transfer angles tabulated for p={p}; available: {sorted(HEURISTIC_ANGLES)}") from None


def table_digest() -> str:
    """sha256 over the repr of every tabulated angle, for integrity checks."""
    h = hashlib.sha256()
    for p in sorted(HEURISTIC_ANGLES):
        a = HEURISTIC_ANGLES[p]
        h.update(repr((p, a.gamma, a.beta)).encode())
    return h.hexdigest()
