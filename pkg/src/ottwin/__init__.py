"""Digital-twin simulation and haptic teleoperation for optically trapped microrobots.

Core layers, bottom up:

- ``force_model``: piecewise trap-force surrogate, fitting, multi-sphere wrench
- ``dynamics``: overdamped Brownian rigid-body stepping with penalty contacts
- ``teleop``: bilateral input/feedback pipeline (filters, trap motion, haptic render)
- ``scenario``: JSON scene documents compiled to simulation worlds
- ``session``: frame-locked trial engine, JSONL logging, deterministic replay
- ``experiments``: rotation, consistency and delivery studies
- ``service`` / ``cli``: network service (WebSocket + TCP) and command line

Units throughout: micrometres, seconds, piconewtons; viscosity in pN·s/µm²
(1 mPa·s == 1e-3 pN·s/µm², so water is ``eta = 1e-3``).
"""

__version__ = "0.1.0"
