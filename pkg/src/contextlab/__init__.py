"""contextlab: contextual hidden-variable Bell-test laboratory.

Library layout:

- `models`    exact finite contextual models and their expectations
- `simulate`  continuous reference models, schedules, event-by-event streams
- `analysis`  correlation estimators, CHSH, shared-space bound, no-signaling
- `coins`     coin-flipping devices, urn draws, box ensembles, hole protocol
- `randtests` randomness and sample-purity tests over binary streams
- `cli`       reproducible command-line experiment runner
"""

__version__ = "0.1.0"
