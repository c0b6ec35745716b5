"""mnet: desk-scale benchmark trial attestation.

Server, client, post-hoc verifier, task-instruction generators, and a
deterministic adversarial harness, bound together by a framed TCP wire
protocol and SHA-256 commitments over recorded video frames.
"""

__version__ = "0.1.0"
