"""Swarm relay-chain simulator with decentralized online neuroevolution."""

__version__ = "0.1.0"
