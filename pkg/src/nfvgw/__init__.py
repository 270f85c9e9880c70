"""Distributed IoT gateway built from chained VNFs, application-level SDN switches
and P2P overlays, driven by a deterministic discrete-event simulator."""

__version__ = "0.1.0"
