"""Adversarially robust network-intrusion detection workbench."""

__version__ = "0.1.0"
