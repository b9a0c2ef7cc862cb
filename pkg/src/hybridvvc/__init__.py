"""Volt-VAr control simulator and a discriminator-arbitrated droop/SAC hybrid agent."""

__version__ = "0.1.0"
