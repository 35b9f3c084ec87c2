"""Censorship-resistant transaction submission over parallel proposer lanes.

Submodules: ``crypto``, ``gf256``, ``codec``, ``protocol``, ``ledger``,
``analysis``, ``planner``, ``experiments`` and ``cli``.
"""

__version__ = "0.1.0"
