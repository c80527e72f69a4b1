"""Money-laundering annotation pipeline for crypto incident response.

Stages: extract case clues from an incident writeup, trace illicit funds
hop-by-hop over chain data, label every touched account, then render an
auditor-facing report scored for clue coverage.
"""

__version__ = "0.1.0"
