"""
esdp – API usage mining and code recommendation.

This package defines:
- The source abstraction (extractor) and the transaction / sequence databases
- Sequential pattern mining and the mined XML repository
- The query engine that turns a typed statement into ranked API sequences
- Graph-based object usage models (groums) and frequent subgraph mining
- Retrieval metrics and the command-line runner
"""

__version__ = "0.1.0"
