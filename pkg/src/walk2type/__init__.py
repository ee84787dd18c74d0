"""walk2type: entity typing from knowledge-graph random walks.

Pipeline: N-Triples graph -> strategy-controlled walk corpora ->
(order-aware) skip-gram embeddings -> fused feature vectors ->
flat or hierarchical neural classification -> metrics and weight reports.
"""

__version__ = "0.1.0"
