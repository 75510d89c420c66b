"""Cross-domain network representations (CDNR).

Learns latent node features for a structurally scarce target network by
transferring random-walk structural knowledge from a richer source network:
degree-based node-scale balancing, cross-domain link prediction, target edge
reweighting/evolvement, then Skip-gram training on biased walks.
"""

from .graph import (
    Graph,
    DegreeStats,
    PowerLawFit,
    GraphParseError,
    PowerLawFitError,
    load_edge_list,
    dump_edge_list,
    degree_stats,
    stats_from_values,
    fit_power_law,
)
from .synth import LabeledGraph, scale_free, planted_partition, degrade

__version__ = "0.1.0"
