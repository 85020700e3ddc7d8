"""Anchor-based sparse attention for graph transformers."""

from .anchors import AnchorSet, anchor_sweep, select_anchors, verify_dominating
from .attention import (AttentionParams, DenseField, LayerParams, ReceptiveField,
                        attended_pair_count, attention_backward, attention_forward,
                        augment_subgraph, build_receptive_field, dense_pair_count,
                        mean_readout, transformer_layer, transformer_layer_backward)
from .encoding import BiasTable, SpdScheme, encode_pair
from .graph import (UNREACHABLE, Graph, GraphFormatError, SpdTable, bfs_spd, erdos_renyi,
                    from_edge_list, k_hop, read_edge_list_file, write_edge_list_file)

__version__ = "0.1.0"
