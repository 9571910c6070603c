"""Simulators for randomized (Δ+1)-list coloring in the CONGESTED-CLIQUE,
low-memory MPC and LCA models."""
from .errors import *  # noqa: F401,F403
from .graph import (UNCOLORED, Graph, ListColoringInstance, Palettes, ValidityReport, brute_force_color,
                    generate_graph, gnp, greedy_list_color, random_regular, validate_coloring)
from .kwise import KWiseSeed, kwise_eval, raw_eval, sample_seed
from .partition import derive_params, partition_instance, verify_partition_properties
from .bidding import (GoodInstance, c_sequence, color_list_instance, generate_good_instance,
                      replay_with_nstar, sample_colors, sparsified_coloring)
from .shattering import analyze_bad_set, color_components
from .clique import (CliqueConfig, CliqueNetwork, RoutingRequest, SimulationTask, lenzen_route,
                     opportunistic_simulate, run_clique_coloring, run_highdeg_coloring, run_local_direct)
from .mpc import MpcCluster, MpcConfig, run_mpc_coloring, shard_graph
from .lca import LcaConfig, LcaEngine, LcaOracle, lca_color, sweep

__version__ = "0.1.0"
