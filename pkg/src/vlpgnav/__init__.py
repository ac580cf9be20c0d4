"""Object navigation with visual-language pose graphs.

End-to-end stack: pose-graph construction during exploration, text-query
viewpoint selection, image-space object centering, probability-map local
search, and an ablation benchmark over a deterministic 2D simulator.
"""

from .bench import SuiteReport, angular_error, run_suite, sae
from .embedding import (CameraObservation, EmbeddingVector, PromptPair,
                        RemoteProvider, SyntheticProvider, cosine_similarity)
from .geometry import (FovSector, OccupancyGrid, Pose2D, cells_in_fov,
                       fov_overlap_area, raycast)
from .graph import Vlpg, VlpgNode, top_k
from .localsearch import (ProbabilityMap, SearchConfig, apply_cluster_views,
                          decay_viewed_region, init_probability_map,
                          replan_viewpoint, sample_viewpoints)
from .viewpoint import (LiftedViewpoint, ViewpointCluster, ViewpointConfig,
                        best_guess, dbscan, initial_viewpoint, lift,
                        query_viewpoint)

__version__ = "0.1.0"
