"""Semantic-consistency point cloud registration toolkit."""

from .geometry import (KeypointSet, LabelAlphabet, LabeledPointCloud,
                       RigidTransform, SpatialIndex, apply_transform,
                       build_spatial_index, kabsch)
from .signatures import (BmrConfig, ClusterParams, LandmarkSet, cluster_landmarks,
                         compute_bmr_ss, compute_local_ss, compute_saliency,
                         ls_consistent, ring_index, rws_consistent,
                         scene_similarity, select_landmark_categories)
from .matching import (Correspondence, CorrespondenceSet, DescriptorSet,
                       MatchingGroup, PipelineParams, build_matching_groups,
                       compute_fpfh, group_match, mask_match, ml_semreg_pipeline,
                       score_matrix, select_mnn, select_nn, topk_mask)
from .estimation import RansacConfig, RegistrationResult, ransac_register, refine_transform
from .evaluation import (EvalThresholds, PairMetrics, blur_labels, classify_inlier,
                         correspondence_metrics, registration_errors,
                         registration_recall, sweep_r_local)
from .synth import SceneSpec, ScenePair, generate_scene_pair, keypoint_sample
from .config import PipelineConfig, parse_config, serialize_config

__all__ = [n for n in dir() if not n.startswith("_")]
